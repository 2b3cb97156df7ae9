#include <arm_neon.h>

#include "skf/kernels.hpp"

namespace skf::kernels::detail {

void eval_poly_neon(const PolyProgram& prog, const double* const* x, std::size_t count, double* out) {
  const int n = prog.n;
  std::size_t p = 0;
  for (; p + 2 <= count; p += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t t = 0; t < prog.terms(); ++t) {
      float64x2_t v = vdupq_n_f64(prog.coef[t]);
      const std::uint8_t* e = &prog.exps[t * static_cast<std::size_t>(n)];
      for (int i = 0; i < n; ++i) {
        if (!e[i]) continue;
        float64x2_t xi = vld1q_f64(x[i] + p);
        for (int k = 0; k < e[i]; ++k) v = vmulq_f64(v, xi);
      }
      acc = vaddq_f64(acc, v);
    }
    vst1q_f64(out + p, acc);
  }
  if (p < count) {
    const double* tail[256];
    for (int i = 0; i < n; ++i) tail[i] = x[i] + p;
    eval_poly_scalar(prog, tail, count - p, out + p);
  }
}

void accumulate_neon(const MonomialPlan& plan, const double* const* x, const double* w, std::size_t count,
                     double* sums) {
  std::vector<float64x2_t> val(plan.size), acc(plan.size, vdupq_n_f64(0.0));
  std::size_t p = 0;
  for (; p + 2 <= count; p += 2) {
    val[0] = w ? vld1q_f64(w + p) : vdupq_n_f64(1.0);
    for (std::size_t k = 1; k < plan.size; ++k) val[k] = vmulq_f64(val[plan.parent[k]], vld1q_f64(x[plan.coord[k]] + p));
    for (std::size_t k = 0; k < plan.size; ++k) acc[k] = vaddq_f64(acc[k], val[k]);
  }
  for (std::size_t k = 0; k < plan.size; ++k) sums[k] += vgetq_lane_f64(acc[k], 0) + vgetq_lane_f64(acc[k], 1);
  if (p < count) {
    const double* tail[256];
    for (int i = 0; i < plan.n; ++i) tail[i] = x[i] + p;
    accumulate_scalar(plan, tail, w ? w + p : nullptr, count - p, sums);
  }
}

void axpy2_neon(double* x, const double* a, double dt, const double* b, double c, std::size_t count) {
  std::size_t p = 0;
  for (; p + 2 <= count; p += 2) {
    float64x2_t v = vld1q_f64(x + p);
    v = vfmaq_n_f64(v, vld1q_f64(a + p), dt);
    v = vfmaq_n_f64(v, vld1q_f64(b + p), c);
    vst1q_f64(x + p, v);
  }
  axpy2_scalar(x + p, a + p, dt, b + p, c, count - p);
}

}  // namespace skf::kernels::detail

#include <immintrin.h>

#include "skf/kernels.hpp"

namespace skf::kernels::detail {

void eval_poly_avx2(const PolyProgram& prog, const double* const* x, std::size_t count, double* out) {
  const int n = prog.n;
  std::size_t p = 0;
  for (; p + 4 <= count; p += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t t = 0; t < prog.terms(); ++t) {
      __m256d v = _mm256_set1_pd(prog.coef[t]);
      const std::uint8_t* e = &prog.exps[t * static_cast<std::size_t>(n)];
      for (int i = 0; i < n; ++i) {
        if (!e[i]) continue;
        __m256d xi = _mm256_loadu_pd(x[i] + p);
        for (int k = 0; k < e[i]; ++k) v = _mm256_mul_pd(v, xi);
      }
      acc = _mm256_add_pd(acc, v);
    }
    _mm256_storeu_pd(out + p, acc);
  }
  if (p < count) {
    const double* tail[256];
    for (int i = 0; i < n; ++i) tail[i] = x[i] + p;
    eval_poly_scalar(prog, tail, count - p, out + p);
  }
}

void accumulate_avx2(const MonomialPlan& plan, const double* const* x, const double* w, std::size_t count,
                     double* sums) {
  // four lanes per basis entry, laid out contiguously
  std::vector<double> val(4 * plan.size), acc(4 * plan.size, 0.0);
  std::size_t p = 0;
  for (; p + 4 <= count; p += 4) {
    _mm256_storeu_pd(val.data(), w ? _mm256_loadu_pd(w + p) : _mm256_set1_pd(1.0));
    for (std::size_t k = 1; k < plan.size; ++k) {
      __m256d v = _mm256_mul_pd(_mm256_loadu_pd(&val[4 * plan.parent[k]]), _mm256_loadu_pd(x[plan.coord[k]] + p));
      _mm256_storeu_pd(&val[4 * k], v);
    }
    for (std::size_t k = 0; k < plan.size; ++k)
      _mm256_storeu_pd(&acc[4 * k], _mm256_add_pd(_mm256_loadu_pd(&acc[4 * k]), _mm256_loadu_pd(&val[4 * k])));
  }
  for (std::size_t k = 0; k < plan.size; ++k) sums[k] += (acc[4 * k] + acc[4 * k + 1]) + (acc[4 * k + 2] + acc[4 * k + 3]);
  if (p < count) {
    const double* tail[256];
    for (int i = 0; i < plan.n; ++i) tail[i] = x[i] + p;
    accumulate_scalar(plan, tail, w ? w + p : nullptr, count - p, sums);
  }
}

void axpy2_avx2(double* x, const double* a, double dt, const double* b, double c, std::size_t count) {
  const __m256d vdt = _mm256_set1_pd(dt), vc = _mm256_set1_pd(c);
  std::size_t p = 0;
  for (; p + 4 <= count; p += 4) {
    __m256d v = _mm256_loadu_pd(x + p);
    v = _mm256_fmadd_pd(_mm256_loadu_pd(a + p), vdt, v);
    v = _mm256_fmadd_pd(_mm256_loadu_pd(b + p), vc, v);
    _mm256_storeu_pd(x + p, v);
  }
  axpy2_scalar(x + p, a + p, dt, b + p, c, count - p);
}

}  // namespace skf::kernels::detail

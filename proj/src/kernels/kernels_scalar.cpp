#include "skf/kernels.hpp"

namespace skf::kernels {

PolyProgram compile(const Polynomial& p) {
  PolyProgram prog;
  prog.n = p.n();
  for (const auto& [a, c] : p.terms()) {
    prog.coef.push_back(c);
    for (int i = 0; i < a.size(); ++i) prog.exps.push_back(static_cast<std::uint8_t>(a[i]));
  }
  return prog;
}

MonomialPlan plan_monomials(const DegreeBasis& basis) {
  MonomialPlan plan;
  plan.n = basis.n();
  plan.size = basis.size();
  plan.parent.assign(plan.size, 0);
  plan.coord.assign(plan.size, 0);
  for (std::size_t k = 1; k < plan.size; ++k) {
    const MultiIndex& a = basis[k];
    int i = 0;
    while (a[i] == 0) ++i;
    MultiIndex b = a;
    b.set(i, a[i] - 1);
    plan.parent[k] = static_cast<std::uint32_t>(basis.lookup(b));
    plan.coord[k] = static_cast<std::uint8_t>(i);
  }
  return plan;
}

namespace detail {

void eval_poly_scalar(const PolyProgram& prog, const double* const* x, std::size_t count, double* out) {
  const int n = prog.n;
  for (std::size_t p = 0; p < count; ++p) {
    double acc = 0.0;
    for (std::size_t t = 0; t < prog.terms(); ++t) {
      double v = prog.coef[t];
      const std::uint8_t* e = &prog.exps[t * static_cast<std::size_t>(n)];
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < e[i]; ++k) v *= x[i][p];
      acc += v;
    }
    out[p] = acc;
  }
}

void accumulate_scalar(const MonomialPlan& plan, const double* const* x, const double* w, std::size_t count,
                       double* sums) {
  std::vector<double> val(plan.size);
  for (std::size_t p = 0; p < count; ++p) {
    val[0] = w ? w[p] : 1.0;
    for (std::size_t k = 1; k < plan.size; ++k) val[k] = val[plan.parent[k]] * x[plan.coord[k]][p];
    for (std::size_t k = 0; k < plan.size; ++k) sums[k] += val[k];
  }
}

void axpy2_scalar(double* x, const double* a, double dt, const double* b, double c, std::size_t count) {
  for (std::size_t p = 0; p < count; ++p) x[p] += a[p] * dt + b[p] * c;
}

}  // namespace detail
}  // namespace skf::kernels

#pragma once

// Particle-loop kernels over structure-of-arrays state. Each kernel has a
// scalar reference and vector variants picked at runtime.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "skf/polybasis.hpp"
#include "skf/polynomial.hpp"

namespace skf::kernels {

enum class Isa { Scalar, Avx2, Neon };

const char* isa_name(Isa isa);
// best variant this CPU and build support; SKF_FORCE_SCALAR=1 pins scalar
Isa active_isa();
bool isa_available(Isa isa);

// Flattened polynomial: term t has coefficient coef[t] and exponents
// exps[t*n .. t*n+n).
struct PolyProgram {
  int n = 0;
  std::vector<double> coef;
  std::vector<std::uint8_t> exps;
  std::size_t terms() const { return coef.size(); }
};
PolyProgram compile(const Polynomial& p);

// Monomial table for a graded basis: entry k = entry parent[k] times x[coord[k]].
struct MonomialPlan {
  int n = 0;
  std::size_t size = 0;
  std::vector<std::uint32_t> parent;
  std::vector<std::uint8_t> coord;
};
MonomialPlan plan_monomials(const DegreeBasis& basis);

// out[p] = poly(x[0][p], ..., x[n-1][p])
void eval_poly(const PolyProgram& prog, const double* const* x, std::size_t count, double* out, Isa isa);
// sums[k] += sum_p w[p] * x_p^{alpha_k}; w may be null (unit weights)
void accumulate_monomials(const MonomialPlan& plan, const double* const* x, const double* w, std::size_t count,
                          double* sums, Isa isa);
// x[p] += a[p] * dt + b[p] * c
void axpy2(double* x, const double* a, double dt, const double* b, double c, std::size_t count, Isa isa);

namespace detail {
void eval_poly_scalar(const PolyProgram&, const double* const*, std::size_t, double*);
void accumulate_scalar(const MonomialPlan&, const double* const*, const double*, std::size_t, double*);
void axpy2_scalar(double*, const double*, double, const double*, double, std::size_t);
#if defined(SKF_BUILD_AVX2)
void eval_poly_avx2(const PolyProgram&, const double* const*, std::size_t, double*);
void accumulate_avx2(const MonomialPlan&, const double* const*, const double*, std::size_t, double*);
void axpy2_avx2(double*, const double*, double, const double*, double, std::size_t);
#endif
#if defined(SKF_BUILD_NEON)
void eval_poly_neon(const PolyProgram&, const double* const*, std::size_t, double*);
void accumulate_neon(const MonomialPlan&, const double* const*, const double*, std::size_t, double*);
void axpy2_neon(double*, const double*, double, const double*, double, std::size_t);
#endif
}  // namespace detail

}  // namespace skf::kernels

#include <cstdlib>
#include <cstring>

#include "skf/error.hpp"
#include "skf/kernels.hpp"

namespace skf::kernels {

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "?";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(SKF_BUILD_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(SKF_BUILD_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() {
  static const Isa chosen = [] {
    const char* env = std::getenv("SKF_FORCE_SCALAR");
    if (env && std::strcmp(env, "0") != 0) return Isa::Scalar;
    if (isa_available(Isa::Avx2)) return Isa::Avx2;
    if (isa_available(Isa::Neon)) return Isa::Neon;
    return Isa::Scalar;
  }();
  return chosen;
}

namespace {
void require(Isa isa) {
  if (!isa_available(isa)) throw ConfigError(std::string("kernel variant unavailable: ") + isa_name(isa));
}
}  // namespace

void eval_poly(const PolyProgram& prog, const double* const* x, std::size_t count, double* out, Isa isa) {
  require(isa);
  if (prog.n > 256) throw ConfigError("kernels support at most 256 coordinates");
  switch (isa) {
#if defined(SKF_BUILD_AVX2)
    case Isa::Avx2: return detail::eval_poly_avx2(prog, x, count, out);
#endif
#if defined(SKF_BUILD_NEON)
    case Isa::Neon: return detail::eval_poly_neon(prog, x, count, out);
#endif
    default: return detail::eval_poly_scalar(prog, x, count, out);
  }
}

void accumulate_monomials(const MonomialPlan& plan, const double* const* x, const double* w, std::size_t count,
                          double* sums, Isa isa) {
  require(isa);
  if (plan.n > 256) throw ConfigError("kernels support at most 256 coordinates");
  switch (isa) {
#if defined(SKF_BUILD_AVX2)
    case Isa::Avx2: return detail::accumulate_avx2(plan, x, w, count, sums);
#endif
#if defined(SKF_BUILD_NEON)
    case Isa::Neon: return detail::accumulate_neon(plan, x, w, count, sums);
#endif
    default: return detail::accumulate_scalar(plan, x, w, count, sums);
  }
}

void axpy2(double* x, const double* a, double dt, const double* b, double c, std::size_t count, Isa isa) {
  require(isa);
  switch (isa) {
#if defined(SKF_BUILD_AVX2)
    case Isa::Avx2: return detail::axpy2_avx2(x, a, dt, b, c, count);
#endif
#if defined(SKF_BUILD_NEON)
    case Isa::Neon: return detail::axpy2_neon(x, a, dt, b, c, count);
#endif
    default: return detail::axpy2_scalar(x, a, dt, b, c, count);
  }
}

}  // namespace skf::kernels

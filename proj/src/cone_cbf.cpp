#include <cmath>
#include <functional>

#include "skf/error.hpp"
#include "skf/stein.hpp"

namespace skf {

DwEvenDynamics dw_even_dynamics(double sigma) {
  double q = sigma * sigma;
  DwEvenDynamics d;
  d.A << 2, -2, 0, 6 * q, 4, -4, 0, 15 * q, 6;
  d.B << 0, 0, -6;
  d.c << q, 0, 0;
  return d;
}

double hankel_lower_bound(double s1, double s2, double s3) {
  // Schur complement of [[1,s1],[s1,s2]] in the 3x3 Hankel matrix
  double det = s2 - s1 * s1;
  if (!(det > 0.0)) throw NumericalError("Hankel minor s2 - s1^2 is not positive");
  return (s2 * s2 * s2 - 2.0 * s1 * s2 * s3 + s3 * s3) / det;
}

double barrier_upper_bound(double s1, double s2, double s3, double sigma, double kappa_cbf) {
  if (!(s1 > 0.0)) throw NumericalError("barrier bound needs s1 > 0");
  DwEvenDynamics d = dw_even_dynamics(sigma);
  Eigen::Vector3d s(s1, s2, s3);
  Eigen::Vector3d drift = d.A * s + d.c;  // u-free part of ds/dt
  double g = s1 * s3 - s2 * s2;
  // dg/dt = ds1 s3 + s1 ds3 - 2 s2 ds2, and ds3 carries -6u
  double g0 = drift[0] * s3 + s1 * drift[2] - 2.0 * s2 * drift[1];
  return (g0 + kappa_cbf * g) / (6.0 * s1);
}

ConeCbfResult cone_cbf_closure_1d(const ConeCbf1dState& st) {
  ConeCbfResult out;
  out.lower = hankel_lower_bound(st.s1, st.s2, st.s3);
  out.upper = barrier_upper_bound(st.s1, st.s2, st.s3, st.sigma, st.kappa_cbf);
  if (out.upper < out.lower) {
    out.u = out.lower;
    out.clamped = true;
    return out;
  }
  out.u = out.lower + st.theta_inf * (out.upper - out.lower);
  return out;
}

namespace {

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb, double whole,
             double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(a, m, fa, flm, fm);
  double right = simpson(m, b, fm, frm, fb);
  double diff = left + right - whole;
  if (std::fabs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  if (depth <= 0) throw NumericalError("adaptive quadrature did not converge");
  return adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  // split into panels so the recursion starts from a resolved grid
  const int panels = 64;
  double h = (b - a) / panels, acc = 0.0;
  for (int k = 0; k < panels; ++k) {
    double x0 = a + k * h, x1 = x0 + h, xm = 0.5 * (x0 + x1);
    double f0 = f(x0), fm = f(xm), f1 = f(x1);
    acc += adapt(f, x0, x1, f0, fm, f1, simpson(x0, x1, f0, fm, f1), tol / panels, 40);
  }
  return acc;
}

}  // namespace

StationaryMoments dw_stationary_moments(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  double q = sigma * sigma;
  // log-density (x^2 - x^4/2)/q peaks at x = +-1 with value 1/(2q)
  double peak = 0.5 / q;
  auto logp = [q, peak](double x) { return (x * x - 0.5 * x * x * x * x) / q - peak; };
  // integrate where the density is above exp(-60) of the peak
  double X = 1.0;
  while (logp(X) > -60.0) X *= 1.25;
  auto moment = [&](int p) {
    return integrate([&](double x) { return std::pow(x, 2 * p) * std::exp(logp(x)); }, -X, X, 1e-13);
  };
  double Z = moment(0);
  StationaryMoments s;
  s.m2 = moment(1) / Z;
  s.m4 = moment(2) / Z;
  s.m6 = moment(3) / Z;
  s.m8 = moment(4) / Z;
  return s;
}

double calibrate_theta_inf(double sigma, double kappa_cbf) {
  StationaryMoments s = dw_stationary_moments(sigma);
  double L = hankel_lower_bound(s.m2, s.m4, s.m6);
  double U = barrier_upper_bound(s.m2, s.m4, s.m6, sigma, kappa_cbf);
  if (!(U > L)) throw NumericalError("calibration bounds collapse");
  return (s.m8 - L) / (U - L);
}

}  // namespace skf

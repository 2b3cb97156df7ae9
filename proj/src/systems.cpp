#include "skf/systems.hpp"

#include <cmath>

#include "skf/error.hpp"

namespace skf {

void SystemRegistry::add(SystemSpec spec) {
  if (has(spec.name)) throw ConfigError("duplicate system name: " + spec.name);
  specs_.push_back(std::move(spec));
}

bool SystemRegistry::has(const std::string& name) const {
  for (const auto& s : specs_)
    if (s.name == name) return true;
  return false;
}

const SystemSpec& SystemRegistry::get(const std::string& name) const {
  for (const auto& s : specs_)
    if (s.name == name) return s;
  throw ConfigError("unknown system: " + name);
}

std::vector<std::string> SystemRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& s : specs_) out.push_back(s.name);
  return out;
}

SystemInstance SystemRegistry::build(const std::string& name, const ParamMap& overrides) const {
  const SystemSpec& spec = get(name);
  ParamMap p = spec.defaults;
  for (const auto& [k, v] : overrides) {
    if (!p.count(k)) throw ConfigError("system " + name + " has no parameter '" + k + "'");
    if (!std::isfinite(v)) throw ConfigError("parameter '" + k + "' is not finite");
    p[k] = v;
  }
  SystemInstance inst = spec.build(p);
  inst.name = name;
  inst.params = p;
  return inst;
}

namespace {

using P = Polynomial;

P var(int n, int i, double c = 1.0) { return P::variable(n, i, c); }
P cst(int n, double c) { return P::constant(n, c); }

InitialLaw iso_law(std::vector<double> mean, double var) {
  InitialLaw law;
  law.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<long>(mean.size()));
  law.cov = var * Eigen::MatrixXd::Identity(law.mean.size(), law.mean.size());
  return law;
}

int int_param(const ParamMap& p, const std::string& k, int lo) {
  double v = p.at(k);
  if (v != std::floor(v) || v < lo) throw ConfigError("parameter '" + k + "' must be an integer >= " + std::to_string(lo));
  return static_cast<int>(v);
}

SystemInstance build_ou(const ParamMap& p) {
  double th = p.at("theta"), s = p.at("sigma");
  SystemInstance inst;
  inst.sde = PolynomialSDE({var(1, 0, -th)}, {cst(1, s)}, 1);
  Eigen::MatrixXd R(1, 1);
  R(0, 0) = p.at("meas_var");
  inst.measurement = MeasurementModel::select(1, {0}, R);
  inst.init = iso_law({1.0}, 0.25);
  inst.filter = {2, 0.2, 25};
  inst.moments = {2, 1.0, 0.1, inst.init};
  return inst;
}

SystemInstance build_duffing(const ParamMap& p) {
  double d = p.at("delta"), a = p.at("alpha"), b = p.at("beta"), s = p.at("sigma");
  int n = 2;
  P f1 = var(n, 1);
  P f2 = var(n, 1, -d) + var(n, 0, -a) + P::monomial(MultiIndex{2, 0}, -b);
  SystemInstance inst;
  inst.sde = PolynomialSDE({f1, f2}, {cst(n, 0.0), cst(n, s)}, 1);
  Eigen::MatrixXd R(1, 1);
  R(0, 0) = p.at("meas_var");
  inst.measurement = MeasurementModel::select(n, {0}, R);
  inst.init = iso_law({0.5, 0.0}, 0.01);
  inst.filter = {4, 0.2, 25};
  inst.moments = {4, 2.0, 0.1, iso_law({0.5, 0.0}, 0.04)};
  return inst;
}

SystemInstance build_lv(const ParamMap& p) {
  double a = p.at("alpha"), b = p.at("beta"), g = p.at("gamma"), d = p.at("delta");
  int n = 2;
  P f1 = var(n, 0, a) + P::monomial(MultiIndex{1, 1}, -b);
  P f2 = var(n, 1, -g) + P::monomial(MultiIndex{1, 1}, d);
  std::vector<P> h = {cst(n, p.at("sigma1")), cst(n, 0.0), cst(n, 0.0), cst(n, p.at("sigma2"))};
  SystemInstance inst;
  inst.sde = PolynomialSDE({f1, f2}, h, 2);
  Eigen::MatrixXd R(1, 1);
  R(0, 0) = p.at("meas_var");
  inst.measurement = MeasurementModel::select(n, {0}, R);
  InitialLaw eq = iso_law({g / d, a / b}, 0.1);
  inst.init = eq;
  inst.filter = {4, 0.2, 25};
  inst.moments = {6, 1.5, 0.1, eq};
  return inst;
}

SystemInstance build_coupled(const ParamMap& p) {
  int N = int_param(p, "N", 1);
  double g = p.at("gamma"), a = p.at("alpha"), b = p.at("beta"), k = p.at("kappa"), s = p.at("sigma");
  int n = 2 * N;
  std::vector<P> drift;
  for (int i = 0; i < N; ++i) drift.push_back(var(n, N + i));
  for (int j = 0; j < N; ++j) {
    MultiIndex sq(n);
    sq.set(j, 2);
    P f = var(n, N + j, -g) + var(n, j, -a) + P::monomial(sq, -b);
    // free ends: the missing neighbour mirrors the boundary oscillator
    int left = j > 0 ? j - 1 : j;
    int right = j + 1 < N ? j + 1 : j;
    f += var(n, left, k) + var(n, right, k) + var(n, j, -2.0 * k);
    drift.push_back(f);
  }
  std::vector<P> h(static_cast<std::size_t>(n * N), cst(n, 0.0));
  for (int j = 0; j < N; ++j) h[static_cast<std::size_t>((N + j) * N + j)] = cst(n, s);
  SystemInstance inst;
  inst.sde = PolynomialSDE(drift, h, N);
  std::vector<int> obs;
  for (int i = 0; i < N; i += 2) obs.push_back(i);
  double rv = p.at("meas_std") * p.at("meas_std");
  inst.measurement = MeasurementModel::select(n, obs, rv * Eigen::MatrixXd::Identity(static_cast<long>(obs.size()), static_cast<long>(obs.size())));
  static const double cycle[] = {0.3, -0.2, 0.1, -0.3, 0.15, 0.25, -0.1, 0.2};
  std::vector<double> mean(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < N; ++i) mean[static_cast<std::size_t>(i)] = cycle[i % 8];
  inst.init = iso_law(mean, 0.15 * 0.15);
  inst.filter = {3, 0.15, 25};
  inst.moments = {3, 1.0, 0.15, inst.init};
  return inst;
}

SystemInstance build_double_well(const ParamMap& p) {
  int dim = int_param(p, "dim", 1);
  double s = p.at("sigma");
  std::vector<P> drift, h(static_cast<std::size_t>(dim * dim), cst(dim, 0.0));
  for (int i = 0; i < dim; ++i) {
    MultiIndex cube(dim);
    cube.set(i, 3);
    drift.push_back(var(dim, i) + P::monomial(cube, -1.0));
    h[static_cast<std::size_t>(i * dim + i)] = cst(dim, s);
  }
  SystemInstance inst;
  inst.sde = PolynomialSDE(drift, h, dim);
  Eigen::MatrixXd R(1, 1);
  R(0, 0) = p.at("meas_var");
  inst.measurement = MeasurementModel::select(dim, {0}, R);
  inst.init = iso_law(std::vector<double>(static_cast<std::size_t>(dim), 0.0), 0.01);
  inst.filter = {4, 0.2, 25};
  inst.moments = {4, 3.0, 0.1, inst.init};
  return inst;
}

SystemInstance build_tracer(const ParamMap& p) {
  double e = p.at("epsilon"), w = p.at("omega"), a = p.at("alpha"), k = p.at("kappa");
  int n = 3;
  P u1 = var(n, 0, e) + var(n, 1, w);
  P u2 = var(n, 0, -w) + var(n, 1, e);
  P u3 = var(n, 2, -2.0 * e) + P::monomial(MultiIndex{2, 0, 0}, a) + P::monomial(MultiIndex{0, 2, 0}, a);
  double q = std::sqrt(2.0 * k);
  std::vector<P> h(9, cst(n, 0.0));
  for (int i = 0; i < 3; ++i) h[static_cast<std::size_t>(i * 3 + i)] = cst(n, q);
  SystemInstance inst;
  inst.sde = PolynomialSDE({u1, u2, u3}, h, 3);
  Eigen::MatrixXd R = p.at("meas_var") * Eigen::MatrixXd::Identity(2, 2);
  inst.measurement = MeasurementModel::select(n, {0, 1}, R);
  inst.init = iso_law({0.5, 0.0, 0.0}, 0.04);
  inst.filter = {4, 0.2, 25};
  inst.moments = {6, 3.0, 0.1, inst.init};
  return inst;
}

}  // namespace

SystemRegistry register_builtin_systems() {
  SystemRegistry reg;
  reg.add({"ou_linear", "scalar Ornstein-Uhlenbeck dx = -theta x dt + sigma dW",
           {{"theta", 1.0}, {"sigma", 0.5}, {"meas_var", 0.04}}, build_ou});
  reg.add({"duffing", "damped Duffing oscillator with quadratic stiffness, noise on velocity",
           {{"delta", 0.3}, {"alpha", 1.0}, {"beta", 0.6}, {"sigma", 0.15}, {"meas_var", 0.04}}, build_duffing});
  reg.add({"lotka_volterra", "stochastic predator-prey with additive noise",
           {{"alpha", 1.0}, {"beta", 0.5}, {"gamma", 0.8}, {"delta", 0.3}, {"sigma1", 0.3}, {"sigma2", 0.2},
            {"meas_var", 0.04}},
           build_lv});
  reg.add({"coupled_oscillators", "chain of N Duffing oscillators, nearest-neighbour springs, free ends",
           {{"N", 2.0}, {"gamma", 0.3}, {"alpha", 1.0}, {"beta", 0.6}, {"kappa", 0.3}, {"sigma", 0.4}, {"meas_std", 0.3}},
           build_coupled});
  reg.add({"double_well", "gradient Langevin in the separable quartic double-well potential",
           {{"dim", 2.0}, {"sigma", 0.5}, {"meas_var", 0.04}}, build_double_well});
  reg.add({"tracer_3d", "incompressible 3D tracer advection with a quadratic vertical lift",
           {{"epsilon", 0.1}, {"omega", 1.0}, {"alpha", 0.5}, {"kappa", 0.05}, {"meas_var", 0.04}}, build_tracer});
  return reg;
}

const SystemRegistry& builtin_systems() {
  static const SystemRegistry reg = register_builtin_systems();
  return reg;
}

}  // namespace skf

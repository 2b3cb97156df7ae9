#include "skf/bench.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "skf/error.hpp"

#ifndef SKF_GIT_REV
#define SKF_GIT_REV "unknown"
#endif

namespace skf {

const char* const kVersion = "skf 0.1.0+g" SKF_GIT_REV;

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

RowRange parse_row_range(const std::string& s) {
  if (s == "auto") return RowRange::Auto;
  if (s == "first") return RowRange::FirstLayer;
  if (s == "standard") return RowRange::Standard;
  if (s == "extended") return RowRange::Extended;
  throw ConfigError("closure must be one of auto, first, standard, extended (got '" + s + "')");
}

void ExperimentConfig::validate() const {
  if (kind != "filter" && kind != "moments") throw ConfigError("kind must be 'filter' or 'moments'");
  if (!builtin_systems().has(system)) throw ConfigError("unknown system: " + system);
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (kind == "filter" && filters.empty()) throw ConfigError("filters must not be empty");
  for (const auto& f : filters)
    if (f != "SKF" && f != "EKF" && f != "UKF" && f != "EnKF" && f != "PF") throw ConfigError("unknown filter: " + f);
  if (r != -1 && r < 2) throw ConfigError("r must be at least 2");
  if (steps != -1 && steps < 1) throw ConfigError("steps must be positive");
  if (!(dt_ode > 0.0)) throw ConfigError("dt_ode must be positive");
  if (dt_pred != -1.0 && !(dt_pred > 0.0)) throw ConfigError("dt_pred must be positive");
  if (horizon != -1.0 && !(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (dt_window != -1.0 && !(dt_window > 0.0)) throw ConfigError("dt_window must be positive");
  if (!(mc_dt > 0.0)) throw ConfigError("mc_dt must be positive");
  if (mc_particles < 40) throw ConfigError("mc_particles must be at least 40");
  if (enkf_members < 2) throw ConfigError("EnKF needs at least two members");
  if (pf_particles < 1) throw ConfigError("PF needs at least one particle");
  if (refine_iters < 1) throw ConfigError("refine_iters must be positive");
  parse_row_range(closure);
  builtin_systems().build(system, params);
}

FilterConfig ExperimentConfig::filter_config(const SystemInstance& sys, bool for_moments) const {
  FilterConfig fc;
  fc.r = r > 0 ? r : (for_moments ? sys.moments.r : sys.filter.r);
  fc.dt_pred = dt_pred > 0.0 ? dt_pred : (for_moments ? sys.moments.dt_window : sys.filter.dt_pred);
  if (for_moments && dt_window > 0.0) fc.dt_pred = dt_window;
  fc.dt_ode = dt_ode;
  fc.scale_c = scale_c;
  fc.closure.range = parse_row_range(closure);
  fc.closure.active = active_closure;
  fc.refine.max_iters = refine_iters;
  fc.refine.tol = refine_tol;
  return fc;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = c.kind;
  j["system"] = c.system;
  j["params"] = c.params;
  j["filters"] = c.filters;
  j["seeds"] = c.seeds;
  j["r"] = c.r;
  j["steps"] = c.steps;
  j["dt_pred"] = c.dt_pred;
  j["dt_ode"] = c.dt_ode;
  j["scale_c"] = c.scale_c;
  j["closure"] = c.closure;
  j["active_closure"] = c.active_closure;
  j["refine_iters"] = c.refine_iters;
  j["refine_tol"] = c.refine_tol;
  j["enkf_members"] = c.enkf_members;
  j["pf_particles"] = c.pf_particles;
  j["horizon"] = c.horizon;
  j["dt_window"] = c.dt_window;
  j["mc_particles"] = c.mc_particles;
  j["mc_dt"] = c.mc_dt;
  j["mc_seed"] = c.mc_seed;
  j["out_dir"] = c.out_dir;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "kind") c.kind = v.get<std::string>();
      else if (k == "system") c.system = v.get<std::string>();
      else if (k == "params") c.params = v.get<ParamMap>();
      else if (k == "filters") c.filters = v.get<std::vector<std::string>>();
      else if (k == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
      else if (k == "r") c.r = v.get<int>();
      else if (k == "steps") c.steps = v.get<int>();
      else if (k == "dt_pred") c.dt_pred = v.get<double>();
      else if (k == "dt_ode") c.dt_ode = v.get<double>();
      else if (k == "scale_c") c.scale_c = v.get<double>();
      else if (k == "closure") c.closure = v.get<std::string>();
      else if (k == "active_closure") c.active_closure = v.get<bool>();
      else if (k == "refine_iters") c.refine_iters = v.get<int>();
      else if (k == "refine_tol") c.refine_tol = v.get<double>();
      else if (k == "enkf_members") c.enkf_members = v.get<std::size_t>();
      else if (k == "pf_particles") c.pf_particles = v.get<std::size_t>();
      else if (k == "horizon") c.horizon = v.get<double>();
      else if (k == "dt_window") c.dt_window = v.get<double>();
      else if (k == "mc_particles") c.mc_particles = v.get<std::size_t>();
      else if (k == "mc_dt") c.mc_dt = v.get<double>();
      else if (k == "mc_seed") c.mc_seed = v.get<std::uint64_t>();
      else if (k == "out_dir") c.out_dir = v.get<std::string>();
      else throw ConfigError("unknown config key: " + k);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

// ---- moment accuracy ----

std::vector<ScaledError> scaled_errors(const MomentVector& skf_m, const MomentVector& mc, const Eigen::VectorXd& mc_se,
                                       int max_degree) {
  const auto& B = *mc.basis;
  std::vector<double> tau(static_cast<std::size_t>(max_degree + 1), 0.0);
  std::vector<int> cnt(static_cast<std::size_t>(max_degree + 1), 0);
  for (std::size_t k = 0; k < B.size(); ++k) {
    int d = B[k].degree();
    if (d < 2 || d > max_degree) continue;
    tau[static_cast<std::size_t>(d)] += mc.values[static_cast<long>(k)] * mc.values[static_cast<long>(k)];
    ++cnt[static_cast<std::size_t>(d)];
  }
  for (std::size_t d = 0; d < tau.size(); ++d)
    if (cnt[d]) tau[d] = std::sqrt(tau[d] / cnt[d]);
  std::vector<ScaledError> out;
  for (std::size_t k = 0; k < B.size(); ++k) {
    int d = B[k].degree();
    if (d < 2 || d > max_degree) continue;
    ScaledError e;
    e.index = B[k];
    e.skf = skf_m.at(B[k]);
    e.mc = mc.values[static_cast<long>(k)];
    e.se = mc_se[static_cast<long>(k)];
    e.tau = tau[static_cast<std::size_t>(d)];
    double denom = std::max(std::fabs(e.mc), e.tau);
    e.scaled = denom > 0.0 ? std::fabs(e.skf - e.mc) / denom : std::fabs(e.skf - e.mc);
    out.push_back(e);
  }
  return out;
}

std::vector<double> per_degree_error(const std::vector<ScaledError>& errs, int max_degree) {
  std::vector<double> acc(static_cast<std::size_t>(max_degree + 1), 0.0);
  std::vector<int> cnt(static_cast<std::size_t>(max_degree + 1), 0);
  for (const auto& e : errs) {
    auto d = static_cast<std::size_t>(e.index.degree());
    acc[d] += e.scaled * e.scaled;
    ++cnt[d];
  }
  for (std::size_t d = 0; d < acc.size(); ++d)
    if (cnt[d]) acc[d] = std::sqrt(acc[d] / cnt[d]);
  return acc;
}

MomentAccuracyReport run_moment_accuracy(const ExperimentConfig& cfg) {
  cfg.validate();
  SystemInstance sys = builtin_systems().build(cfg.system, cfg.params);
  FilterConfig fc = cfg.filter_config(sys, true);
  double horizon = cfg.horizon > 0.0 ? cfg.horizon : sys.moments.horizon;
  int windows = std::max(1, static_cast<int>(std::lround(horizon / fc.dt_pred)));
  double win = horizon / windows;

  MomentAccuracyReport rep;
  rep.config = cfg;
  rep.r = fc.r;
  rep.compare_degree = std::min(4, fc.K());
  const InitialLaw& law = sys.moments.init;
  for (int k = 1; k <= windows; ++k) rep.times.push_back(k * win);

  auto t0 = std::chrono::steady_clock::now();
  FilterState st = skf_init(gaussian_moments(to_std(law.mean), law.cov, fc.K()), fc);
  for (int k = 0; k < windows; ++k) {
    try {
      st = skf_predict(st, sys.sde, win, fc);
    } catch (const DivergedClosure& e) {
      rep.diverged = true;
      rep.diverged_at = e.time();
      rep.failure = e.what();
      break;
    }
    rep.skf.push_back(st.centered());
    rep.diagnostics.push_back(st.diag);
  }
  rep.skf_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  McOptions mo;
  mo.dt = cfg.mc_dt;
  mo.N = cfg.mc_particles;
  mo.seed = cfg.mc_seed;
  mo.K = fc.K();
  McResult mc = mc_moment_oracle(sys.sde, law.mean, law.cov, rep.times, mo);
  rep.mc_seconds = seconds_since(t0);
  rep.mc = mc.centered;
  rep.mc_se = mc.centered_se;
  for (std::size_t k = 0; k < rep.skf.size(); ++k)
    rep.degree_error.push_back(per_degree_error(scaled_errors(rep.skf[k], rep.mc[k], rep.mc_se[k], rep.compare_degree),
                                                rep.compare_degree));
  return rep;
}

// ---- filters ----

SkfFilter::SkfFilter(const PolynomialSDE& sde, const InitialLaw& init, const FilterConfig& cfg) : sde_(sde), cfg_(cfg) {
  st_ = skf_init(gaussian_moments(to_std(init.mean), init.cov, cfg.K()), cfg);
}

void SkfFilter::predict(double dt) { st_ = skf_predict(st_, sde_, dt, cfg_); }

void SkfFilter::update(const MeasurementModel& model, const Eigen::VectorXd& z) { st_ = skf_update(st_, model, z, cfg_); }

Eigen::VectorXd SkfFilter::mean() const {
  std::vector<double> m = skf_estimate(st_);
  return Eigen::Map<Eigen::VectorXd>(m.data(), static_cast<long>(m.size()));
}

Eigen::MatrixXd SkfFilter::covariance() const { return skf_covariance(st_); }

const FilterSummary& FilterComparisonReport::summary_for(const std::string& filter) const {
  for (const auto& s : summary)
    if (s.filter == filter) return s;
  throw ConfigError("no summary for filter " + filter);
}

namespace {

std::unique_ptr<Filter> make_filter(const std::string& name, const SystemInstance& sys, const FilterConfig& fc,
                                    const ExperimentConfig& cfg, std::uint64_t seed) {
  GaussianBelief b{sys.init.mean, sys.init.cov, false};
  if (name == "SKF") return std::make_unique<SkfFilter>(sys.sde, sys.init, fc);
  if (name == "EKF") return make_ekf(sys.sde, b, cfg.dt_ode);
  if (name == "UKF") return make_ukf(sys.sde, b, cfg.dt_ode);
  if (name == "EnKF") return make_enkf(sys.sde, b, cfg.enkf_members, cfg.dt_ode, seed);
  return make_pf(sys.sde, b, cfg.pf_particles, cfg.dt_ode, seed);
}

double min_eig(const Eigen::MatrixXd& P) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (P + P.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

FilterComparisonReport run_filter_comparison(const ExperimentConfig& cfg) {
  cfg.validate();
  SystemInstance sys = builtin_systems().build(cfg.system, cfg.params);
  FilterConfig fc = cfg.filter_config(sys, false);
  fc.validate();
  int steps = cfg.steps > 0 ? cfg.steps : sys.filter.steps;
  double dt = fc.dt_pred;
  int n = sys.sde.n();

  FilterComparisonReport rep;
  rep.config = cfg;
  rep.n = n;
  rep.steps = steps;
  rep.dt_pred = dt;
  for (std::uint64_t seed : cfg.seeds) {
    // truth path and measurements, shared by every filter for this seed
    Rng trng(derive_seed(seed, "truth"));
    Rng mrng(derive_seed(seed, "measurement"));
    ParticleSet x = sample_gaussian(sys.init.mean, sys.init.cov, 1, trng);
    EulerMaruyama em(sys.sde, kernels::Isa::Scalar);
    std::vector<Eigen::VectorXd> truth, zs;
    Eigen::MatrixXd Lr = psd_sqrt(sys.measurement.R);
    auto state = [&] {
      Eigen::VectorXd v(n);
      for (int i = 0; i < n; ++i) v[i] = x.x[static_cast<std::size_t>(i)][0];
      return v;
    };
    truth.push_back(state());
    for (int k = 1; k <= steps; ++k) {
      em.advance(x, dt, cfg.dt_ode, trng);
      Eigen::VectorXd xt = state();
      Eigen::VectorXd v(sys.measurement.n_z());
      for (long i = 0; i < v.size(); ++i) v[i] = mrng.normal();
      truth.push_back(xt);
      zs.push_back(sys.measurement.evaluate(xt.data()) + Lr * v);
    }
    rep.truth[seed] = truth;
    rep.measurements[seed] = zs;

    for (const auto& name : cfg.filters) {
      FilterRun run;
      run.filter = name;
      run.seed = seed;
      auto t0 = std::chrono::steady_clock::now();
      try {
        auto f = make_filter(name, sys, fc, cfg, seed);
        for (int k = 1; k <= steps; ++k) {
          run.failed_at = k * dt;
          f->predict(dt);
          f->update(sys.measurement, zs[static_cast<std::size_t>(k - 1)]);
          StepRecord rec;
          rec.step = k;
          rec.time = k * dt;
          rec.estimate = f->mean();
          rec.error = (rec.estimate - truth[static_cast<std::size_t>(k)]).norm();
          rec.min_cov_eig = min_eig(f->covariance());
          if (auto* s = dynamic_cast<SkfFilter*>(f.get())) {
            rec.m0 = s->state().mw.values[0];
            rec.diag = s->state().diag;
          }
          if (!std::isfinite(rec.error)) throw NumericalError("non-finite estimate");
          run.steps.push_back(rec);
        }
        double acc = 0.0;
        for (const auto& s : run.steps) acc += s.error;
        run.rmse = acc / static_cast<double>(run.steps.size());
      } catch (const NumericalError& e) {
        run.failed = true;
        run.failure = e.what();
      }
      run.seconds = seconds_since(t0);
      rep.runs.push_back(std::move(run));
    }
  }
  for (const auto& name : cfg.filters) {
    FilterSummary s;
    s.filter = name;
    std::vector<double> v;
    for (const auto& run : rep.runs) {
      if (run.filter != name) continue;
      ++s.runs;
      if (run.failed)
        ++s.failures;
      else
        v.push_back(run.rmse);
    }
    if (!v.empty()) {
      for (double e : v) s.mean += e;
      s.mean /= static_cast<double>(v.size());
      for (double e : v) s.std += (e - s.mean) * (e - s.mean);
      s.std = v.size() > 1 ? std::sqrt(s.std / static_cast<double>(v.size() - 1)) : 0.0;
    } else {
      s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
    }
    rep.summary.push_back(s);
  }
  return rep;
}

// ---- cone-CBF demo ----

ConeCbfReport run_cone_cbf_demo(const ConeCbfOptions& opt) {
  if (!(opt.sigma > 0.0) || !(opt.kappa_cbf > 0.0) || !(opt.horizon > 0.0) || !(opt.dt_ode > 0.0) ||
      !(opt.dt_out >= opt.dt_ode) || !(opt.init_var > 0.0))
    throw ConfigError("cone-CBF demo: sigma, kappa, horizon, steps and initial variance must be positive");
  ConeCbfReport rep;
  rep.options = opt;
  rep.theta_inf = calibrate_theta_inf(opt.sigma, opt.kappa_cbf);

  int outs = static_cast<int>(std::lround(opt.horizon / opt.dt_out));
  int sub = static_cast<int>(std::ceil(opt.dt_out / opt.dt_ode - 1e-9));
  double h = opt.horizon / outs / sub;
  for (int k = 1; k <= outs; ++k) rep.times.push_back(k * opt.horizon / outs);

  DwEvenDynamics dyn = dw_even_dynamics(opt.sigma);
  double v = opt.init_var;
  Eigen::Vector3d s(v, 3 * v * v, 15 * v * v * v);
  ConeCbf1dState cs;
  cs.sigma = opt.sigma;
  cs.kappa_cbf = opt.kappa_cbf;
  cs.theta_inf = rep.theta_inf;
  auto rhs = [&](const Eigen::Vector3d& y, bool& clamped) {
    cs.s1 = y[0];
    cs.s2 = y[1];
    cs.s3 = y[2];
    ConeCbfResult u = cone_cbf_closure_1d(cs);
    clamped = clamped || u.clamped;
    return Eigen::Vector3d(dyn.A * y + dyn.B * u.u + dyn.c);
  };
  rep.min_barrier = s[0] * s[2] - s[1] * s[1];
  for (int k = 0; k < outs; ++k) {
    for (int j = 0; j < sub; ++j) {
      bool cl = false;
      Eigen::Vector3d k1 = rhs(s, cl);
      Eigen::Vector3d k2 = rhs(s + 0.5 * h * k1, cl);
      Eigen::Vector3d k3 = rhs(s + 0.5 * h * k2, cl);
      Eigen::Vector3d k4 = rhs(s + h * k3, cl);
      s += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      if (cl) ++rep.clamped_steps;
      rep.min_barrier = std::min(rep.min_barrier, s[0] * s[2] - s[1] * s[1]);
    }
    rep.closed.push_back({s[0], s[1], s[2]});
    rep.barrier.push_back(s[0] * s[2] - s[1] * s[1]);
  }

  // 1-D factor of the double well, sampled for reference only
  PolynomialSDE sde1({Polynomial::variable(1, 0) + Polynomial::monomial(MultiIndex{3}, -1.0)},
                     {Polynomial::constant(1, opt.sigma)}, 1);
  McOptions mo;
  mo.dt = opt.mc_dt;
  mo.N = opt.mc_particles;
  mo.seed = opt.seed;
  mo.K = 6;
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd P0 = Eigen::MatrixXd::Constant(1, 1, v);
  McResult mc = mc_moment_oracle(sde1, m0, P0, rep.times, mo);
  std::array<double, 3> acc{};
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    const MomentVector& m = mc.raw[k];
    std::array<double, 3> ref = {m.at(MultiIndex{2}), m.at(MultiIndex{4}), m.at(MultiIndex{6})};
    rep.mc.push_back(ref);
    for (int q = 0; q < 3; ++q) {
      double e = std::fabs(rep.closed[k][static_cast<std::size_t>(q)] - ref[static_cast<std::size_t>(q)]) /
                 std::fabs(ref[static_cast<std::size_t>(q)]);
      acc[static_cast<std::size_t>(q)] += e * e;
      if (k + 1 == rep.times.size()) rep.terminal_rel[static_cast<std::size_t>(q)] = e;
    }
  }
  for (int q = 0; q < 3; ++q)
    rep.rms_rel[static_cast<std::size_t>(q)] = std::sqrt(acc[static_cast<std::size_t>(q)] / static_cast<double>(rep.times.size()));

  // the unconstrained Stein closure on the 2-D double well
  SystemInstance dw = builtin_systems().build("double_well", {{"sigma", opt.sigma}});
  for (int r : opt.unconstrained_orders) {
    UnconstrainedRun run;
    run.r = r;
    FilterConfig fc;
    fc.r = r;
    fc.dt_ode = opt.dt_ode;
    fc.dt_pred = opt.unconstrained_window;
    Eigen::MatrixXd P = v * Eigen::MatrixXd::Identity(2, 2);
    try {
      FilterState st = skf_init(gaussian_moments({0.0, 0.0}, P, fc.K()), fc);
      int windows = static_cast<int>(std::lround(opt.horizon / fc.dt_pred));
      for (int k = 0; k < windows; ++k) st = skf_predict(st, dw.sde, fc.dt_pred, fc);
      run.message = "completed";
    } catch (const DivergedClosure& e) {
      run.diverged = true;
      run.t_star = e.time();
      run.message = e.what();
    } catch (const NumericalError& e) {
      run.message = e.what();
    }
    rep.unconstrained.push_back(run);
  }
  return rep;
}

// ---- outputs ----

namespace {

json diag_json(const FilterDiagnostics& d) {
  return {{"condition", d.condition},
          {"closure_residual", d.closure_residual},
          {"recovery_residual", d.recovery_residual},
          {"refine_iterations", d.refine_iterations},
          {"factorizations", d.factorizations}};
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

}  // namespace

json report_json(const MomentAccuracyReport& rep) {
  json j;
  j["version"] = kVersion;
  j["config"] = to_json(rep.config);
  j["r"] = rep.r;
  j["compare_degree"] = rep.compare_degree;
  j["times"] = rep.times;
  j["diverged"] = rep.diverged;
  if (rep.diverged) {
    j["diverged_at"] = rep.diverged_at;
    j["failure"] = rep.failure;
  }
  j["per_degree_error"] = rep.degree_error;
  if (!rep.degree_error.empty()) j["terminal_per_degree_error"] = rep.degree_error.back();
  json d = json::array();
  for (const auto& x : rep.diagnostics) d.push_back(diag_json(x));
  j["diagnostics"] = d;
  j["skf_seconds"] = rep.skf_seconds;
  j["mc_seconds"] = rep.mc_seconds;
  return j;
}

json report_json(const FilterComparisonReport& rep) {
  json j;
  j["version"] = kVersion;
  j["config"] = to_json(rep.config);
  j["n"] = rep.n;
  j["steps"] = rep.steps;
  j["dt_pred"] = rep.dt_pred;
  json runs = json::array();
  for (const auto& r : rep.runs) {
    json x{{"filter", r.filter}, {"seed", r.seed}, {"failed", r.failed}, {"seconds", r.seconds}};
    if (r.failed) {
      x["failure"] = r.failure;
      x["failed_at"] = r.failed_at;
    } else {
      x["rmse"] = r.rmse;
    }
    json diags = json::array();
    for (const auto& st : r.steps)
      if (st.diag) diags.push_back(diag_json(*st.diag));
    if (!diags.empty()) x["diagnostics"] = diags;
    runs.push_back(x);
  }
  j["runs"] = runs;
  json s = json::array();
  for (const auto& x : rep.summary) {
    json e{{"filter", x.filter}, {"runs", x.runs}, {"failures", x.failures}};
    if (std::isfinite(x.mean)) {
      e["mean_rmse"] = x.mean;
      e["std_rmse"] = x.std;
    }
    s.push_back(e);
  }
  j["summary"] = s;
  return j;
}

json report_json(const ConeCbfReport& rep) {
  const auto& o = rep.options;
  json j;
  j["version"] = kVersion;
  j["config"] = {{"sigma", o.sigma},         {"kappa_cbf", o.kappa_cbf},       {"horizon", o.horizon},
                 {"dt_ode", o.dt_ode},       {"dt_out", o.dt_out},             {"init_var", o.init_var},
                 {"mc_particles", o.mc_particles}, {"mc_dt", o.mc_dt},         {"seed", o.seed},
                 {"unconstrained_orders", o.unconstrained_orders}, {"unconstrained_window", o.unconstrained_window}};
  j["theta_inf"] = rep.theta_inf;
  j["terminal_rel_error"] = rep.terminal_rel;
  j["rms_rel_error"] = rep.rms_rel;
  j["min_barrier"] = rep.min_barrier;
  j["clamped_steps"] = rep.clamped_steps;
  json u = json::array();
  for (const auto& r : rep.unconstrained) {
    json x{{"r", r.r}, {"diverged", r.diverged}, {"message", r.message}};
    if (r.diverged) x["t_star"] = r.t_star;
    u.push_back(x);
  }
  j["unconstrained"] = u;
  return j;
}

std::string moments_csv(const MomentAccuracyReport& rep) {
  std::ostringstream os;
  os << "# " << kVersion << "\n";
  os << "time,moment,degree,skf,mc,mc_se,scaled_error\n";
  for (std::size_t k = 0; k < rep.skf.size(); ++k) {
    for (const auto& e : scaled_errors(rep.skf[k], rep.mc[k], rep.mc_se[k], rep.compare_degree))
      os << fmt(rep.times[k]) << ",m" << e.index.str() << "," << e.index.degree() << "," << fmt(e.skf) << ","
         << fmt(e.mc) << "," << fmt(e.se) << "," << fmt(e.scaled) << "\n";
  }
  return os.str();
}

std::string filter_csv(const FilterComparisonReport& rep) {
  std::ostringstream os;
  os << "# " << kVersion << "\n";
  os << "step,time,filter,seed,rmse";
  for (int i = 0; i < rep.n; ++i) os << ",x" << i;
  os << "\n";
  for (const auto& run : rep.runs) {
    for (const auto& s : run.steps) {
      os << s.step << "," << fmt(s.time) << "," << run.filter << "," << run.seed << "," << fmt(s.error);
      for (long i = 0; i < s.estimate.size(); ++i) os << "," << fmt(s.estimate[i]);
      os << "\n";
    }
  }
  for (const auto& [seed, path] : rep.truth) {
    for (std::size_t k = 1; k < path.size(); ++k) {
      os << k << "," << fmt(static_cast<double>(k) * rep.dt_pred) << ",truth," << seed << ",0";
      for (long i = 0; i < path[k].size(); ++i) os << "," << fmt(path[k][i]);
      os << "\n";
    }
  }
  return os.str();
}

std::string cone_cbf_csv(const ConeCbfReport& rep) {
  std::ostringstream os;
  os << "# " << kVersion << "\n";
  os << "time,quantity,closed,mc\n";
  static const char* names[] = {"m2", "m4", "m6"};
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    for (std::size_t q = 0; q < 3; ++q)
      os << fmt(rep.times[k]) << "," << names[q] << "," << fmt(rep.closed[k][q]) << "," << fmt(rep.mc[k][q]) << "\n";
    os << fmt(rep.times[k]) << ",barrier," << fmt(rep.barrier[k]) << ",\n";
  }
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

}  // namespace skf

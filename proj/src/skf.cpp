#include "skf/skf.hpp"

#include <cmath>

#include "skf/error.hpp"

namespace skf {

void FilterConfig::validate() const {
  if (r < 2) throw ConfigError("filter order r must be at least 2");
  if (!(dt_ode > 0.0) || !(dt_pred > 0.0)) throw ConfigError("time steps must be positive");
  if (dt_ode > dt_pred) throw ConfigError("dt_ode must not exceed dt_pred");
  if (!(scale_c > 0.0)) throw ConfigError("scale factor must be positive");
}

MomentVector FilterState::centered() const { return unscale_moments(mw, scale); }

MomentVector FilterState::raw() const { return uncenter_moments(centered(), mu); }

namespace {

// Re-anchor moments given about mu (w-scaled by s) at their own mean and
// refit lambda there.
FilterState anchor_and_fit(double t, const std::vector<double>& mu, const MomentVector& mz, const FilterConfig& cfg,
                           FilterDiagnostics diag) {
  int n = mz.n();
  std::vector<double> delta(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) delta[static_cast<std::size_t>(i)] = mz.at(MultiIndex::unit(n, i));
  FilterState st;
  st.t = t;
  st.mu.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) st.mu[static_cast<std::size_t>(i)] = mu[static_cast<std::size_t>(i)] + delta[static_cast<std::size_t>(i)];
  MomentVector c = center_moments(mz, delta);
  for (int i = 0; i < n; ++i) c.at(MultiIndex::unit(n, i)) = 0.0;
  st.scale = default_scale(c, cfg.scale_c);
  st.mw = scale_moments(c, st.scale);
  FitResult fit = score_match(st.mw, cfg.r, cfg.fit);
  st.lambda = fit.params;
  st.diag = diag;
  st.diag.condition = fit.condition;
  return st;
}

// SDE for w = (x - mu) / s
PolynomialSDE working_sde(const PolynomialSDE& sde, const std::vector<double>& mu, const std::vector<double>& s) {
  int n = sde.n();
  std::vector<Polynomial> drift, diff;
  for (int i = 0; i < n; ++i) drift.push_back(sde.drift(i).affine_substitute(mu, s) * (1.0 / s[static_cast<std::size_t>(i)]));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < sde.n_w(); ++k)
      diff.push_back(sde.h(i, k).affine_substitute(mu, s) * (1.0 / s[static_cast<std::size_t>(i)]));
  return PolynomialSDE(std::move(drift), std::move(diff), sde.n_w());
}

void check_blowup(const Eigen::VectorXd& mw, const std::vector<double>& unscale, double bound, double t) {
  for (long k = 0; k < mw.size(); ++k) {
    double v = mw[k] * unscale[static_cast<std::size_t>(k)];
    if (!std::isfinite(v) || std::fabs(v) > bound)
      throw DivergedClosure("closed moment ODE diverged at t = " + std::to_string(t), t);
  }
}

}  // namespace

FilterState skf_init(const MomentVector& raw_moments, const FilterConfig& cfg) {
  cfg.validate();
  if (raw_moments.degree() < cfg.K()) throw ConfigError("initial moments must reach degree 2r-2");
  MomentVector m = raw_moments.truncated(cfg.K());
  std::vector<double> zero(static_cast<std::size_t>(m.n()), 0.0);
  return anchor_and_fit(0.0, zero, m, cfg, {});
}

FilterState skf_predict(const FilterState& st, const PolynomialSDE& sde, double dt, const FilterConfig& cfg) {
  if (!(dt > 0.0)) throw ConfigError("predict needs dt > 0");
  if (sde.n() != st.n()) throw ConfigError("SDE dimension does not match the filter state");
  int K = cfg.K();
  PolynomialSDE wsde = working_sde(sde, st.mu, st.scale);
  MomentOdeOperator op(wsde, K);
  int dbar = op.excess();
  std::uint64_t f0 = FactorCache::factorizations();
  std::unique_ptr<LayeredClosure> closure;
  if (dbar > 0 && !op.unclosed_targets().empty())
    closure = std::make_unique<LayeredClosure>(st.lambda, K, dbar, cfg.closure, op.unclosed_targets());

  const auto& B = *op.tracked();
  std::vector<double> unscale(B.size());
  for (std::size_t k = 0; k < B.size(); ++k) {
    double f = 1.0;
    for (int i = 0; i < B.n(); ++i) f *= std::pow(st.scale[static_cast<std::size_t>(i)], B[k][i]);
    unscale[k] = f;
  }

  double worst_res = 0.0;
  long src_size = static_cast<long>(op.source()->size());
  auto rhs = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd ext;
    if (closure) {
      double res = 0.0;
      ext = closure->close(y, &res);
      worst_res = std::max(worst_res, res);
    } else {
      ext = Eigen::VectorXd::Zero(src_size);
      ext.head(y.size()) = y;
    }
    return op.evaluate(ext);
  };

  int steps = static_cast<int>(std::ceil(dt / cfg.dt_ode - 1e-9));
  double h = dt / steps;
  Eigen::VectorXd y = st.mw.values;
  double t = st.t;
  for (int s = 0; s < steps; ++s) {
    Eigen::VectorXd k1 = rhs(y);
    Eigen::VectorXd k2 = rhs(y + 0.5 * h * k1);
    Eigen::VectorXd k3 = rhs(y + 0.5 * h * k2);
    Eigen::VectorXd k4 = rhs(y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    y[0] = 1.0;
    t = st.t + (s + 1) * h;
    check_blowup(y, unscale, cfg.blowup, t);
  }
  FilterDiagnostics diag = st.diag;
  diag.closure_residual = worst_res;
  diag.factorizations = FactorCache::factorizations() - f0;
  MomentVector mz = unscale_moments(MomentVector(st.mw.basis, y), st.scale);
  try {
    return anchor_and_fit(t, st.mu, mz, cfg, diag);
  } catch (const SingularGram&) {
    throw DivergedClosure("moments lost realizability at t = " + std::to_string(t), t);
  }
}

FilterState skf_update(const FilterState& st, const MeasurementModel& model, const Eigen::VectorXd& z,
                       const FilterConfig& cfg) {
  ScoreParams lik = likelihood_score_params(model, z, st.lambda.basis, st.mu, st.scale);
  RefineOptions ro = cfg.refine;
  ro.fit = cfg.fit;
  FilterDiagnostics diag = st.diag;
  try {
    RefineResult ref = refine_consistency(st.lambda, lik, cfg.K(), ro);
    diag.recovery_residual = ref.residuals.empty() ? 0.0 : ref.residuals.back();
    diag.refine_iterations = ref.iterations;
    MomentVector mz = unscale_moments(ref.moments, st.scale);
    Eigen::LLT<Eigen::MatrixXd> llt(mz.covariance());
    if (llt.info() != Eigen::Success) throw SingularGram("recovered posterior covariance is not positive definite");
    return anchor_and_fit(st.t, st.mu, mz, cfg, diag);
  } catch (const NumericalError&) {
    if (!cfg.gaussian_fallback) throw;
  }
  // Gaussian update linearized at the prior mean, in coordinates about mu
  MomentVector prior = st.centered();
  std::vector<double> pm = prior.mean();
  Eigen::Map<const Eigen::VectorXd> m(pm.data(), static_cast<long>(pm.size()));
  Eigen::MatrixXd P = prior.covariance();
  Eigen::VectorXd x(m.size());
  for (long i = 0; i < m.size(); ++i) x[i] = st.mu[static_cast<std::size_t>(i)] + m[i];
  Eigen::MatrixXd H = model.jacobian(x.data());
  Eigen::MatrixXd S = H * P * H.transpose() + model.R;
  Eigen::MatrixXd Kg = P * H.transpose() * S.ldlt().solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
  Eigen::VectorXd mp = m + Kg * (z - model.evaluate(x.data()));
  Eigen::MatrixXd IKH = Eigen::MatrixXd::Identity(P.rows(), P.cols()) - Kg * H;
  Eigen::MatrixXd Pp = IKH * P * IKH.transpose() + Kg * model.R * Kg.transpose();
  diag.fallbacks += 1;
  diag.refine_iterations = 0;
  std::vector<double> mpv(mp.data(), mp.data() + mp.size());
  return anchor_and_fit(st.t, st.mu, gaussian_moments(mpv, Pp, cfg.K()), cfg, diag);
}

std::vector<double> skf_estimate(const FilterState& st) {
  std::vector<double> out = st.mu;
  int n = st.n();
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] += st.scale[static_cast<std::size_t>(i)] * st.mw.at(MultiIndex::unit(n, i));
  return out;
}

Eigen::MatrixXd skf_covariance(const FilterState& st) { return st.centered().covariance(); }

InfoForm info_form_view(const FilterState& st) {
  if (st.lambda.r() != 2) throw ConfigError("information form needs r = 2");
  int n = st.n();
  ScoreParams lz = unscale_score(st.lambda, st.scale);
  InfoForm f;
  f.Omega = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd l1(n);
  for (int i = 0; i < n; ++i) {
    l1[i] = lz.at(MultiIndex::unit(n, i));
    for (int j = 0; j < n; ++j) {
      MultiIndex a = mi_add(MultiIndex::unit(n, i), MultiIndex::unit(n, j));
      f.Omega(i, j) = i == j ? 2.0 * lz.at(a) : lz.at(a);
    }
  }
  Eigen::Map<const Eigen::VectorXd> mu(st.mu.data(), n);
  f.eta = f.Omega * mu - l1;
  return f;
}

MomentVector gaussian_moments(const std::vector<double>& mean, const Eigen::MatrixXd& cov, int K) {
  int n = static_cast<int>(mean.size());
  // centered Gaussian moments by the recursion E[z^a] = sum_j (a_j') P_{ij} E[z^{a - e_i - e_j}]
  BasisPtr B = enumerate_basis(n, K);
  MomentVector c(B);
  for (std::size_t k = 1; k < B->size(); ++k) {
    const MultiIndex& a = (*B)[k];
    int i = 0;
    while (a[i] == 0) ++i;
    MultiIndex rest = a;
    rest.set(i, a[i] - 1);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      if (rest[j] == 0) continue;
      MultiIndex b = rest;
      b.set(j, rest[j] - 1);
      acc += rest[j] * cov(i, j) * c.at(b);
    }
    c.values[static_cast<long>(k)] = acc;
  }
  return uncenter_moments(c, mean);
}

}  // namespace skf

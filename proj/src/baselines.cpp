#include "skf/baselines.hpp"

#include <cmath>
#include <limits>

#include "skf/error.hpp"
#include "skf/score_match.hpp"

namespace skf {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& P) {
  Eigen::MatrixXd S = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

bool symmetrize_clip(Eigen::MatrixXd& P) {
  P = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  if (es.eigenvalues().minCoeff() >= -1e-10) return false;
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  P = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return true;
}

Eigen::VectorXd eval_drift(const PolynomialSDE& sde, const Eigen::VectorXd& x) {
  Eigen::VectorXd f(sde.n());
  for (int i = 0; i < sde.n(); ++i) f[i] = sde.drift(i).evaluate(x.data());
  return f;
}

Eigen::MatrixXd noise_cov(const PolynomialSDE& sde, const Eigen::VectorXd& x) {
  Eigen::MatrixXd h = sde.h_at(x.data());
  return h * h.transpose();
}

struct Sigma {
  Eigen::MatrixXd pts;  // n x (2n+1)
  Eigen::VectorXd wm, wc;
};

Sigma sigma_points(const Eigen::VectorXd& m, const Eigen::MatrixXd& P, const UkfParams& p) {
  int n = static_cast<int>(m.size());
  double lam = p.alpha * p.alpha * (n + p.kappa) - n;
  Sigma s;
  s.pts.resize(n, 2 * n + 1);
  s.wm.resize(2 * n + 1);
  s.wc.resize(2 * n + 1);
  Eigen::MatrixXd L;
  Eigen::LLT<Eigen::MatrixXd> llt((n + lam) * P);
  if (llt.info() == Eigen::Success)
    L = llt.matrixL();
  else
    L = psd_sqrt((n + lam) * P);
  s.pts.col(0) = m;
  for (int i = 0; i < n; ++i) {
    s.pts.col(1 + i) = m + L.col(i);
    s.pts.col(1 + n + i) = m - L.col(i);
  }
  s.wm[0] = lam / (n + lam);
  s.wc[0] = s.wm[0] + (1.0 - p.alpha * p.alpha + p.beta);
  for (int i = 1; i <= 2 * n; ++i) s.wm[i] = s.wc[i] = 0.5 / (n + lam);
  return s;
}

template <typename F>
void rk4_gaussian(GaussianBelief& b, double dt, double dt_ode, F&& deriv) {
  int steps = static_cast<int>(std::ceil(dt / dt_ode - 1e-9));
  double h = dt / steps;
  for (int s = 0; s < steps; ++s) {
    Eigen::VectorXd m = b.mean;
    Eigen::MatrixXd P = b.cov;
    auto [dm1, dP1] = deriv(m, P);
    auto [dm2, dP2] = deriv(m + 0.5 * h * dm1, P + 0.5 * h * dP1);
    auto [dm3, dP3] = deriv(m + 0.5 * h * dm2, P + 0.5 * h * dP2);
    auto [dm4, dP4] = deriv(m + h * dm3, P + h * dP3);
    b.mean = m + h / 6.0 * (dm1 + 2 * dm2 + 2 * dm3 + dm4);
    b.cov = P + h / 6.0 * (dP1 + 2 * dP2 + 2 * dP3 + dP4);
    b.cov = 0.5 * (b.cov + b.cov.transpose());
  }
}

}  // namespace

GaussianBelief ekf_predict(const GaussianBelief& b, const PolynomialSDE& sde, double dt, double dt_ode) {
  auto J = drift_jacobian(sde);
  int n = sde.n();
  GaussianBelief out = b;
  rk4_gaussian(out, dt, dt_ode, [&](const Eigen::VectorXd& m, const Eigen::MatrixXd& P) {
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = J[static_cast<std::size_t>(i * n + j)].evaluate(m.data());
    Eigen::MatrixXd dP = A * P + P * A.transpose() + noise_cov(sde, m);
    return std::make_pair(eval_drift(sde, m), dP);
  });
  out.clipped = symmetrize_clip(out.cov);
  return out;
}

GaussianBelief ekf_update(const GaussianBelief& b, const MeasurementModel& model, const Eigen::VectorXd& z) {
  Eigen::MatrixXd Hm = model.jacobian(b.mean.data());
  Eigen::VectorXd y = z - model.evaluate(b.mean.data());
  Eigen::MatrixXd S = Hm * b.cov * Hm.transpose() + model.R;
  Eigen::MatrixXd K = b.cov * Hm.transpose() * S.ldlt().solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
  GaussianBelief out;
  out.mean = b.mean + K * y;
  Eigen::MatrixXd I_KH = Eigen::MatrixXd::Identity(b.cov.rows(), b.cov.cols()) - K * Hm;
  out.cov = I_KH * b.cov * I_KH.transpose() + K * model.R * K.transpose();
  out.clipped = symmetrize_clip(out.cov);
  return out;
}

GaussianBelief ukf_predict(const GaussianBelief& b, const PolynomialSDE& sde, double dt, double dt_ode,
                           const UkfParams& p) {
  GaussianBelief out = b;
  int n = sde.n();
  rk4_gaussian(out, dt, dt_ode, [&](const Eigen::VectorXd& m, const Eigen::MatrixXd& P) {
    Sigma s = sigma_points(m, P, p);
    int cnt = 2 * n + 1;
    Eigen::MatrixXd F(n, cnt);
    for (int k = 0; k < cnt; ++k) F.col(k) = eval_drift(sde, s.pts.col(k));
    Eigen::VectorXd fbar = F * s.wm;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < cnt; ++k) {
      C += s.wc[k] * (s.pts.col(k) - m) * (F.col(k) - fbar).transpose();
      Q += s.wm[k] * noise_cov(sde, s.pts.col(k));
    }
    Eigen::MatrixXd dP = C + C.transpose() + Q;
    return std::make_pair(fbar, dP);
  });
  out.clipped = symmetrize_clip(out.cov);
  return out;
}

GaussianBelief ukf_update(const GaussianBelief& b, const MeasurementModel& model, const Eigen::VectorXd& z,
                          const UkfParams& p) {
  int n = static_cast<int>(b.mean.size());
  int nz = model.n_z();
  Sigma s = sigma_points(b.mean, b.cov, p);
  int cnt = 2 * n + 1;
  Eigen::MatrixXd Z(nz, cnt);
  for (int k = 0; k < cnt; ++k) {
    Eigen::VectorXd col = s.pts.col(k);
    Z.col(k) = model.evaluate(col.data());
  }
  Eigen::VectorXd zbar = Z * s.wm;
  Eigen::MatrixXd S = model.R;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, nz);
  for (int k = 0; k < cnt; ++k) {
    S += s.wc[k] * (Z.col(k) - zbar) * (Z.col(k) - zbar).transpose();
    C += s.wc[k] * (s.pts.col(k) - b.mean) * (Z.col(k) - zbar).transpose();
  }
  Eigen::MatrixXd K = C * S.ldlt().solve(Eigen::MatrixXd::Identity(nz, nz));
  GaussianBelief out;
  out.mean = b.mean + K * (z - zbar);
  out.cov = b.cov - K * S * K.transpose();
  out.clipped = symmetrize_clip(out.cov);
  return out;
}

ParticleSet::ParticleSet(int n_, std::size_t N)
    : n(n_), x(static_cast<std::size_t>(n_), std::vector<double>(N, 0.0)), w(N, N ? 1.0 / static_cast<double>(N) : 0.0) {}

std::vector<const double*> ParticleSet::columns() const {
  std::vector<const double*> c;
  for (const auto& v : x) c.push_back(v.data());
  return c;
}

Eigen::VectorXd ParticleSet::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t p = 0; p < size(); ++p) acc += w[p] * x[static_cast<std::size_t>(i)][p];
    m[i] = acc;
  }
  return m;
}

Eigen::MatrixXd ParticleSet::covariance() const {
  Eigen::VectorXd m = mean();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t p = 0; p < size(); ++p) {
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d[i] = x[static_cast<std::size_t>(i)][p] - m[i];
    P += w[p] * d * d.transpose();
  }
  return P;
}

double ParticleSet::ess() const {
  double s = 0.0;
  for (double v : w) s += v * v;
  return s > 0.0 ? 1.0 / s : 0.0;
}

ParticleSet sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t N, Rng& rng) {
  int n = static_cast<int>(mean.size());
  Eigen::MatrixXd L = psd_sqrt(cov);
  ParticleSet ps(n, N);
  Eigen::VectorXd xi(n);
  for (std::size_t p = 0; p < N; ++p) {
    for (int i = 0; i < n; ++i) xi[i] = rng.normal();
    Eigen::VectorXd v = mean + L * xi;
    for (int i = 0; i < n; ++i) ps.x[static_cast<std::size_t>(i)][p] = v[i];
  }
  return ps;
}

EulerMaruyama::EulerMaruyama(const PolynomialSDE& sde, kernels::Isa isa) : sde_(sde), isa_(isa) {
  for (const auto& p : sde.drift()) drift_.push_back(kernels::compile(p));
  for (const auto& p : sde.diffusion()) diff_.push_back(kernels::compile(p));
  constant_h_ = sde.constant_diffusion();
  if (constant_h_) {
    std::vector<double> zero(static_cast<std::size_t>(sde.n()), 0.0);
    h0_ = sde.h_at(zero.data());
  }
}

void EulerMaruyama::step(ParticleSet& ps, double dt, Rng& rng) const {
  auto n = static_cast<std::size_t>(sde_.n()), nw = static_cast<std::size_t>(sde_.n_w());
  std::size_t N = ps.size();
  auto cols = ps.columns();
  f_.resize(n);
  xi_.resize(nw);
  inc_.resize(n);
  for (auto& v : f_) v.resize(N);
  for (auto& v : xi_) v.resize(N);
  for (auto& v : inc_) v.assign(N, 0.0);
  hk_.resize(N);
  for (std::size_t i = 0; i < n; ++i) kernels::eval_poly(drift_[i], cols.data(), N, f_[i].data(), isa_);
  for (std::size_t k = 0; k < nw; ++k) rng.fill_normal(xi_[k].data(), N);
  for (std::size_t i = 0; i < n; ++i) {
    auto& acc = inc_[i];
    for (std::size_t k = 0; k < nw; ++k) {
      const auto& z = xi_[k];
      if (constant_h_) {
        double c = h0_(static_cast<long>(i), static_cast<long>(k));
        if (c == 0.0) continue;
        for (std::size_t p = 0; p < N; ++p) acc[p] += c * z[p];
      } else {
        kernels::eval_poly(diff_[i * nw + k], cols.data(), N, hk_.data(), isa_);
        for (std::size_t p = 0; p < N; ++p) acc[p] += hk_[p] * z[p];
      }
    }
  }
  double sq = std::sqrt(dt);
  for (std::size_t i = 0; i < n; ++i) kernels::axpy2(ps.x[i].data(), f_[i].data(), dt, inc_[i].data(), sq, N, isa_);
}

void EulerMaruyama::advance(ParticleSet& ps, double T, double dt, Rng& rng) const {
  if (T <= 0.0) return;
  int steps = static_cast<int>(std::ceil(T / dt - 1e-9));
  double h = T / steps;
  for (int s = 0; s < steps; ++s) step(ps, h, rng);
}

void enkf_update(ParticleSet& ens, const MeasurementModel& model, const Eigen::VectorXd& z, Rng& rng) {
  int n = ens.n, nz = model.n_z();
  std::size_t N = ens.size();
  if (N < 2) throw ConfigError("EnKF needs at least two members");
  Eigen::MatrixXd X(n, static_cast<long>(N)), Y(nz, static_cast<long>(N));
  Eigen::VectorXd xp(n);
  for (std::size_t p = 0; p < N; ++p) {
    for (int i = 0; i < n; ++i) xp[i] = ens.x[static_cast<std::size_t>(i)][p];
    X.col(static_cast<long>(p)) = xp;
    Y.col(static_cast<long>(p)) = model.evaluate(xp.data());
  }
  Eigen::VectorXd xm = X.rowwise().mean(), ym = Y.rowwise().mean();
  Eigen::MatrixXd Xa = X.colwise() - xm, Ya = Y.colwise() - ym;
  double d = static_cast<double>(N - 1);
  Eigen::MatrixXd Pxy = Xa * Ya.transpose() / d;
  Eigen::MatrixXd Pyy = Ya * Ya.transpose() / d + model.R;
  Eigen::MatrixXd K = Pxy * Pyy.ldlt().solve(Eigen::MatrixXd::Identity(nz, nz));
  Eigen::MatrixXd Lr = psd_sqrt(model.R);
  Eigen::VectorXd v(nz);
  for (std::size_t p = 0; p < N; ++p) {
    for (int k = 0; k < nz; ++k) v[k] = rng.normal();
    Eigen::VectorXd innov = z + Lr * v - Y.col(static_cast<long>(p));
    Eigen::VectorXd dx = K * innov;
    for (int i = 0; i < n; ++i) ens.x[static_cast<std::size_t>(i)][p] += dx[i];
  }
}

void systematic_resample(ParticleSet& ps, Rng& rng) {
  std::size_t N = ps.size();
  std::vector<std::size_t> idx(N);
  double u0 = rng.uniform() / static_cast<double>(N);
  double cum = ps.w[0];
  std::size_t j = 0;
  for (std::size_t p = 0; p < N; ++p) {
    double u = u0 + static_cast<double>(p) / static_cast<double>(N);
    while (u > cum && j + 1 < N) cum += ps.w[++j];
    idx[p] = j;
  }
  for (auto& col : ps.x) {
    std::vector<double> next(N);
    for (std::size_t p = 0; p < N; ++p) next[p] = col[idx[p]];
    col.swap(next);
  }
  std::fill(ps.w.begin(), ps.w.end(), 1.0 / static_cast<double>(N));
}

void pf_update(ParticleSet& ps, const MeasurementModel& model, const Eigen::VectorXd& z, Rng& rng) {
  int n = ps.n;
  std::size_t N = ps.size();
  Eigen::LLT<Eigen::MatrixXd> llt(model.R);
  std::vector<double> logw(N);
  Eigen::VectorXd xp(n);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < N; ++p) {
    for (int i = 0; i < n; ++i) xp[i] = ps.x[static_cast<std::size_t>(i)][p];
    Eigen::VectorXd r = z - model.evaluate(xp.data());
    Eigen::VectorXd s = llt.matrixL().solve(r);
    double ll = -0.5 * s.squaredNorm();
    if (!std::isfinite(ll)) ll = -std::numeric_limits<double>::infinity();
    logw[p] = (ps.w[p] > 0.0 ? std::log(ps.w[p]) : -std::numeric_limits<double>::infinity()) + ll;
    best = std::max(best, logw[p]);
  }
  ps.degenerate = false;
  if (!std::isfinite(best)) {
    std::fill(ps.w.begin(), ps.w.end(), 1.0 / static_cast<double>(N));
    ps.degenerate = true;
    return;
  }
  double tot = 0.0;
  for (std::size_t p = 0; p < N; ++p) {
    ps.w[p] = std::exp(logw[p] - best);
    tot += ps.w[p];
  }
  for (auto& v : ps.w) v /= tot;
  if (ps.ess() < 0.5 * static_cast<double>(N)) systematic_resample(ps, rng);
}

McResult mc_moment_oracle(const PolynomialSDE& sde, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                          const std::vector<double>& times, const McOptions& opt) {
  int n = sde.n();
  Rng rng(derive_seed(opt.seed, "mc-oracle"));
  ParticleSet ps = sample_gaussian(mean, cov, opt.N, rng);
  EulerMaruyama em(sde, opt.isa);
  BasisPtr B = enumerate_basis(n, opt.K);
  kernels::MonomialPlan plan = kernels::plan_monomials(*B);
  int G = std::max(2, opt.groups);
  McResult res;
  double t = 0.0;
  for (double target : times) {
    if (target < t - 1e-12) throw ConfigError("oracle times must be nondecreasing");
    em.advance(ps, target - t, opt.dt, rng);
    t = target;
    // per-group monomial sums for the jackknife
    std::vector<Eigen::VectorXd> gs(static_cast<std::size_t>(G), Eigen::VectorXd::Zero(static_cast<long>(B->size())));
    std::vector<double> gn(static_cast<std::size_t>(G), 0.0);
    auto cols = ps.columns();
    std::size_t N = ps.size();
    for (int g = 0; g < G; ++g) {
      std::size_t lo = N * static_cast<std::size_t>(g) / static_cast<std::size_t>(G);
      std::size_t hi = N * static_cast<std::size_t>(g + 1) / static_cast<std::size_t>(G);
      std::vector<const double*> sub;
      for (auto c : cols) sub.push_back(c + lo);
      kernels::accumulate_monomials(plan, sub.data(), nullptr, hi - lo, gs[static_cast<std::size_t>(g)].data(), opt.isa);
      gn[static_cast<std::size_t>(g)] = static_cast<double>(hi - lo);
    }
    Eigen::VectorXd tot = Eigen::VectorXd::Zero(static_cast<long>(B->size()));
    for (const auto& v : gs) tot += v;
    MomentVector raw(B, tot / static_cast<double>(N));
    MomentVector cen = center_moments(raw, raw.mean());
    std::vector<Eigen::VectorXd> jr, jc;
    for (int g = 0; g < G; ++g) {
      MomentVector r(B, (tot - gs[static_cast<std::size_t>(g)]) / (static_cast<double>(N) - gn[static_cast<std::size_t>(g)]));
      jr.push_back(r.values);
      jc.push_back(center_moments(r, r.mean()).values);
    }
    auto jack = [&](const std::vector<Eigen::VectorXd>& reps) {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(reps[0].size());
      for (const auto& v : reps) m += v;
      m /= G;
      Eigen::VectorXd s = Eigen::VectorXd::Zero(m.size());
      for (const auto& v : reps) s += (v - m).cwiseAbs2();
      return Eigen::VectorXd((s * (G - 1.0) / G).cwiseSqrt());
    };
    res.times.push_back(target);
    res.raw.push_back(raw);
    res.centered.push_back(cen);
    res.raw_se.push_back(jack(jr));
    res.centered_se.push_back(jack(jc));
  }
  return res;
}

namespace {

class EkfFilter : public Filter {
 public:
  EkfFilter(const PolynomialSDE& sde, const GaussianBelief& b, double dt_ode) : sde_(sde), b_(b), dt_ode_(dt_ode) {}
  std::string name() const override { return "EKF"; }
  void predict(double dt) override { b_ = ekf_predict(b_, sde_, dt, dt_ode_); }
  void update(const MeasurementModel& m, const Eigen::VectorXd& z) override { b_ = ekf_update(b_, m, z); }
  Eigen::VectorXd mean() const override { return b_.mean; }
  Eigen::MatrixXd covariance() const override { return b_.cov; }

 private:
  PolynomialSDE sde_;
  GaussianBelief b_;
  double dt_ode_;
};

class UkfFilter : public Filter {
 public:
  UkfFilter(const PolynomialSDE& sde, const GaussianBelief& b, double dt_ode, UkfParams p)
      : sde_(sde), b_(b), dt_ode_(dt_ode), p_(p) {}
  std::string name() const override { return "UKF"; }
  void predict(double dt) override { b_ = ukf_predict(b_, sde_, dt, dt_ode_, p_); }
  void update(const MeasurementModel& m, const Eigen::VectorXd& z) override { b_ = ukf_update(b_, m, z, p_); }
  Eigen::VectorXd mean() const override { return b_.mean; }
  Eigen::MatrixXd covariance() const override { return b_.cov; }

 private:
  PolynomialSDE sde_;
  GaussianBelief b_;
  double dt_ode_;
  UkfParams p_;
};

class ParticleFilterBase : public Filter {
 public:
  ParticleFilterBase(const PolynomialSDE& sde, const GaussianBelief& b, std::size_t N, double dt_ode,
                     std::uint64_t seed, const char* tag)
      : em_(sde), rng_(derive_seed(seed, tag)), dt_ode_(dt_ode) {
    ps_ = sample_gaussian(b.mean, b.cov, N, rng_);
  }
  void predict(double dt) override { em_.advance(ps_, dt, dt_ode_, rng_); }
  Eigen::VectorXd mean() const override { return ps_.mean(); }
  Eigen::MatrixXd covariance() const override { return ps_.covariance(); }

 protected:
  EulerMaruyama em_;
  Rng rng_;
  double dt_ode_;
  ParticleSet ps_;
};

class EnkfFilter : public ParticleFilterBase {
 public:
  using ParticleFilterBase::ParticleFilterBase;
  std::string name() const override { return "EnKF"; }
  void update(const MeasurementModel& m, const Eigen::VectorXd& z) override { enkf_update(ps_, m, z, rng_); }
};

class PfFilter : public ParticleFilterBase {
 public:
  using ParticleFilterBase::ParticleFilterBase;
  std::string name() const override { return "PF"; }
  void update(const MeasurementModel& m, const Eigen::VectorXd& z) override { pf_update(ps_, m, z, rng_); }
};

}  // namespace

std::unique_ptr<Filter> make_ekf(const PolynomialSDE& sde, const GaussianBelief& init, double dt_ode) {
  return std::make_unique<EkfFilter>(sde, init, dt_ode);
}
std::unique_ptr<Filter> make_ukf(const PolynomialSDE& sde, const GaussianBelief& init, double dt_ode, const UkfParams& p) {
  return std::make_unique<UkfFilter>(sde, init, dt_ode, p);
}
std::unique_ptr<Filter> make_enkf(const PolynomialSDE& sde, const GaussianBelief& init, std::size_t N, double dt_ode,
                                  std::uint64_t seed) {
  return std::make_unique<EnkfFilter>(sde, init, N, dt_ode, seed, "enkf");
}
std::unique_ptr<Filter> make_pf(const PolynomialSDE& sde, const GaussianBelief& init, std::size_t N, double dt_ode,
                                std::uint64_t seed) {
  return std::make_unique<PfFilter>(sde, init, N, dt_ode, seed, "pf");
}

}  // namespace skf

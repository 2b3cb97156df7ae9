#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "skf/baselines.hpp"
#include "skf/error.hpp"

using namespace skf;

namespace {

struct Affine {
  Eigen::MatrixXd A, G;
  Eigen::VectorXd c;
  PolynomialSDE sde;
};

Affine random_affine(oracle::Gen& g, int n) {
  Affine s;
  s.A.resize(n, n);
  s.G.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      s.A(i, j) = 0.4 * g.normal() - (i == j ? 0.5 : 0.0);
      s.G(i, j) = 0.3 * g.normal();
    }
  s.c = g.vec(n, 0.2);
  std::vector<Polynomial> drift, diff;
  for (int i = 0; i < n; ++i) {
    Polynomial f = Polynomial::constant(n, s.c[i]);
    for (int j = 0; j < n; ++j) f += Polynomial::variable(n, j, s.A(i, j));
    drift.push_back(f);
    for (int j = 0; j < n; ++j) diff.push_back(Polynomial::constant(n, s.G(i, j)));
  }
  s.sde = PolynomialSDE(drift, diff, n);
  return s;
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

}  // namespace

TEST_CASE("seed derivation is deterministic and separates tags") {
  CHECK(derive_seed(7, "pf") == derive_seed(7, "pf"));
  std::set<std::uint64_t> seen;
  for (std::uint64_t s : {1ull, 2ull, 3ull})
    for (const char* tag : {"pf", "enkf", "truth", "mc-oracle"}) seen.insert(derive_seed(s, tag));
  CHECK(seen.size() == 12);
}

TEST_CASE("EKF and UKF reduce to the Kalman filter on affine systems") {
  oracle::Gen g(3);
  for (int trial = 0; trial < 6; ++trial) {
    int n = g.integer(1, 3);
    Affine sys = random_affine(g, n);
    GaussianBelief b{g.vec(n, 0.5), g.spd(n, 0.2, 0.8)};
    auto kf = oracle::InfoKalman::from_moments(b.mean, b.cov);
    GaussianBelief e = b, u = b;
    Eigen::MatrixXd R = g.spd(1, 0.05, 0.2);
    MeasurementModel model = MeasurementModel::select(n, {n - 1}, R);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(1, n);
    H(0, n - 1) = 1.0;
    for (int step = 0; step < 5; ++step) {
      e = ekf_predict(e, sys.sde, 0.2, 0.01);
      u = ukf_predict(u, sys.sde, 0.2, 0.01);
      kf.predict(sys.A, sys.c, sys.G * sys.G.transpose(), 0.2);
      Eigen::VectorXd z = g.vec(1, 0.5);
      e = ekf_update(e, model, z);
      u = ukf_update(u, model, z);
      kf.update(H, R, z);
      CHECK(rel(e.mean, kf.mean()) < 1e-7);
      CHECK(rel(e.cov, kf.cov()) < 1e-7);
      CHECK(rel(u.mean, kf.mean()) < 1e-7);
      CHECK(rel(u.cov, kf.cov()) < 1e-7);
    }
  }
}

TEST_CASE("Gaussian sampling reproduces mean and covariance") {
  oracle::Gen g(5);
  Eigen::VectorXd mean = g.vec(3, 1.0);
  Eigen::MatrixXd cov = g.spd(3, 0.1, 2.0);
  Rng rng(11);
  ParticleSet ps = sample_gaussian(mean, cov, 200000, rng);
  CHECK(ps.size() == 200000);
  CHECK((ps.mean() - mean).norm() < 0.02);
  CHECK(rel(ps.covariance(), cov) < 0.02);
  CHECK(ps.ess() == doctest::Approx(200000.0));
}

TEST_CASE("systematic resampling keeps the count and follows the weights") {
  Rng rng(2);
  ParticleSet ps(1, 1000);
  for (std::size_t p = 0; p < 1000; ++p) {
    ps.x[0][p] = static_cast<double>(p);
    ps.w[p] = 0.0;
  }
  ps.w[17] = 0.75;
  ps.w[900] = 0.25;
  CHECK(ps.ess() == doctest::Approx(1.0 / (0.75 * 0.75 + 0.25 * 0.25)));
  systematic_resample(ps, rng);
  REQUIRE(ps.size() == 1000);
  int c17 = 0, c900 = 0;
  for (double v : ps.x[0]) {
    if (v == 17.0) ++c17;
    if (v == 900.0) ++c900;
  }
  // systematic resampling puts floor or ceil of N w copies on each particle
  CHECK(c17 == 750);
  CHECK(c900 == 250);
  for (double w : ps.w) CHECK(w == doctest::Approx(1e-3));
}

TEST_CASE("particle update flags total weight loss") {
  Rng rng(1);
  ParticleSet ps(1, 50);
  std::fill(ps.w.begin(), ps.w.end(), 0.0);
  MeasurementModel model = MeasurementModel::select(1, {0}, Eigen::MatrixXd::Identity(1, 1));
  pf_update(ps, model, Eigen::VectorXd::Zero(1), rng);
  CHECK(ps.degenerate);
  CHECK(ps.w[0] == doctest::Approx(1.0 / 50));

  // a healthy update stays on the simplex
  Rng r2(4);
  ParticleSet ok = sample_gaussian(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 500, r2);
  pf_update(ok, model, Eigen::VectorXd::Constant(1, 0.3), r2);
  CHECK_FALSE(ok.degenerate);
  double tot = 0.0;
  for (double w : ok.w) tot += w;
  CHECK(tot == doctest::Approx(1.0));
}

TEST_CASE("ensemble update approaches the Kalman posterior on a linear model") {
  oracle::Gen g(9);
  Eigen::VectorXd mean = g.vec(2, 0.5);
  Eigen::MatrixXd cov = g.spd(2, 0.3, 1.0);
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(1, 1) * 0.2;
  MeasurementModel model = MeasurementModel::select(2, {0}, R);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(1, 0.7);
  Rng rng(6);
  ParticleSet ens = sample_gaussian(mean, cov, 100000, rng);
  enkf_update(ens, model, z, rng);
  auto kf = oracle::InfoKalman::from_moments(mean, cov);
  Eigen::MatrixXd H(1, 2);
  H << 1.0, 0.0;
  kf.update(H, R, z);
  CHECK((ens.mean() - kf.mean()).norm() < 0.02);
  CHECK(rel(ens.covariance(), kf.cov()) < 0.03);
  ParticleSet one(1, 1);
  CHECK_THROWS_AS(enkf_update(one, MeasurementModel::select(1, {0}, R), z, rng), ConfigError);
}

TEST_CASE("Monte Carlo oracle agrees with the OU law within its standard errors") {
  double theta = 1.0, sigma = 0.5;
  PolynomialSDE ou({Polynomial::variable(1, 0, -theta)}, {Polynomial::constant(1, sigma)}, 1);
  McOptions opt;
  opt.N = 50000;
  opt.dt = 0.001;
  opt.K = 4;
  Eigen::VectorXd m0 = Eigen::VectorXd::Constant(1, 1.0);
  Eigen::MatrixXd P0 = Eigen::MatrixXd::Constant(1, 1, 0.1);
  McResult res = mc_moment_oracle(ou, m0, P0, {0.5, 1.0}, opt);
  REQUIRE(res.times.size() == 2);
  for (std::size_t k = 0; k < res.times.size(); ++k) {
    double t = res.times[k];
    double m = std::exp(-theta * t);
    double v = 0.1 * std::exp(-2 * theta * t) + sigma * sigma / (2 * theta) * (1 - std::exp(-2 * theta * t));
    const MomentVector& raw = res.raw[k];
    const MomentVector& cen = res.centered[k];
    // bias of the Euler scheme is O(dt), far below the sampling noise here
    CHECK(std::fabs(raw.at(MultiIndex{1}) - m) < 4 * res.raw_se[k][1] + 1e-3);
    CHECK(std::fabs(cen.at(MultiIndex{2}) - v) < 4 * res.centered_se[k][2] + 1e-3);
    CHECK(std::fabs(cen.at(MultiIndex{4}) - 3 * v * v) < 4 * res.centered_se[k][4] + 1e-3);
    CHECK(res.raw_se[k][1] > 0.0);
  }
  CHECK_THROWS_AS(mc_moment_oracle(ou, m0, P0, {1.0, 0.5}, opt), ConfigError);
}

TEST_CASE("filters share one interface") {
  Affine sys;
  oracle::Gen g(1);
  sys = random_affine(g, 2);
  GaussianBelief init{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2) * 0.1};
  MeasurementModel model = MeasurementModel::select(2, {0}, Eigen::MatrixXd::Identity(1, 1) * 0.1);
  std::vector<std::unique_ptr<Filter>> fs;
  fs.push_back(make_ekf(sys.sde, init, 0.01));
  fs.push_back(make_ukf(sys.sde, init, 0.01));
  fs.push_back(make_enkf(sys.sde, init, 200, 0.01, 3));
  fs.push_back(make_pf(sys.sde, init, 500, 0.01, 3));
  std::set<std::string> names;
  for (auto& f : fs) {
    names.insert(f->name());
    f->predict(0.2);
    f->update(model, Eigen::VectorXd::Constant(1, 0.1));
    CHECK(f->mean().size() == 2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f->covariance());
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
  CHECK(names == std::set<std::string>{"EKF", "UKF", "EnKF", "PF"});
}

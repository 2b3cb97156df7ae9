#include <doctest.h>

#include <string>

#include "oracles.hpp"
#include "skf/error.hpp"
#include "skf/stein.hpp"

using namespace skf;

namespace {

MomentVector gaussian_raw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int K) {
  int n = static_cast<int>(mean.size());
  BasisPtr b = enumerate_basis(n, K);
  MomentVector m(b);
  for (std::size_t k = 0; k < b->size(); ++k) {
    std::vector<int> a(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = (*b)[k][i];
    m.values[static_cast<long>(k)] = oracle::gaussian_moment(mean, cov, a);
  }
  return m;
}

ScoreParams quartic_1d(const std::vector<double>& c) {
  ScoreParams l(enumerate_basis(1, 4));
  for (int k = 1; k <= 4; ++k) l.lambda[k] = c[static_cast<std::size_t>(k)];
  return l;
}

ScoreParams gaussian_lambda(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  int n = static_cast<int>(mean.size());
  ScoreParams l(enumerate_basis(n, 2));
  Eigen::MatrixXd Om = cov.inverse();
  Eigen::VectorXd lin = -Om * mean;
  for (int i = 0; i < n; ++i) {
    l.lambda[l.basis->lookup(MultiIndex::unit(n, i))] = lin[i];
    for (int j = i; j < n; ++j)
      l.lambda[l.basis->lookup(mi_add(MultiIndex::unit(n, i), MultiIndex::unit(n, j)))] = i == j ? 0.5 * Om(i, i) : Om(i, j);
  }
  return l;
}

// number of multi-indices of exact degree d, counted by brute force
std::uint64_t brute_degree_count(int n, int d) {
  if (n == 1) return 1;
  std::uint64_t c = 0;
  for (int e = 0; e <= d; ++e) c += brute_degree_count(n - 1, d - e);
  return c;
}

}  // namespace

TEST_CASE("Stein rows vanish on exact moments of a quartic density") {
  std::vector<double> c = {0.0, -0.2, 0.5, 0.15, 0.2};
  auto raw = oracle::density_moments_1d(c, 14);
  ScoreParams l = quartic_1d(c);
  for (int beta = 1; beta <= 8; ++beta) {
    double lhs = 0.0;
    for (const auto& [g, coef] : stein_lhs_coeffs(l, MultiIndex{beta}, 0)) lhs += coef * raw[static_cast<std::size_t>(g[0])];
    CHECK(lhs == doctest::Approx(beta * raw[static_cast<std::size_t>(beta - 1)]).epsilon(1e-9));
  }
}

TEST_CASE("Stein rows vanish on exact moments of a 2-D density") {
  auto energy = [](double x, double y) {
    return 0.6 * x * x + 0.5 * y * y - 0.2 * x * y + 0.1 * y + 0.1 * x * x * x * x + 0.08 * y * y * y * y +
           0.04 * x * y * y * y;
  };
  auto q = oracle::density_moments_2d(energy, 8, 6.0, 600);
  ScoreParams l(enumerate_basis(2, 4));
  l.lambda[l.basis->lookup(MultiIndex{2, 0})] = 0.6;
  l.lambda[l.basis->lookup(MultiIndex{0, 2})] = 0.5;
  l.lambda[l.basis->lookup(MultiIndex{1, 1})] = -0.2;
  l.lambda[l.basis->lookup(MultiIndex{0, 1})] = 0.1;
  l.lambda[l.basis->lookup(MultiIndex{4, 0})] = 0.1;
  l.lambda[l.basis->lookup(MultiIndex{0, 4})] = 0.08;
  l.lambda[l.basis->lookup(MultiIndex{1, 3})] = 0.04;
  BasisPtr rows = enumerate_basis(2, 5);
  for (const auto& beta : rows->entries())
    for (int i = 0; i < 2; ++i) {
      if (beta[i] == 0) continue;
      double lhs = 0.0;
      for (const auto& [g, coef] : stein_lhs_coeffs(l, beta, i)) lhs += coef * q.at(g[0], g[1]);
      MultiIndex bm = beta;
      bm.set(i, beta[i] - 1);
      CHECK(lhs == doctest::Approx(beta[i] * q.at(bm[0], bm[1])).epsilon(1e-8).scale(1.0));
    }
}

TEST_CASE("closure of a Gaussian fit reproduces Isserlis moments") {
  // property: with a quadratic energy every untruncated closure row is exact
  oracle::Gen g(31);
  for (int trial = 0; trial < 8; ++trial) {
    int n = g.integer(1, 3);
    Eigen::VectorXd mean = g.vec(n, 0.3);
    Eigen::MatrixXd cov = g.spd(n, 0.2, 1.0);
    ScoreParams l = gaussian_lambda(mean, cov);
    MomentVector tracked = gaussian_raw(mean, cov, 2);
    ClosureConfig cfg;
    cfg.range = RowRange::Standard;
    if (count_system(n, 2, CountMode::Standard).rows < count_system(n, 2, CountMode::Standard).unknowns) {
      CHECK_THROWS_AS(layered_closure(l, tracked, 2, cfg), UnderdeterminedSystem);
      continue;
    }
    MomentVector ext = layered_closure(l, tracked, 2, cfg);
    MomentVector truth = gaussian_raw(mean, cov, 4);
    REQUIRE(ext.degree() == 4);
    CHECK((ext.values - truth.values).norm() < 1e-9 * truth.values.norm());
  }
}

TEST_CASE("first-layer closure of a quartic density is exact in 1-D") {
  std::vector<double> c = {0.0, 0.1, -0.3, 0.05, 0.2};
  auto raw = oracle::density_moments_1d(c, 9);
  BasisPtr b = enumerate_basis(1, 6);
  MomentVector tracked(b);
  for (int k = 0; k <= 6; ++k) tracked.at(MultiIndex{k}) = raw[static_cast<std::size_t>(k)];
  ClosureConfig cfg;
  cfg.range = RowRange::FirstLayer;
  MomentVector ext = layered_closure(quartic_1d(c), tracked, 2, cfg);
  CHECK(ext.at(MultiIndex{7}) == doctest::Approx(raw[7]).epsilon(1e-8));
  CHECK(ext.at(MultiIndex{8}) == doctest::Approx(raw[8]).epsilon(1e-8));
  // tracked entries pass through untouched
  CHECK(ext.at(MultiIndex{6}) == raw[6]);
}

TEST_CASE("closure system sizes match the closed-form counts") {
  // property: built systems and the formula agree for every mode that is not underdetermined
  oracle::Gen g(17);
  for (int n = 1; n <= 4; ++n)
    for (int r = 2; r <= 4; ++r) {
      ScoreParams l(enumerate_basis(n, r));
      for (long k = 1; k < l.lambda.size(); ++k) l.lambda[k] = g.uniform(0.1, 1.0);
      int K = 2 * r - 2;
      for (auto [rr, mode] : {std::pair{RowRange::FirstLayer, CountMode::FirstLayer},
                              std::pair{RowRange::Standard, CountMode::Standard},
                              std::pair{RowRange::Extended, CountMode::Extended}}) {
        SystemCount cnt = count_system(n, r, mode);
        std::uint64_t rows = 0;
        int top = mode == CountMode::FirstLayer ? r : (mode == CountMode::Standard ? K : K + 1);
        for (int d = r; d <= top; ++d) rows += static_cast<std::uint64_t>(n) * brute_degree_count(n, d - 1);
        CHECK(cnt.rows == rows);
        CHECK(cnt.unknowns == brute_degree_count(n, K + 1));
        ClosureConfig cfg;
        cfg.range = rr;
        if (cnt.rows >= cnt.unknowns) {
          SteinSystem sys = build_closure_system(l, K, full_targets(n, K + 1), cfg);
          CHECK(sys.n_rows() == cnt.rows);
          CHECK(sys.n_unknowns() == cnt.unknowns);
        } else {
          CHECK_THROWS_AS(build_closure_system(l, K, full_targets(n, K + 1), cfg), UnderdeterminedSystem);
        }
      }
    }
  CHECK_THROWS_AS(count_system(0, 3, CountMode::Standard), ConfigError);
  CHECK_THROWS_AS(count_system(3, 1, CountMode::Standard), ConfigError);
}

TEST_CASE("automatic row range avoids the first layer") {
  ClosureConfig cfg;
  CHECK(resolve_row_range(2, 4, cfg) == RowRange::Standard);
  CHECK(resolve_row_range(16, 3, cfg) == RowRange::Extended);
  cfg.range = RowRange::FirstLayer;
  CHECK(resolve_row_range(2, 4, cfg) == RowRange::FirstLayer);
}

TEST_CASE("exact recovery rows alone are underdetermined for n=2, r=4") {
  ScoreParams l(enumerate_basis(2, 4));
  for (long k = 1; k < l.lambda.size(); ++k) l.lambda[k] = 0.1 * static_cast<double>(k);
  RecoveryConfig cfg;
  cfg.pad_degree = 0;
  cfg.max_row_degree = 3;  // rows whose terms all stay within degree 6
  cfg.include_zero_rows = false;
  try {
    build_recovery_system(l, 6, cfg);
    FAIL("expected UnderdeterminedSystem");
  } catch (const UnderdeterminedSystem& e) {
    CHECK(std::string(e.what()).find("12 rows for 27 unknowns") != std::string::npos);
  }
  cfg.max_row_degree = -1;  // rows up to degree K + pad - 1 with truncation
  cfg.include_zero_rows = true;
  SteinSystem sys = build_recovery_system(l, 6, cfg);
  CHECK(sys.n_rows() > sys.n_unknowns());
  CHECK(sys.truncated_rows > 0);
  CHECK(sys.mode == SteinMode::Recovery);
}

TEST_CASE("automatic recovery padding respects the unknown budget") {
  RecoveryConfig cfg;
  for (int n = 1; n <= 4; ++n)
    for (int K : {2, 4, 6}) {
      int pad = recovery_pad(n, K, cfg);
      CHECK(pad >= 0);
      CHECK(pad <= cfg.max_auto_pad);
      if (pad > 0) CHECK(binomial(static_cast<std::uint64_t>(n + K + pad), static_cast<std::uint64_t>(n)) - 1 <= cfg.unknown_budget);
    }
  cfg.pad_degree = 2;
  CHECK(recovery_pad(3, 4, cfg) == 2);
}

TEST_CASE("cached factorization gives the same answers as fresh solves") {
  oracle::Gen g(2);
  ScoreParams l(enumerate_basis(2, 3));
  for (long k = 1; k < l.lambda.size(); ++k) l.lambda[k] = g.uniform(-0.5, 1.0);
  l.lambda[l.basis->lookup(MultiIndex{2, 0})] = 1.0;
  l.lambda[l.basis->lookup(MultiIndex{0, 2})] = 1.0;
  ClosureConfig cfg;
  cfg.range = RowRange::Extended;
  SteinSystem sys = build_closure_system(l, 4, full_targets(2, 5), cfg);
  std::uint64_t before = FactorCache::factorizations();
  FactorCache fc(sys);
  CHECK(FactorCache::factorizations() == before + 1);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd known(static_cast<long>(sys.known->size()));
    for (long k = 0; k < known.size(); ++k) known[k] = g.normal();
    SolveResult a = fc.solve(known), b = solve_closure(sys, known);
    CHECK((a.values - b.values).norm() <= 1e-12 * (1.0 + b.values.norm()));
    // least-squares optimality: residual orthogonal to the columns
    Eigen::MatrixXd Ad(sys.lhs);
    Eigen::VectorXd res = Ad * a.values - sys.rhs(known);
    CHECK((Ad.transpose() * res).norm() < 1e-9 * (1.0 + sys.rhs(known).norm()));
    CHECK(a.residual == doctest::Approx(res.norm()));
  }
  CHECK(FactorCache::factorizations() == before + 21);
  CHECK_THROWS_AS(fc.solve(Eigen::VectorXd::Zero(3)), ConfigError);
}

TEST_CASE("rank-deficient systems are reported") {
  SteinSystem sys;
  sys.known = enumerate_basis(2, 0);
  sys.columns = {MultiIndex{3, 0}, MultiIndex{0, 3}};
  sys.rows.resize(3);
  sys.lhs.resize(3, 2);
  sys.rhs_map.resize(3, 1);
  for (int k = 0; k < 3; ++k) {
    sys.lhs.insert(k, 0) = 1.0 + k;
    sys.lhs.insert(k, 1) = 2.0 + 2.0 * k;
    sys.rhs_map.insert(k, 0) = 1.0;
  }
  try {
    FactorCache fc(sys);
    FAIL("expected RankDeficient");
  } catch (const RankDeficient& e) {
    CHECK(e.rank() == 1);
    CHECK(e.columns() == 2);
    CHECK(e.deficiency() == 1);
  }
}

TEST_CASE("double-well even-moment dynamics vanish at stationarity") {
  for (double sigma : {0.3, 0.5, 0.8}) {
    double q = sigma * sigma;
    std::vector<double> c = {0.0, 0.0, -1.0 / q, 0.0, 0.5 / q};
    auto raw = oracle::density_moments_1d(c, 8, 4.0, 40000);
    StationaryMoments s = dw_stationary_moments(sigma);
    CHECK(s.m2 == doctest::Approx(raw[2]).epsilon(1e-9));
    CHECK(s.m4 == doctest::Approx(raw[4]).epsilon(1e-9));
    CHECK(s.m6 == doctest::Approx(raw[6]).epsilon(1e-9));
    CHECK(s.m8 == doctest::Approx(raw[8]).epsilon(1e-9));
    DwEvenDynamics d = dw_even_dynamics(sigma);
    Eigen::Vector3d st(s.m2, s.m4, s.m6);
    Eigen::Vector3d ds = d.A * st + d.B * s.m8 + d.c;
    CHECK(ds.norm() < 1e-8);
  }
}

TEST_CASE("cone closure bounds") {
  double sigma = 0.5, kappa = 6.0;
  StationaryMoments s = dw_stationary_moments(sigma);
  double L = hankel_lower_bound(s.m2, s.m4, s.m6);
  // the Hankel determinant vanishes at the lower bound and is positive above it
  auto hdet = [&](double u) {
    Eigen::Matrix3d H;
    H << 1, s.m2, s.m4, s.m2, s.m4, s.m6, s.m4, s.m6, u;
    return H.determinant();
  };
  CHECK(std::fabs(hdet(L)) < 1e-12);
  CHECK(hdet(L + 0.01) > 0.0);
  CHECK(s.m8 > L);

  // the barrier bound makes g' + kappa g vanish along the moment flow
  double U = barrier_upper_bound(s.m2, s.m4, s.m6, sigma, kappa);
  DwEvenDynamics d = dw_even_dynamics(sigma);
  Eigen::Vector3d st(s.m2, s.m4, s.m6);
  Eigen::Vector3d ds = d.A * st + d.B * U + d.c;
  auto gfun = [](const Eigen::Vector3d& v) { return v[0] * v[2] - v[1] * v[1]; };
  double h = 1e-6;
  double gdot = (gfun(st + h * ds) - gfun(st - h * ds)) / (2 * h);
  CHECK(gdot + kappa * gfun(st) == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));

  // calibration makes the closure exact at stationarity
  double theta = calibrate_theta_inf(sigma, kappa);
  ConeCbf1dState cs{s.m2, s.m4, s.m6, sigma, kappa, theta};
  ConeCbfResult res = cone_cbf_closure_1d(cs);
  CHECK(res.u == doctest::Approx(s.m8).epsilon(1e-10));
  CHECK_FALSE(res.clamped);
  CHECK(res.lower == doctest::Approx(L));
  CHECK(res.upper == doctest::Approx(U));

  // a state far outside the cone clamps to the Hankel bound
  ConeCbf1dState bad{1.0, 1.2, 1.5, sigma, 50.0, 0.5};
  ConeCbfResult rb = cone_cbf_closure_1d(bad);
  if (rb.upper < rb.lower) {
    CHECK(rb.clamped);
    CHECK(rb.u == rb.lower);
  }
  CHECK_THROWS_AS(hankel_lower_bound(1.0, 1.0, 1.0), NumericalError);
}

TEST_CASE("separable energies fall back to zero rows for squarefree targets") {
  // with no cross terms, directional rows never reach x1 x2 x3 x4 x5 when n = 6
  int n = 6;
  Eigen::VectorXd mean = Eigen::VectorXd::LinSpaced(n, -0.3, 0.3);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n) * 0.3;
  // the filter carries a cubic basis; a Gaussian fit leaves the cubic terms at zero
  ScoreParams g2 = gaussian_lambda(mean, cov), l(enumerate_basis(n, 3));
  for (std::size_t k = 1; k < g2.basis->size(); ++k) l.lambda[l.basis->lookup((*g2.basis)[k])] = g2.lambda[static_cast<long>(k)];
  ClosureConfig cfg;
  cfg.range = RowRange::Standard;
  CHECK_THROWS_AS(FactorCache(build_closure_system(l, 4, full_targets(n, 5), cfg)), RankDeficient);
  LayeredClosure lc(l, 4, 1, cfg);
  MomentVector m = gaussian_raw(mean, cov, 4);
  MomentVector ext(lc.extended(), lc.close(m.values));
  for (std::size_t k = m.basis->size(); k < ext.basis->size(); k += 17) {
    const MultiIndex& a = (*ext.basis)[k];
    std::vector<int> e(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) e[static_cast<std::size_t>(i)] = a[i];
    CHECK(ext.values[static_cast<long>(k)] == doctest::Approx(oracle::gaussian_moment(mean, cov, e)).epsilon(1e-9).scale(1.0));
  }
  cfg.include_zero_rows = true;
  CHECK_NOTHROW(FactorCache(build_closure_system(l, 4, full_targets(n, 5), cfg)));
}

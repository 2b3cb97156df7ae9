#include <doctest.h>

#include "oracles.hpp"
#include "skf/error.hpp"
#include "skf/score_match.hpp"

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

MomentVector from_1d(const std::vector<double>& raw) {
  BasisPtr b = enumerate_basis(1, static_cast<int>(raw.size()) - 1);
  MomentVector m(b);
  for (std::size_t k = 0; k < raw.size(); ++k) m.at(MultiIndex{static_cast<int>(k)}) = raw[k];
  return m;
}

}  // namespace

TEST_CASE("Gram entries match quadrature of gradient inner products") {
  // A_pq = E[grad phi_p . grad phi_q], b_p = E[laplacian phi_p] under N(mean, cov)
  Eigen::VectorXd mean(2);
  mean << 0.3, -0.1;
  Eigen::MatrixXd cov(2, 2);
  cov << 0.4, 0.1, 0.1, 0.3;
  int r = 3;
  MomentVector m = gaussian_raw(mean, cov, 2 * r - 2);
  GramSystem g = assemble_gram(m, r);
  const auto& B = *g.basis;
  REQUIRE(g.A.rows() == static_cast<long>(B.size()) - 1);
  auto grad_mono = [](const MultiIndex& a, int i) {
    // returns coefficient and exponent of d/dx_i x^a
    std::vector<int> e = {a[0], a[1]};
    double c = e[static_cast<std::size_t>(i)];
    if (c > 0) e[static_cast<std::size_t>(i)] -= 1;
    return std::make_pair(c, e);
  };
  for (std::size_t p = 1; p < B.size(); ++p) {
    for (std::size_t q = 1; q < B.size(); ++q) {
      double expect = 0.0;
      for (int i = 0; i < 2; ++i) {
        auto [cp, ep] = grad_mono(B[p], i);
        auto [cq, eq] = grad_mono(B[q], i);
        if (cp == 0 || cq == 0) continue;
        expect += cp * cq * oracle::gaussian_moment(mean, cov, {ep[0] + eq[0], ep[1] + eq[1]});
      }
      CHECK(g.A(static_cast<long>(p) - 1, static_cast<long>(q) - 1) == doctest::Approx(expect).epsilon(1e-10));
    }
    double lap = 0.0;
    for (int i = 0; i < 2; ++i) {
      int e = B[p][i];
      if (e < 2) continue;
      std::vector<int> a = {B[p][0], B[p][1]};
      a[static_cast<std::size_t>(i)] -= 2;
      lap += e * (e - 1) * oracle::gaussian_moment(mean, cov, a);
    }
    CHECK(g.b[static_cast<long>(p) - 1] == doctest::Approx(lap).epsilon(1e-10));
  }
  CHECK_THROWS_AS(assemble_gram(m.truncated(3), r), ConfigError);
}

TEST_CASE("quadratic fit of Gaussian moments is the precision form") {
  oracle::Gen g(21);
  for (int trial = 0; trial < 10; ++trial) {
    int n = g.integer(1, 3);
    Eigen::VectorXd mean = g.vec(n, 0.7);
    Eigen::MatrixXd cov = g.spd(n, 0.2, 1.5);
    FitResult fr = score_match(gaussian_raw(mean, cov, 2), 2);
    Eigen::MatrixXd Om = cov.inverse();
    Eigen::VectorXd lin = -Om * mean;
    const ScoreParams& l = fr.params;
    CHECK(l.lambda[0] == 0.0);
    for (int i = 0; i < n; ++i) {
      CHECK(l.at(MultiIndex::unit(n, i)) == doctest::Approx(lin[i]).epsilon(1e-9));
      for (int j = i; j < n; ++j) {
        MultiIndex a = mi_add(MultiIndex::unit(n, i), MultiIndex::unit(n, j));
        double expect = i == j ? 0.5 * Om(i, i) : Om(i, j);
        CHECK(l.at(a) == doctest::Approx(expect).epsilon(1e-9));
      }
    }
    CHECK(fr.condition >= 1.0);
    CHECK_FALSE(fr.ill_conditioned);
  }
}

TEST_CASE("score matching recovers a 1-D quartic exponential family") {
  std::vector<double> c = {0.0, 0.3, -0.4, 0.1, 0.25};
  auto raw = oracle::density_moments_1d(c, 6);
  FitResult fr = score_match(from_1d(raw), 4);
  for (int k = 1; k <= 4; ++k) CHECK(fr.params.at(MultiIndex{k}) == doctest::Approx(c[static_cast<std::size_t>(k)]).epsilon(1e-7));
  // the fit is a stationary point of the objective
  GramSystem gs = assemble_gram(from_1d(raw), 4);
  CHECK(sm_gradient(fr.params, gs).norm() < 1e-10 * gs.b.norm());
}

TEST_CASE("score matching recovers a 2-D quartic exponential family") {
  auto energy = [](double x, double y) {
    return 0.2 * x + 0.6 * x * x + 0.8 * y * y + 0.3 * x * y + 0.1 * x * x * x + 0.12 * x * x * x * x +
           0.1 * y * y * y * y + 0.05 * x * x * y * y;
  };
  auto q = oracle::density_moments_2d(energy, 6, 6.0, 600);
  BasisPtr b = enumerate_basis(2, 6);
  MomentVector m(b);
  for (std::size_t k = 0; k < b->size(); ++k) m.values[static_cast<long>(k)] = q.at((*b)[k][0], (*b)[k][1]);
  FitResult fr = score_match(m, 4);
  std::vector<std::pair<MultiIndex, double>> expect = {
      {MultiIndex{1, 0}, 0.2}, {MultiIndex{2, 0}, 0.6},  {MultiIndex{0, 2}, 0.8},  {MultiIndex{1, 1}, 0.3},
      {MultiIndex{3, 0}, 0.1}, {MultiIndex{4, 0}, 0.12}, {MultiIndex{0, 4}, 0.1}, {MultiIndex{2, 2}, 0.05},
      {MultiIndex{0, 1}, 0.0}, {MultiIndex{2, 1}, 0.0},  {MultiIndex{3, 1}, 0.0},  {MultiIndex{1, 3}, 0.0}};
  for (const auto& [a, v] : expect) CHECK(fr.params.at(a) == doctest::Approx(v).scale(1.0).epsilon(1e-6));
}

TEST_CASE("objective gradient agrees with finite differences") {
  oracle::Gen g(8);
  Eigen::VectorXd mean = g.vec(2, 0.5);
  Eigen::MatrixXd cov = g.spd(2, 0.3, 1.0);
  GramSystem gs = assemble_gram(gaussian_raw(mean, cov, 4), 3);
  ScoreParams l(gs.basis);
  for (long k = 1; k < l.lambda.size(); ++k) l.lambda[k] = g.normal();
  Eigen::VectorXd grad = sm_gradient(l, gs);
  double h = 1e-6;
  for (long k = 1; k < l.lambda.size(); ++k) {
    ScoreParams lp = l, lm = l;
    lp.lambda[k] += h;
    lm.lambda[k] -= h;
    double fd = (sm_objective(lp, gs) - sm_objective(lm, gs)) / (2 * h);
    CHECK(grad[k - 1] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("singular Gram matrices are reported") {
  // a point mass has no spread, so the Gram matrix is zero
  BasisPtr b = enumerate_basis(1, 2);
  MomentVector m(b);
  m.at(MultiIndex{0}) = 1.0;
  CHECK_THROWS_AS(score_match(m, 2), SingularGram);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 2);
  S(0, 0) = 1.0;
  CHECK(std::isinf(condition_estimate(S)));
  Eigen::MatrixXd D = Eigen::Vector2d(4.0, 0.5).asDiagonal();
  CHECK(condition_estimate(D) == doctest::Approx(8.0));
}

TEST_CASE("centering and scaling round trips") {
  oracle::Gen g(4);
  for (int trial = 0; trial < 10; ++trial) {
    int n = g.integer(1, 3);
    Eigen::VectorXd mean = g.vec(n, 1.0);
    Eigen::MatrixXd cov = g.spd(n, 0.1, 1.0);
    MomentVector raw = gaussian_raw(mean, cov, 4);
    std::vector<double> mu(mean.data(), mean.data() + n);
    MomentVector cen = center_moments(raw, mu);
    MomentVector zero_mean = gaussian_raw(Eigen::VectorXd::Zero(n), cov, 4);
    CHECK((cen.values - zero_mean.values).norm() < 1e-10 * zero_mean.values.norm());
    CHECK((uncenter_moments(cen, mu).values - raw.values).norm() < 1e-10 * raw.values.norm());

    std::vector<double> s(static_cast<std::size_t>(n));
    for (auto& v : s) v = g.uniform(0.3, 3.0);
    MomentVector sc = scale_moments(cen, s);
    // scaled moments are moments of w = z / s
    Eigen::MatrixXd D = Eigen::Map<Eigen::VectorXd>(s.data(), n).cwiseInverse().asDiagonal();
    MomentVector direct = gaussian_raw(Eigen::VectorXd::Zero(n), D * cov * D, 4);
    CHECK((sc.values - direct.values).norm() < 1e-10 * direct.values.norm());
    CHECK((unscale_moments(sc, s).values - cen.values).norm() < 1e-10 * cen.values.norm());

    auto ds = default_scale(cen, 3.5);
    for (int i = 0; i < n; ++i) CHECK(ds[static_cast<std::size_t>(i)] == doctest::Approx(3.5 * std::sqrt(cov(i, i))));
  }
}

TEST_CASE("rescaled natural parameters describe the same density") {
  oracle::Gen g(6);
  BasisPtr b = enumerate_basis(2, 4);
  ScoreParams lz(b);
  for (long k = 1; k < lz.lambda.size(); ++k) lz.lambda[k] = g.normal();
  std::vector<double> s = {0.7, 2.2};
  ScoreParams lw = rescale_score(lz, s);
  for (int t = 0; t < 20; ++t) {
    double w[2] = {g.uniform(-1, 1), g.uniform(-1, 1)};
    double z[2] = {s[0] * w[0], s[1] * w[1]};
    CHECK(lw.energy(w) == doctest::Approx(lz.energy(z)).epsilon(1e-12));
    // score transforms as a covector
    auto sw = lw.score(w), sz = lz.score(z);
    for (int i = 0; i < 2; ++i) CHECK(sw[static_cast<std::size_t>(i)] == doctest::Approx(sz[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }
  ScoreParams back = unscale_score(lw, s);
  CHECK((back.lambda - lz.lambda).norm() < 1e-12 * lz.lambda.norm());
}

TEST_CASE("score is minus the energy gradient") {
  oracle::Gen g(9);
  BasisPtr b = enumerate_basis(3, 3);
  ScoreParams l(b);
  for (long k = 1; k < l.lambda.size(); ++k) l.lambda[k] = g.normal();
  double x[3] = {0.3, -0.5, 0.8};
  auto sc = l.score(x);
  for (int i = 0; i < 3; ++i) {
    double xp[3] = {x[0], x[1], x[2]}, xm[3] = {x[0], x[1], x[2]};
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    CHECK(sc[static_cast<std::size_t>(i)] == doctest::Approx(-(l.energy(xp) - l.energy(xm)) / 2e-6).epsilon(1e-6));
  }
}

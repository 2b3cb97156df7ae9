#include "skf/score_match.hpp"

#include <cmath>
#include <limits>

#include "skf/error.hpp"

namespace skf {

ScoreParams::ScoreParams(BasisPtr b, Eigen::VectorXd l) : basis(std::move(b)), lambda(std::move(l)) {
  if (static_cast<std::size_t>(lambda.size()) != basis->size()) throw ConfigError("ScoreParams: size mismatch");
  lambda[0] = 0.0;
}

double ScoreParams::at(const MultiIndex& a) const {
  long k = basis->lookup(a);
  return k < 0 ? 0.0 : lambda[k];
}

double ScoreParams::energy(const double* x) const {
  double e = 0.0;
  for (std::size_t k = 1; k < basis->size(); ++k) {
    const MultiIndex& a = (*basis)[k];
    double t = lambda[static_cast<long>(k)];
    for (int i = 0; i < a.size(); ++i)
      for (int p = 0; p < a[i]; ++p) t *= x[i];
    e += t;
  }
  return e;
}

std::vector<double> ScoreParams::score(const double* x) const {
  int n = basis->n();
  std::vector<double> s(static_cast<std::size_t>(n), 0.0);
  for (std::size_t k = 1; k < basis->size(); ++k) {
    const MultiIndex& a = (*basis)[k];
    for (int i = 0; i < n; ++i) {
      if (a[i] == 0) continue;
      double t = lambda[static_cast<long>(k)] * a[i];
      for (int j = 0; j < n; ++j) {
        int p = a[j] - (j == i ? 1 : 0);
        for (int q = 0; q < p; ++q) t *= x[j];
      }
      s[static_cast<std::size_t>(i)] -= t;
    }
  }
  return s;
}

GramSystem assemble_gram(const MomentVector& m, int r) {
  if (r < 1) throw ConfigError("assemble_gram: r >= 1");
  int n = m.n();
  if (m.degree() < 2 * r - 2) throw ConfigError("assemble_gram: moments must reach degree 2r-2");
  GramSystem sys;
  sys.r = r;
  sys.basis = enumerate_basis(n, r);
  const auto& B = *sys.basis;
  long M = static_cast<long>(B.size()) - 1;
  sys.A = Eigen::MatrixXd::Zero(M, M);
  sys.b = Eigen::VectorXd::Zero(M);
  MultiIndex tmp(n);
  for (long p = 0; p < M; ++p) {
    const MultiIndex& a = B[static_cast<std::size_t>(p + 1)];
    for (long q = p; q < M; ++q) {
      const MultiIndex& c = B[static_cast<std::size_t>(q + 1)];
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        if (a[i] == 0 || c[i] == 0) continue;
        for (int j = 0; j < n; ++j) tmp.set(j, a[j] + c[j] - (j == i ? 2 : 0));
        acc += a[i] * c[i] * m.values[m.basis->lookup(tmp)];
      }
      sys.A(p, q) = acc;
      sys.A(q, p) = acc;
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      if (a[i] < 2) continue;
      for (int j = 0; j < n; ++j) tmp.set(j, a[j] - (j == i ? 2 : 0));
      acc += a[i] * (a[i] - 1) * m.values[m.basis->lookup(tmp)];
    }
    sys.b[p] = acc;
  }
  return sys;
}

double condition_estimate(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw ConfigError("condition_estimate: square matrix required");
  if (A.rows() == 0) return 1.0;
  Eigen::VectorXd sv;
  if (A.isApprox(A.transpose())) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    sv = es.eigenvalues().cwiseAbs();
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    sv = svd.singularValues();
  }
  double hi = sv.maxCoeff(), lo = sv.minCoeff();
  if (!(hi > 0.0)) return std::numeric_limits<double>::infinity();
  if (lo <= hi * std::numeric_limits<double>::epsilon() * static_cast<double>(A.rows()))
    return std::numeric_limits<double>::infinity();
  return hi / lo;
}

FitResult fit_score(const GramSystem& sys, const FitOptions& opt) {
  Eigen::MatrixXd A = sys.A;
  if (opt.ridge > 0.0) A.diagonal().array() += opt.ridge;
  if (!A.allFinite() || !sys.b.allFinite()) throw SingularGram("Gram system has non-finite entries");
  Eigen::VectorXd x;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    x = llt.solve(sys.b);
    ok = x.allFinite();
  }
  if (!ok) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < A.cols())
      throw SingularGram("Gram matrix rank " + std::to_string(qr.rank()) + " < " + std::to_string(A.cols()));
    x = qr.solve(sys.b);
  }
  FitResult out;
  Eigen::VectorXd full(x.size() + 1);
  full[0] = 0.0;
  full.tail(x.size()) = x;
  out.params = ScoreParams(sys.basis, full);
  out.condition = opt.estimate_condition ? condition_estimate(A) : std::numeric_limits<double>::quiet_NaN();
  out.ill_conditioned = out.condition > opt.condition_cap;
  return out;
}

FitResult score_match(const MomentVector& m, int r, const FitOptions& opt) {
  return fit_score(assemble_gram(m, r), opt);
}

double sm_objective(const ScoreParams& lambda, const GramSystem& sys) {
  Eigen::VectorXd l = lambda.lambda.tail(sys.A.rows());
  return 0.5 * l.dot(sys.A * l) - sys.b.dot(l);
}

Eigen::VectorXd sm_gradient(const ScoreParams& lambda, const GramSystem& sys) {
  Eigen::VectorXd l = lambda.lambda.tail(sys.A.rows());
  return sys.A * l - sys.b;
}

namespace {

MomentVector shift_moments(const MomentVector& m, const std::vector<double>& mu, double sign) {
  int n = m.n();
  if (static_cast<int>(mu.size()) != n) throw ConfigError("centering: mean dimension mismatch");
  const auto& B = *m.basis;
  Eigen::VectorXd cur = m.values;
  Eigen::VectorXd next(cur.size());
  for (int i = 0; i < n; ++i) {
    double c = sign * mu[static_cast<std::size_t>(i)];
    if (c == 0.0) continue;
    for (std::size_t k = 0; k < B.size(); ++k) {
      MultiIndex a = B[k];
      int ai = a[i];
      double acc = 0.0;
      double binom = 1.0;
      // sum_j C(ai, j) c^(ai-j) m_{a with a_i = j}
      for (int j = ai; j >= 0; --j) {
        a.set(i, j);
        acc += binom * std::pow(c, ai - j) * cur[B.lookup(a)];
        binom = binom * j / (ai - j + 1);
      }
      next[static_cast<long>(k)] = acc;
    }
    cur.swap(next);
  }
  return MomentVector(m.basis, cur);
}

MomentVector apply_scale(const MomentVector& m, const std::vector<double>& s, bool inverse) {
  int n = m.n();
  if (static_cast<int>(s.size()) != n) throw ConfigError("scaling: dimension mismatch");
  for (double v : s)
    if (!(v > 0.0)) throw ConfigError("scale entries must be positive");
  MomentVector out = m;
  for (std::size_t k = 0; k < m.basis->size(); ++k) {
    const MultiIndex& a = (*m.basis)[k];
    double f = 1.0;
    for (int i = 0; i < n; ++i) f *= std::pow(s[static_cast<std::size_t>(i)], a[i]);
    out.values[static_cast<long>(k)] = inverse ? m.values[static_cast<long>(k)] * f : m.values[static_cast<long>(k)] / f;
  }
  return out;
}

}  // namespace

MomentVector center_moments(const MomentVector& raw, const std::vector<double>& mu) {
  return shift_moments(raw, mu, -1.0);
}

MomentVector uncenter_moments(const MomentVector& centered, const std::vector<double>& mu) {
  return shift_moments(centered, mu, 1.0);
}

MomentVector scale_moments(const MomentVector& m, const std::vector<double>& s) { return apply_scale(m, s, false); }
MomentVector unscale_moments(const MomentVector& m, const std::vector<double>& s) { return apply_scale(m, s, true); }

ScoreParams rescale_score(const ScoreParams& lz, const std::vector<double>& s) {
  MomentVector tmp(lz.basis, lz.lambda);
  return ScoreParams(lz.basis, apply_scale(tmp, s, true).values);
}

ScoreParams unscale_score(const ScoreParams& lw, const std::vector<double>& s) {
  MomentVector tmp(lw.basis, lw.lambda);
  return ScoreParams(lw.basis, apply_scale(tmp, s, false).values);
}

std::vector<double> default_scale(const MomentVector& centered, double c) {
  int n = centered.n();
  std::vector<double> s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    MultiIndex a(n);
    a.set(i, 2);
    double v = centered.at(a);
    if (!(v > 0.0) || !std::isfinite(v)) throw SingularGram("non-positive variance in coordinate " + std::to_string(i));
    s[static_cast<std::size_t>(i)] = c * std::sqrt(v);
  }
  return s;
}

}  // namespace skf

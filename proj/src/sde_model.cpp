#include "skf/sde_model.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "skf/error.hpp"

namespace skf {

PolynomialSDE::PolynomialSDE(std::vector<Polynomial> drift, std::vector<Polynomial> diffusion, int n_w)
    : n_(static_cast<int>(drift.size())), n_w_(n_w), drift_(std::move(drift)), diffusion_(std::move(diffusion)) {
  if (n_ < 1) throw ConfigError("SDE needs at least one state");
  if (n_w_ < 0 || diffusion_.size() != static_cast<std::size_t>(n_ * n_w_))
    throw ConfigError("diffusion must be n x n_w");
  for (auto& p : drift_)
    if (p.n() == 0) p = Polynomial(n_);
  for (auto& p : diffusion_)
    if (p.n() == 0) p = Polynomial(n_);
  for (const auto& p : drift_)
    if (p.n() != n_) throw ConfigError("drift polynomial dimension mismatch");
  for (const auto& p : diffusion_)
    if (p.n() != n_) throw ConfigError("diffusion polynomial dimension mismatch");
  tensor_.assign(static_cast<std::size_t>(n_ * n_), Polynomial(n_));
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) {
      Polynomial acc(n_);
      for (int k = 0; k < n_w_; ++k) acc += h(i, k) * h(j, k);
      acc *= 0.5;
      tensor_[static_cast<std::size_t>(i * n_ + j)] = acc;
      tensor_[static_cast<std::size_t>(j * n_ + i)] = acc;
    }
}

int PolynomialSDE::drift_degree() const {
  int d = 0;
  for (const auto& p : drift_) d = std::max(d, p.degree());
  return d;
}

int PolynomialSDE::diffusion_degree() const {
  int d = 0;
  for (const auto& p : diffusion_) d = std::max(d, p.degree());
  return d;
}

Eigen::MatrixXd PolynomialSDE::constant_H() const {
  if (!constant_diffusion()) throw ConfigError("diffusion depends on the state");
  Eigen::MatrixXd M(n_, n_);
  MultiIndex zero(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) M(i, j) = H(i, j).coeff(zero);
  return M;
}

Eigen::MatrixXd PolynomialSDE::h_at(const double* x) const {
  Eigen::MatrixXd M(n_, n_w_);
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < n_w_; ++k) M(i, k) = h(i, k).evaluate(x);
  return M;
}

int excess_degree(const PolynomialSDE& sde) {
  int dx = sde.drift_degree();
  int dh = sde.diffusion_degree();
  bool any_noise = false;
  for (const auto& p : sde.diffusion()) any_noise = any_noise || !p.is_zero();
  int from_noise = any_noise ? 2 * dh - 2 : -2;
  return std::max({dx - 1, from_noise, 0});
}

namespace {

// visit every monomial produced by the generator acting on x^alpha
template <typename Emit>
void generator_terms(const PolynomialSDE& sde, const MultiIndex& alpha, Emit&& emit) {
  int n = sde.n();
  for (int i = 0; i < n; ++i) {
    int ai = alpha[i];
    if (ai == 0) continue;
    MultiIndex base = alpha;
    base.set(i, ai - 1);
    for (const auto& [t, c] : sde.drift(i).terms()) emit(mi_add(base, t), c * ai);
  }
  for (int i = 0; i < n; ++i) {
    if (alpha[i] == 0) continue;
    for (int j = 0; j < n; ++j) {
      int f = alpha[i] * (alpha[j] - (i == j ? 1 : 0));
      if (f <= 0) continue;
      const Polynomial& Hij = sde.H(i, j);
      if (Hij.is_zero()) continue;
      MultiIndex base = alpha;
      base.set(i, base[i] - 1);
      base.set(j, base[j] - 1);
      for (const auto& [t, c] : Hij.terms()) emit(mi_add(base, t), c * f);
    }
  }
}

}  // namespace

Polynomial apply_generator(const PolynomialSDE& sde, const MultiIndex& alpha) {
  if (alpha.size() != sde.n()) throw ConfigError("apply_generator: dimension mismatch");
  Polynomial out(sde.n());
  generator_terms(sde, alpha, [&](const MultiIndex& m, double c) { out.add_term(m, c); });
  return out;
}

MomentOdeOperator::MomentOdeOperator(const PolynomialSDE& sde, int K) : K_(K), dbar_(excess_degree(sde)) {
  if (K < 1) throw ConfigError("moment operator needs K >= 1");
  int n = sde.n();
  tracked_ = enumerate_basis(n, K);
  source_ = enumerate_basis(n, K + dbar_);
  std::set<MultiIndex> targets;
  row_ptr_.reserve(tracked_->size() + 1);
  row_ptr_.push_back(0);
  std::map<std::size_t, double> row;
  for (std::size_t k = 0; k < tracked_->size(); ++k) {
    row.clear();
    generator_terms(sde, (*tracked_)[k], [&](const MultiIndex& m, double c) {
      long j = source_->lookup(m);
      if (j < 0) throw DegreeOverflow("generator term exceeds K + dbar");
      row[static_cast<std::size_t>(j)] += c;
    });
    for (const auto& [j, c] : row) {
      if (c == 0.0) continue;
      col_.push_back(j);
      val_.push_back(c);
      if ((*source_)[j].degree() > K) targets.insert((*source_)[j]);
    }
    row_ptr_.push_back(col_.size());
  }
  targets_.assign(targets.begin(), targets.end());
}

void MomentOdeOperator::evaluate(const Eigen::VectorXd& m_ext, Eigen::VectorXd& dm) const {
  dm.resize(static_cast<long>(tracked_->size()));
  for (std::size_t k = 0; k < tracked_->size(); ++k) {
    double acc = 0.0;
    for (std::size_t p = row_ptr_[k]; p < row_ptr_[k + 1]; ++p) acc += val_[p] * m_ext[static_cast<long>(col_[p])];
    dm[static_cast<long>(k)] = acc;
  }
}

Eigen::VectorXd MomentOdeOperator::evaluate(const Eigen::VectorXd& m_ext) const {
  Eigen::VectorXd dm;
  evaluate(m_ext, dm);
  return dm;
}

PolynomialSDE shift_sde(const PolynomialSDE& sde, const std::vector<double>& mu) {
  std::vector<Polynomial> drift, diff;
  for (const auto& p : sde.drift()) drift.push_back(p.affine_substitute(mu));
  for (const auto& p : sde.diffusion()) diff.push_back(p.affine_substitute(mu));
  return PolynomialSDE(std::move(drift), std::move(diff), sde.n_w());
}

PolynomialSDE center_sde(const PolynomialSDE& sde, const std::vector<double>& mu, const MomentVector& centered) {
  PolynomialSDE shifted = shift_sde(sde, mu);
  int n = sde.n();
  std::vector<Polynomial> drift;
  for (int i = 0; i < n; ++i) {
    Polynomial p = shifted.drift(i);
    double e = p.expectation(centered);
    p.add_term(MultiIndex(n), -e);
    drift.push_back(p);
  }
  return PolynomialSDE(std::move(drift), shifted.diffusion(), sde.n_w());
}

std::vector<double> mean_drift(const PolynomialSDE& sde, const MomentVector& moments) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(sde.n()));
  for (const auto& p : sde.drift()) out.push_back(p.expectation(moments));
  return out;
}

std::vector<Polynomial> drift_jacobian(const PolynomialSDE& sde) {
  int n = sde.n();
  std::vector<Polynomial> J;
  J.reserve(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) J.push_back(sde.drift(i).derivative(j));
  return J;
}

Polynomial drift_divergence(const PolynomialSDE& sde) {
  Polynomial div(sde.n());
  for (int i = 0; i < sde.n(); ++i) div += sde.drift(i).derivative(i);
  return div;
}

}  // namespace skf

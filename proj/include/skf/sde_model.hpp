#pragma once

#include <string>
#include <vector>

#include "skf/polybasis.hpp"
#include "skf/polynomial.hpp"

namespace skf {

// dX = X(x) dt + h(x) dW with polynomial drift and diffusion.
class PolynomialSDE {
 public:
  PolynomialSDE() = default;
  PolynomialSDE(std::vector<Polynomial> drift, std::vector<Polynomial> diffusion, int n_w);

  int n() const { return n_; }
  int n_w() const { return n_w_; }
  const std::vector<Polynomial>& drift() const { return drift_; }
  const Polynomial& drift(int i) const { return drift_[static_cast<std::size_t>(i)]; }
  const Polynomial& h(int i, int k) const { return diffusion_[static_cast<std::size_t>(i * n_w_ + k)]; }
  // H = 1/2 h h^T
  const Polynomial& H(int i, int j) const { return tensor_[static_cast<std::size_t>(i * n_ + j)]; }
  const std::vector<Polynomial>& diffusion() const { return diffusion_; }

  int drift_degree() const;
  int diffusion_degree() const;
  bool constant_diffusion() const { return diffusion_degree() == 0; }
  // constant H as a dense matrix; throws if H depends on x
  Eigen::MatrixXd constant_H() const;
  // noise matrix h at a point
  Eigen::MatrixXd h_at(const double* x) const;

 private:
  int n_ = 0;
  int n_w_ = 0;
  std::vector<Polynomial> drift_;
  std::vector<Polynomial> diffusion_;
  std::vector<Polynomial> tensor_;
};

// max(d_X - 1, 2 d_h - 2), clamped at 0
int excess_degree(const PolynomialSDE& sde);

// A x^alpha = grad(x^alpha) . X + Tr(H hess(x^alpha))
Polynomial apply_generator(const PolynomialSDE& sde, const MultiIndex& alpha);

// Dynkin right-hand side for all tracked moments, precompiled into CSR form
// over a source basis of degree K + dbar.
class MomentOdeOperator {
 public:
  MomentOdeOperator(const PolynomialSDE& sde, int K);

  int K() const { return K_; }
  int excess() const { return dbar_; }
  const BasisPtr& tracked() const { return tracked_; }
  const BasisPtr& source() const { return source_; }
  // generator-requested indices with degree in (K, K + dbar], graded-lex sorted
  const std::vector<MultiIndex>& unclosed_targets() const { return targets_; }

  // m_ext over source(); dm over tracked()
  void evaluate(const Eigen::VectorXd& m_ext, Eigen::VectorXd& dm) const;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& m_ext) const;

  std::size_t nnz() const { return col_.size(); }

 private:
  int K_;
  int dbar_;
  BasisPtr tracked_;
  BasisPtr source_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_;
  std::vector<double> val_;
  std::vector<MultiIndex> targets_;
};

// SDE for z = x - mu: drift X(z + mu), diffusion h(z + mu)
PolynomialSDE shift_sde(const PolynomialSDE& sde, const std::vector<double>& mu);

// shift_sde with E[X] subtracted, so the drift has zero mean under the
// supplied centered moments
PolynomialSDE center_sde(const PolynomialSDE& sde, const std::vector<double>& mu, const MomentVector& centered);

// E[X(x)] with each monomial replaced by its moment
std::vector<double> mean_drift(const PolynomialSDE& sde, const MomentVector& moments);

// symbolic Jacobian dX_i/dx_j
std::vector<Polynomial> drift_jacobian(const PolynomialSDE& sde);

// divergence of the drift as a polynomial
Polynomial drift_divergence(const PolynomialSDE& sde);

}  // namespace skf

#pragma once

#include <vector>

#include "skf/polynomial.hpp"
#include "skf/score_match.hpp"
#include "skf/stein.hpp"

namespace skf {

// z = g(x) + v, v ~ N(0, R)
struct MeasurementModel {
  std::vector<Polynomial> g;
  Eigen::MatrixXd R;

  int n_z() const { return static_cast<int>(g.size()); }
  int degree() const;
  Eigen::VectorXd evaluate(const double* x) const;
  // rows are dg_k/dx_j at x
  Eigen::MatrixXd jacobian(const double* x) const;
  // linear observation of the listed coordinates
  static MeasurementModel select(int n, const std::vector<int>& coords, const Eigen::MatrixXd& R);
};

// Basis coefficients of 1/2 (z - g)^T R^-1 (z - g) written in w, where
// x = mu + s .* w (empty mu/s means identity). Constant term dropped.
ScoreParams likelihood_score_params(const MeasurementModel& model, const Eigen::VectorXd& z, const BasisPtr& basis,
                                    const std::vector<double>& mu = {}, const std::vector<double>& s = {});

ScoreParams conjugate_update(const ScoreParams& prior, const ScoreParams& lik);

struct RecoveryResult {
  MomentVector moments;  // degree K, m_0 = 1
  double residual = 0.0;
  std::size_t rows = 0;
  std::size_t unknowns = 0;
};

RecoveryResult recover_posterior_moments(const ScoreParams& lambda_plus, int K, const RecoveryConfig& cfg = {});

// relative Stein residual of moments m against lambda: ||A(m) l - b(m)|| / ||b(m)||
double stein_projected_residual(const ScoreParams& lambda, const MomentVector& m);

struct RefineOptions {
  int max_iters = 3;
  double tol = 1e-8;
  FitOptions fit;
  RecoveryConfig recovery;
};

struct RefineResult {
  ScoreParams lambda;  // score-matching refit of the final moments
  MomentVector moments;
  std::vector<double> residuals;     // per iteration, projected Stein residual against the target
  std::vector<double> ls_residuals;  // per iteration, least-squares residual of the recovery solve
  int iterations = 0;
  bool converged = false;
};

// Seeks moments whose score-matching fit equals prior + lik, correcting the
// recovery input by the fit defect at every pass.
RefineResult refine_consistency(const ScoreParams& prior, const ScoreParams& lik, int K, const RefineOptions& opt = {});

}  // namespace skf

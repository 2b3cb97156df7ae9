#pragma once

#include <vector>

#include "skf/polybasis.hpp"

namespace skf {

// Natural parameters of p(x) ~ exp(-lambda . phi(x)); lambda[0] is pinned to 0.
struct ScoreParams {
  BasisPtr basis;
  Eigen::VectorXd lambda;

  ScoreParams() = default;
  explicit ScoreParams(BasisPtr b) : basis(std::move(b)), lambda(Eigen::VectorXd::Zero(static_cast<long>(basis->size()))) {}
  ScoreParams(BasisPtr b, Eigen::VectorXd l);

  int r() const { return basis->max_degree(); }
  int n() const { return basis->n(); }
  double at(const MultiIndex& a) const;
  double energy(const double* x) const;
  // -grad energy
  std::vector<double> score(const double* x) const;
};

struct GramSystem {
  BasisPtr basis;     // degree r, constant entry included
  Eigen::MatrixXd A;  // over non-constant entries
  Eigen::VectorXd b;
  int r = 0;
};

struct FitOptions {
  double condition_cap = 1e10;
  double ridge = 0.0;  // off-model; only for experiments
  bool estimate_condition = true;
};

struct FitResult {
  ScoreParams params;
  double condition = 0.0;
  bool ill_conditioned = false;
};

// needs moments through 2r - 2
GramSystem assemble_gram(const MomentVector& m, int r);
FitResult fit_score(const GramSystem& sys, const FitOptions& opt = {});
FitResult score_match(const MomentVector& m, int r, const FitOptions& opt = {});

double sm_objective(const ScoreParams& lambda, const GramSystem& sys);
Eigen::VectorXd sm_gradient(const ScoreParams& lambda, const GramSystem& sys);

// 2-norm condition number of a square matrix; +inf when numerically singular
double condition_estimate(const Eigen::MatrixXd& A);

struct CenteringTransform {
  std::vector<double> mu;
  std::vector<double> scale;
};

MomentVector center_moments(const MomentVector& raw, const std::vector<double>& mu);
MomentVector uncenter_moments(const MomentVector& centered, const std::vector<double>& mu);
MomentVector scale_moments(const MomentVector& m, const std::vector<double>& s);
MomentVector unscale_moments(const MomentVector& m, const std::vector<double>& s);
// z-coordinate lambda -> w = z / s coordinates (density unchanged)
ScoreParams rescale_score(const ScoreParams& lz, const std::vector<double>& s);
ScoreParams unscale_score(const ScoreParams& lw, const std::vector<double>& s);

// s_i = c * sqrt(centered variance_i)
std::vector<double> default_scale(const MomentVector& centered, double c);

}  // namespace skf

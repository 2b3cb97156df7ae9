#pragma once

#include <vector>

#include "skf/sde_model.hpp"
#include "skf/score_match.hpp"
#include "skf/stein.hpp"
#include "skf/update.hpp"

namespace skf {

struct FilterConfig {
  int r = 4;
  double dt_pred = 0.2;
  double dt_ode = 0.005;
  double scale_c = 3.5;
  double blowup = 1e8;
  // Kalman update on the first two moments when posterior recovery returns
  // unrealizable moments; counted in FilterDiagnostics::fallbacks
  bool gaussian_fallback = true;
  ClosureConfig closure;
  RefineOptions refine;
  FitOptions fit;

  int K() const { return 2 * r - 2; }
  void validate() const;
};

struct FilterDiagnostics {
  double condition = 0.0;          // last Gram condition estimate
  double closure_residual = 0.0;   // largest over the last window's substeps
  double recovery_residual = 0.0;  // last refinement's projected Stein residual
  int refine_iterations = 0;
  std::uint64_t factorizations = 0;
  int fallbacks = 0;  // updates that used the Gaussian fallback
};

// Moments are stored about the anchor mu, in w = (x - mu) / s coordinates.
struct FilterState {
  double t = 0.0;
  std::vector<double> mu;
  std::vector<double> scale;
  MomentVector mw;     // degree K
  ScoreParams lambda;  // fitted to mw
  FilterDiagnostics diag;

  int n() const { return static_cast<int>(mu.size()); }
  // centered moments about mu in state units
  MomentVector centered() const;
  MomentVector raw() const;
};

FilterState skf_init(const MomentVector& raw_moments, const FilterConfig& cfg);
FilterState skf_predict(const FilterState& st, const PolynomialSDE& sde, double dt, const FilterConfig& cfg);
FilterState skf_update(const FilterState& st, const MeasurementModel& model, const Eigen::VectorXd& z,
                       const FilterConfig& cfg);

std::vector<double> skf_estimate(const FilterState& st);
Eigen::MatrixXd skf_covariance(const FilterState& st);

struct InfoForm {
  Eigen::MatrixXd Omega;
  Eigen::VectorXd eta;
};
// r = 2 only: precision and information vector in state coordinates
InfoForm info_form_view(const FilterState& st);

// Raw moments of N(mean, cov) through degree K (Isserlis).
MomentVector gaussian_moments(const std::vector<double>& mean, const Eigen::MatrixXd& cov, int K);

}  // namespace skf

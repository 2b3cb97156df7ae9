#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skf/baselines.hpp"
#include "skf/skf.hpp"
#include "skf/systems.hpp"

namespace skf {

extern const char* const kVersion;

// Everything a run needs. Negative numeric fields mean "use the system default".
struct ExperimentConfig {
  std::string kind = "filter";  // "filter" or "moments"
  std::string system = "duffing";
  ParamMap params;
  std::vector<std::string> filters = {"SKF", "EKF", "UKF", "EnKF", "PF"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  int r = -1;
  int steps = -1;
  double dt_pred = -1.0;
  double dt_ode = 0.005;
  double scale_c = 3.5;
  std::string closure = "auto";  // auto, first, standard, extended
  bool active_closure = false;
  int refine_iters = 3;
  double refine_tol = 1e-8;

  std::size_t enkf_members = 500;
  std::size_t pf_particles = 10000;

  double horizon = -1.0;
  double dt_window = -1.0;
  std::size_t mc_particles = 100000;
  double mc_dt = 0.001;
  std::uint64_t mc_seed = 1;

  std::string out_dir;

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const;
  FilterConfig filter_config(const SystemInstance& sys, bool for_moments) const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// unknown keys and wrong types are ConfigErrors
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

RowRange parse_row_range(const std::string& s);

// |skf - mc| / max(|mc|, tau_d), tau_d the RMS magnitude of the degree-d MC moments
struct ScaledError {
  MultiIndex index;
  double skf = 0.0, mc = 0.0, se = 0.0;
  double tau = 0.0;
  double scaled = 0.0;
};
std::vector<ScaledError> scaled_errors(const MomentVector& skf, const MomentVector& mc, const Eigen::VectorXd& mc_se,
                                       int max_degree);
// RMS of scaled errors per degree; entry d is degree d (entries 0 and 1 are zero)
std::vector<double> per_degree_error(const std::vector<ScaledError>& errs, int max_degree);

struct MomentAccuracyReport {
  ExperimentConfig config;
  int r = 0;
  int compare_degree = 4;
  std::vector<double> times;
  std::vector<MomentVector> skf;  // centered, degree K
  std::vector<MomentVector> mc;   // centered, degree K
  std::vector<Eigen::VectorXd> mc_se;
  std::vector<std::vector<double>> degree_error;  // per time, per degree
  std::vector<FilterDiagnostics> diagnostics;
  bool diverged = false;
  double diverged_at = 0.0;
  std::string failure;
  double skf_seconds = 0.0;
  double mc_seconds = 0.0;
};
MomentAccuracyReport run_moment_accuracy(const ExperimentConfig& cfg);

// Filter-harness view of the SKF, also exposing its state for the invariant checks.
class SkfFilter : public Filter {
 public:
  SkfFilter(const PolynomialSDE& sde, const InitialLaw& init, const FilterConfig& cfg);
  std::string name() const override { return "SKF"; }
  void predict(double dt) override;
  void update(const MeasurementModel& model, const Eigen::VectorXd& z) override;
  Eigen::VectorXd mean() const override;
  Eigen::MatrixXd covariance() const override;
  const FilterState& state() const { return st_; }
  const FilterConfig& config() const { return cfg_; }

 private:
  PolynomialSDE sde_;
  FilterConfig cfg_;
  FilterState st_;
};

struct StepRecord {
  int step = 0;
  double time = 0.0;
  Eigen::VectorXd estimate;
  double error = 0.0;  // Euclidean distance to the true state
  double min_cov_eig = 0.0;
  double m0 = 1.0;
  std::optional<FilterDiagnostics> diag;  // SKF only
};

struct FilterRun {
  std::string filter;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  double failed_at = 0.0;
  double rmse = 0.0;  // mean of per-step errors
  double seconds = 0.0;
  std::vector<StepRecord> steps;
};

struct FilterSummary {
  std::string filter;
  double mean = 0.0;
  double std = 0.0;
  int runs = 0;
  int failures = 0;
};

struct FilterComparisonReport {
  ExperimentConfig config;
  int n = 0;
  int steps = 0;
  double dt_pred = 0.0;
  std::map<std::uint64_t, std::vector<Eigen::VectorXd>> truth;  // per seed, states at steps 0..S
  std::map<std::uint64_t, std::vector<Eigen::VectorXd>> measurements;  // per seed, steps 1..S
  std::vector<FilterRun> runs;
  std::vector<FilterSummary> summary;

  const FilterSummary& summary_for(const std::string& filter) const;
};
FilterComparisonReport run_filter_comparison(const ExperimentConfig& cfg);

struct ConeCbfOptions {
  double sigma = 0.5;
  double kappa_cbf = 6.0;
  double horizon = 3.0;
  double dt_ode = 0.005;
  double dt_out = 0.05;
  double init_var = 0.01;  // X0 ~ N(0, init_var)
  std::size_t mc_particles = 100000;
  double mc_dt = 0.001;
  std::uint64_t seed = 1;
  std::vector<int> unconstrained_orders = {4, 6};
  double unconstrained_window = 0.1;
};

struct UnconstrainedRun {
  int r = 0;
  bool diverged = false;
  double t_star = 0.0;
  std::string message;
};

struct ConeCbfReport {
  ConeCbfOptions options;
  double theta_inf = 0.0;
  std::vector<double> times;
  std::vector<std::array<double, 3>> closed;  // (m2, m4, m6)
  std::vector<std::array<double, 3>> mc;
  std::vector<double> barrier;  // s1 s3 - s2^2 on the closed trajectory
  int clamped_steps = 0;
  std::array<double, 3> terminal_rel{};
  std::array<double, 3> rms_rel{};
  double min_barrier = 0.0;
  std::vector<UnconstrainedRun> unconstrained;
};
ConeCbfReport run_cone_cbf_demo(const ConeCbfOptions& opt);

// ---- outputs ----

nlohmann::json report_json(const MomentAccuracyReport& rep);
nlohmann::json report_json(const FilterComparisonReport& rep);
nlohmann::json report_json(const ConeCbfReport& rep);

// long-format CSV, one row per time step per quantity; first line is "# <version>"
std::string moments_csv(const MomentAccuracyReport& rep);
// step,time,filter,seed,rmse,x0..x{n-1}
std::string filter_csv(const FilterComparisonReport& rep);
std::string cone_cbf_csv(const ConeCbfReport& rep);

void write_text(const std::string& path, const std::string& text);

}  // namespace skf

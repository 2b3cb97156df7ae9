#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Sparse>

#include "skf/polybasis.hpp"
#include "skf/score_match.hpp"

namespace skf {

// sum_{alpha_i >= 1} lambda_alpha alpha_i m_{alpha+beta-e_i} = beta_i m_{beta-e_i}
// Returns the left-hand pairs (alpha + beta - e_i, lambda_alpha * alpha_i).
std::vector<std::pair<MultiIndex, double>> stein_lhs_coeffs(const ScoreParams& lambda, const MultiIndex& beta, int i);

enum class SteinMode { Closure, Recovery };
enum class RowRange { FirstLayer, Standard, Extended, Auto };

struct ClosureConfig {
  RowRange range = RowRange::Auto;
  bool active = false;             // unknowns restricted to generator-requested targets
  bool include_zero_rows = false;  // beta_i = 0 rows
  bool carry_higher = false;       // keep degrees above the layer as extra unknowns instead of truncating
  double truncated_weight = 1.0;
};

struct RecoveryConfig {
  int pad_degree = -1;      // extra unknown degrees beyond K; -1 picks automatically
  int max_row_degree = -1;  // largest |beta|; -1 means K + pad - 1
  bool include_zero_rows = true;
  double truncated_weight = 1.0;
  std::size_t unknown_budget = 600;  // auto padding keeps unknowns at or under this
  int max_auto_pad = 8;
};

struct SteinRow {
  MultiIndex beta;
  int i = 0;
  bool truncated = false;
};

struct SteinSystem {
  SteinMode mode = SteinMode::Closure;
  std::vector<SteinRow> rows;
  std::vector<MultiIndex> columns;
  BasisPtr known;  // moments folded into the right-hand side
  Eigen::SparseMatrix<double, Eigen::RowMajor> lhs;
  Eigen::SparseMatrix<double, Eigen::RowMajor> rhs_map;  // rhs = rhs_map * known values
  std::size_t truncated_rows = 0;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_unknowns() const { return columns.size(); }
  Eigen::VectorXd rhs(const Eigen::VectorXd& known_values) const { return rhs_map * known_values; }
};

struct SolveResult {
  Eigen::VectorXd values;  // per column
  double residual = 0.0;   // ||lhs x - rhs||_2
  long rank = 0;
};

// Closure for unknowns of degree known_degree + 1. Rows come from the
// configured |beta| range shifted by (layer - 1).
SteinSystem build_closure_system(const ScoreParams& lambda, int known_degree, const std::vector<MultiIndex>& targets,
                                 const ClosureConfig& cfg, int layer = 1);

// Full-degree target list for unknown degree d.
std::vector<MultiIndex> full_targets(int n, int d);

// Recovery of all moments 1 <= |alpha| <= K + pad from lambda alone.
SteinSystem build_recovery_system(const ScoreParams& lambda, int K, const RecoveryConfig& cfg);
int recovery_pad(int n, int K, const RecoveryConfig& cfg);

// Column-pivoted Householder QR, built once and reused for any rhs.
class FactorCache {
 public:
  explicit FactorCache(SteinSystem sys);

  const SteinSystem& system() const { return sys_; }
  long rank() const { return rank_; }
  SolveResult solve(const Eigen::VectorXd& known_values) const;

  static std::uint64_t factorizations() { return counter_.load(); }

 private:
  SteinSystem sys_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::MatrixXd dense_;
  long rank_ = 0;
  static std::atomic<std::uint64_t> counter_;
};

SolveResult solve_closure(const SteinSystem& sys, const Eigen::VectorXd& known_values);

// Cached multi-layer closure: layer j solves degree K + j from degree <= K + j - 1.
class LayeredClosure {
 public:
  LayeredClosure(const ScoreParams& lambda, int K, int dbar, const ClosureConfig& cfg,
                 const std::vector<MultiIndex>& active_targets = {});

  int K() const { return K_; }
  int layers() const { return static_cast<int>(layers_.size()); }
  const BasisPtr& extended() const { return extended_; }
  const FactorCache& layer(int j) const { return layers_[static_cast<std::size_t>(j)]; }
  // tracked moments (degree K) -> extended vector (degree K + dbar)
  Eigen::VectorXd close(const Eigen::VectorXd& tracked, double* residual = nullptr) const;

 private:
  int K_;
  BasisPtr extended_;
  std::vector<FactorCache> layers_;
  std::vector<std::vector<long>> column_slots_;  // per layer: column -> extended ordinal
  std::vector<BasisPtr> known_bases_;
};

MomentVector layered_closure(const ScoreParams& lambda, const MomentVector& tracked, int dbar, const ClosureConfig& cfg);

RowRange resolve_row_range(int n, int r, const ClosureConfig& cfg);

enum class CountMode { FirstLayer, Standard, Extended };
struct SystemCount {
  std::uint64_t rows = 0;
  std::uint64_t unknowns = 0;
  double ratio = 0.0;
};
SystemCount count_system(int n, int r, CountMode mode);

// ---- 1-D double-well factor, closure of the eighth moment ----

struct ConeCbf1dState {
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;  // E[x^2], E[x^4], E[x^6]
  double sigma = 0.5;
  double kappa_cbf = 6.0;
  double theta_inf = 0.0;
};

struct ConeCbfResult {
  double u = 0.0;        // closed E[x^8]
  double lower = 0.0;    // Hankel bound
  double upper = 0.0;    // barrier bound
  bool clamped = false;  // upper fell below lower
};

// even-moment dynamics ds/dt = A s + B u + c
struct DwEvenDynamics {
  Eigen::Matrix3d A;
  Eigen::Vector3d B;
  Eigen::Vector3d c;
};
DwEvenDynamics dw_even_dynamics(double sigma);

ConeCbfResult cone_cbf_closure_1d(const ConeCbf1dState& st);
double hankel_lower_bound(double s1, double s2, double s3);
double barrier_upper_bound(double s1, double s2, double s3, double sigma, double kappa_cbf);

struct StationaryMoments {
  double m2 = 0, m4 = 0, m6 = 0, m8 = 0;
};
// moments of p(x) ~ exp((x^2 - x^4/2) / sigma^2) by adaptive quadrature
StationaryMoments dw_stationary_moments(double sigma);
double calibrate_theta_inf(double sigma, double kappa_cbf);

}  // namespace skf

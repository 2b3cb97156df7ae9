#include "skf/stein.hpp"

#include <algorithm>
#include <cmath>

#include "skf/error.hpp"

namespace skf {

std::atomic<std::uint64_t> FactorCache::counter_{0};

std::vector<std::pair<MultiIndex, double>> stein_lhs_coeffs(const ScoreParams& lambda, const MultiIndex& beta, int i) {
  std::vector<std::pair<MultiIndex, double>> out;
  const auto& B = *lambda.basis;
  for (std::size_t k = 1; k < B.size(); ++k) {
    const MultiIndex& a = B[k];
    if (a[i] == 0) continue;
    MultiIndex g = mi_add(a, beta);
    g.set(i, g[i] - 1);
    out.emplace_back(g, lambda.lambda[static_cast<long>(k)] * a[i]);
  }
  return out;
}

std::vector<MultiIndex> full_targets(int n, int d) { return enumerate_exact_degree(n, d); }

RowRange resolve_row_range(int n, int r, const ClosureConfig& cfg) {
  if (cfg.range != RowRange::Auto) return cfg.range;
  // The first layer alone leans entirely on the top-degree coefficients, which
  // vanish for near-Gaussian fits, so it is never picked automatically.
  SystemCount std_count = count_system(n, std::max(r, 2), CountMode::Standard);
  return std_count.rows >= std_count.unknowns ? RowRange::Standard : RowRange::Extended;
}

namespace {

using Triplet = Eigen::Triplet<double>;

struct RowBuilder {
  // classify each moment appearing in a row
  const DegreeBasis* known;
  const std::unordered_map<MultiIndex, long, MultiIndexHash>* cols;
  std::vector<Triplet> lhs, rhs;
  std::vector<SteinRow> rows;
  std::size_t truncated = 0;
  double trunc_weight = 1.0;

  // returns false if the row has no unknown entries
  bool add(const MultiIndex& beta, int i, const std::vector<std::pair<MultiIndex, double>>& terms) {
    std::vector<std::pair<long, double>> l, r;
    bool trunc = false;
    auto place = [&](const MultiIndex& g, double c) {
      if (c == 0.0) return;
      long k = known->lookup(g);
      if (k >= 0) {
        r.emplace_back(k, -c);
        return;
      }
      auto it = cols->find(g);
      if (it != cols->end()) {
        l.emplace_back(it->second, c);
        return;
      }
      trunc = true;
    };
    for (const auto& [g, c] : terms) place(g, c);
    if (beta[i] >= 1) {
      MultiIndex g = beta;
      g.set(i, beta[i] - 1);
      place(g, -static_cast<double>(beta[i]));
    }
    if (l.empty()) return false;
    double w = trunc ? trunc_weight : 1.0;
    long row = static_cast<long>(rows.size());
    for (auto [c, v] : l) lhs.emplace_back(row, c, v * w);
    for (auto [c, v] : r) rhs.emplace_back(row, c, v * w);
    rows.push_back({beta, i, trunc});
    if (trunc) ++truncated;
    return true;
  }
};

void finish(SteinSystem& sys, RowBuilder& rb) {
  sys.rows = std::move(rb.rows);
  sys.truncated_rows = rb.truncated;
  sys.lhs.resize(static_cast<long>(sys.rows.size()), static_cast<long>(sys.columns.size()));
  sys.lhs.setFromTriplets(rb.lhs.begin(), rb.lhs.end());
  sys.rhs_map.resize(static_cast<long>(sys.rows.size()), static_cast<long>(sys.known->size()));
  sys.rhs_map.setFromTriplets(rb.rhs.begin(), rb.rhs.end());
}

}  // namespace

SteinSystem build_closure_system(const ScoreParams& lambda, int known_degree, const std::vector<MultiIndex>& targets,
                                 const ClosureConfig& cfg, int layer) {
  int n = lambda.n();
  int r = lambda.r();
  if (targets.empty()) throw UnderdeterminedSystem("closure has no unclosed targets");
  int K = 2 * r - 2;
  int lo = r, hi = K;
  switch (resolve_row_range(n, r, cfg)) {
    case RowRange::FirstLayer: hi = r; break;
    case RowRange::Standard: hi = K; break;
    case RowRange::Extended: hi = K + 1; break;
    case RowRange::Auto: break;
  }
  lo += layer - 1;
  hi += layer - 1;

  SteinSystem sys;
  sys.mode = SteinMode::Closure;
  sys.known = enumerate_basis(n, known_degree);
  sys.columns = targets;
  std::unordered_map<MultiIndex, long, MultiIndexHash> cols;
  for (std::size_t k = 0; k < targets.size(); ++k) cols.emplace(targets[k], static_cast<long>(k));

  std::vector<std::vector<std::pair<MultiIndex, double>>> row_terms;
  std::vector<std::pair<MultiIndex, int>> row_keys;
  for (int d = lo; d <= hi; ++d)
    for (const auto& beta : enumerate_exact_degree(n, d))
      for (int i = 0; i < n; ++i) {
        if (beta[i] == 0 && !cfg.include_zero_rows) continue;
        row_keys.emplace_back(beta, i);
      }
  if (cfg.carry_higher) {
    // every moment above the known degree becomes an unknown
    std::vector<MultiIndex> extra;
    for (const auto& [beta, i] : row_keys)
      for (const auto& [g, c] : stein_lhs_coeffs(lambda, beta, i))
        if (c != 0.0 && g.degree() > known_degree && !cols.count(g)) {
          cols.emplace(g, static_cast<long>(sys.columns.size()));
          sys.columns.push_back(g);
        }
  }
  RowBuilder rb{sys.known.get(), &cols, {}, {}, {}, 0, cfg.truncated_weight};
  for (const auto& [beta, i] : row_keys) rb.add(beta, i, stein_lhs_coeffs(lambda, beta, i));
  finish(sys, rb);
  if (sys.n_rows() < sys.n_unknowns())
    throw UnderdeterminedSystem("closure system has " + std::to_string(sys.n_rows()) + " rows for " +
                                std::to_string(sys.n_unknowns()) + " unknowns");
  return sys;
}

int recovery_pad(int n, int K, const RecoveryConfig& cfg) {
  if (cfg.pad_degree >= 0) return cfg.pad_degree;
  int pad = 0;
  for (int p = 1; p <= cfg.max_auto_pad; ++p) {
    std::uint64_t u = binomial(static_cast<std::uint64_t>(n + K + p), static_cast<std::uint64_t>(n)) - 1;
    if (u > cfg.unknown_budget) break;
    pad = p;
  }
  return pad;
}

SteinSystem build_recovery_system(const ScoreParams& lambda, int K, const RecoveryConfig& cfg) {
  int n = lambda.n();
  // a quadratic energy closes the recursion exactly, so padding buys nothing
  int energy_degree = 0;
  for (std::size_t k = 1; k < lambda.basis->size(); ++k)
    if (lambda.lambda[static_cast<long>(k)] != 0.0) energy_degree = std::max(energy_degree, (*lambda.basis)[k].degree());
  int pad = cfg.pad_degree < 0 && energy_degree <= 2 ? 0 : recovery_pad(n, K, cfg);
  int D = K + pad;
  int Lmax = cfg.max_row_degree >= 0 ? cfg.max_row_degree : D - 1;
  SteinSystem sys;
  sys.mode = SteinMode::Recovery;
  sys.known = enumerate_basis(n, 0);
  BasisPtr all = enumerate_basis(n, D);
  std::unordered_map<MultiIndex, long, MultiIndexHash> cols;
  for (std::size_t k = 1; k < all->size(); ++k) {
    cols.emplace((*all)[k], static_cast<long>(k - 1));
    sys.columns.push_back((*all)[k]);
  }
  RowBuilder rb{sys.known.get(), &cols, {}, {}, {}, 0, cfg.truncated_weight};
  for (int d = 0; d <= Lmax; ++d)
    for (const auto& beta : enumerate_exact_degree(n, d))
      for (int i = 0; i < n; ++i) {
        if (beta[i] == 0 && !cfg.include_zero_rows) continue;
        rb.add(beta, i, stein_lhs_coeffs(lambda, beta, i));
      }
  finish(sys, rb);
  if (sys.n_rows() < sys.n_unknowns())
    throw UnderdeterminedSystem("recovery system has " + std::to_string(sys.n_rows()) + " rows for " +
                                std::to_string(sys.n_unknowns()) + " unknowns");
  return sys;
}

FactorCache::FactorCache(SteinSystem sys) : sys_(std::move(sys)) {
  dense_ = Eigen::MatrixXd(sys_.lhs);
  // pivots below 1e-10 of the largest are treated as zero: the solve would
  // otherwise return roundoff-amplified values with a tiny residual
  qr_.setThreshold(1e-10);
  qr_.compute(dense_);
  ++counter_;
  rank_ = qr_.rank();
  if (rank_ < dense_.cols())
    throw RankDeficient("Stein system rank " + std::to_string(rank_) + " < " + std::to_string(dense_.cols()) +
                            " unknowns",
                        rank_, dense_.cols());
}

SolveResult FactorCache::solve(const Eigen::VectorXd& known_values) const {
  if (static_cast<std::size_t>(known_values.size()) != sys_.known->size())
    throw ConfigError("closure solve: known vector has wrong size");
  Eigen::VectorXd rhs = sys_.rhs(known_values);
  SolveResult out;
  out.values = qr_.solve(rhs);
  out.residual = (dense_ * out.values - rhs).norm();
  out.rank = rank_;
  return out;
}

SolveResult solve_closure(const SteinSystem& sys, const Eigen::VectorXd& known_values) {
  return FactorCache(sys).solve(known_values);
}

LayeredClosure::LayeredClosure(const ScoreParams& lambda, int K, int dbar, const ClosureConfig& cfg,
                               const std::vector<MultiIndex>& active_targets)
    : K_(K) {
  int n = lambda.n();
  extended_ = enumerate_basis(n, K + dbar);
  for (int j = 1; j <= dbar; ++j) {
    std::vector<MultiIndex> targets;
    if (cfg.active) {
      for (const auto& t : active_targets)
        if (t.degree() == K + j) targets.push_back(t);
    } else {
      targets = full_targets(n, K + j);
    }
    if (targets.empty()) continue;
    known_bases_.push_back(enumerate_basis(n, K + j - 1));
    try {
      layers_.emplace_back(build_closure_system(lambda, K + j - 1, targets, cfg, j));
    } catch (const RankDeficient&) {
      // directional rows never reach squarefree targets when the energy has no
      // cross terms (n > K); the beta_i = 0 rows do
      if (cfg.include_zero_rows) throw;
      ClosureConfig wide = cfg;
      wide.include_zero_rows = true;
      layers_.emplace_back(build_closure_system(lambda, K + j - 1, targets, wide, j));
    }
    std::vector<long> slots;
    for (const auto& c : layers_.back().system().columns) slots.push_back(extended_->lookup(c));
    column_slots_.push_back(std::move(slots));
  }
}

Eigen::VectorXd LayeredClosure::close(const Eigen::VectorXd& tracked, double* residual) const {
  Eigen::VectorXd ext = Eigen::VectorXd::Zero(static_cast<long>(extended_->size()));
  ext.head(tracked.size()) = tracked;
  double res2 = 0.0;
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    long nk = static_cast<long>(known_bases_[j]->size());
    SolveResult s = layers_[j].solve(ext.head(nk));
    res2 += s.residual * s.residual;
    const auto& slots = column_slots_[j];
    for (std::size_t c = 0; c < slots.size(); ++c)
      if (slots[c] >= 0 && (*extended_)[static_cast<std::size_t>(slots[c])].degree() == K_ + static_cast<int>(j) + 1)
        ext[slots[c]] = s.values[static_cast<long>(c)];
  }
  if (residual) *residual = std::sqrt(res2);
  return ext;
}

MomentVector layered_closure(const ScoreParams& lambda, const MomentVector& tracked, int dbar, const ClosureConfig& cfg) {
  int K = tracked.degree();
  if (dbar <= 0) return tracked;
  LayeredClosure lc(lambda, K, dbar, cfg);
  return MomentVector(lc.extended(), lc.close(tracked.values));
}

SystemCount count_system(int n, int r, CountMode mode) {
  if (n < 1 || r < 2) throw ConfigError("count_system: need n >= 1, r >= 2");
  int jmax = mode == CountMode::FirstLayer ? 0 : (mode == CountMode::Standard ? r - 2 : r - 1);
  SystemCount c;
  auto un = static_cast<std::uint64_t>(n);
  for (int j = 0; j <= jmax; ++j)
    c.rows += un * binomial(static_cast<std::uint64_t>(r + j + n - 2), un - 1);
  c.unknowns = binomial(static_cast<std::uint64_t>(2 * r + n - 2), un - 1);
  c.ratio = static_cast<double>(c.rows) / static_cast<double>(c.unknowns);
  return c;
}

}  // namespace skf

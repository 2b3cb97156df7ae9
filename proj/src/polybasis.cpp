#include "skf/polybasis.hpp"

#include <algorithm>
#include <sstream>

#include "skf/error.hpp"

namespace skf {

MultiIndex::MultiIndex(std::initializer_list<int> exps) {
  e_.reserve(exps.size());
  for (int v : exps) {
    if (v < 0 || v > 255) throw ConfigError("multi-index exponent out of range");
    e_.push_back(static_cast<std::uint8_t>(v));
  }
}

MultiIndex::MultiIndex(const std::vector<int>& exps) {
  e_.reserve(exps.size());
  for (int v : exps) {
    if (v < 0 || v > 255) throw ConfigError("multi-index exponent out of range");
    e_.push_back(static_cast<std::uint8_t>(v));
  }
}

void MultiIndex::set(int i, int v) {
  if (v < 0 || v > 255) throw ConfigError("multi-index exponent out of range");
  e_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
}

int MultiIndex::degree() const {
  int d = 0;
  for (auto v : e_) d += v;
  return d;
}

MultiIndex MultiIndex::unit(int n, int i) {
  MultiIndex u(n);
  u.set(i, 1);
  return u;
}

bool MultiIndex::operator<(const MultiIndex& o) const {
  int da = degree(), db = o.degree();
  if (da != db) return da < db;
  return e_ < o.e_;
}

std::string MultiIndex::str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < e_.size(); ++i) {
    if (i) os << ',';
    os << int(e_[i]);
  }
  os << ')';
  return os.str();
}

std::size_t MultiIndexHash::operator()(const MultiIndex& a) const noexcept {
  // FNV-1a over the exponent bytes
  std::size_t h = 1469598103934665603ull;
  for (auto v : a.raw()) {
    h ^= v;
    h *= 1099511628211ull;
  }
  return h;
}

MultiIndex mi_add(const MultiIndex& a, const MultiIndex& b) {
  if (a.size() != b.size()) throw ConfigError("mi_add: length mismatch");
  MultiIndex c(a.size());
  for (int i = 0; i < a.size(); ++i) c.set(i, a[i] + b[i]);
  return c;
}

std::optional<MultiIndex> mi_sub(const MultiIndex& a, const MultiIndex& b) {
  if (a.size() != b.size()) throw ConfigError("mi_sub: length mismatch");
  MultiIndex c(a.size());
  for (int i = 0; i < a.size(); ++i) {
    int v = a[i] - b[i];
    if (v < 0) return std::nullopt;
    c.set(i, v);
  }
  return c;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  unsigned __int128 acc = 1;
  for (std::uint64_t j = 1; j <= k; ++j) {
    acc = acc * (n - k + j) / j;  // exact: acc*C stays an integer at every step
    if (acc > static_cast<unsigned __int128>(UINT64_MAX))
      throw ConfigError("binomial coefficient overflows 64 bits");
  }
  return static_cast<std::uint64_t>(acc);
}

namespace {

void fill_degree(int n, int d, int pos, std::vector<int>& cur, std::vector<MultiIndex>& out) {
  if (pos == n - 1) {
    cur[static_cast<std::size_t>(pos)] = d;
    out.emplace_back(cur);
    return;
  }
  for (int v = 0; v <= d; ++v) {
    cur[static_cast<std::size_t>(pos)] = v;
    fill_degree(n, d - v, pos + 1, cur, out);
  }
}

}  // namespace

std::vector<MultiIndex> enumerate_exact_degree(int n, int d) {
  if (n < 1 || d < 0) throw ConfigError("enumerate_exact_degree: need n >= 1, d >= 0");
  std::vector<MultiIndex> out;
  out.reserve(binomial(static_cast<std::uint64_t>(d + n - 1), static_cast<std::uint64_t>(n - 1)));
  std::vector<int> cur(static_cast<std::size_t>(n), 0);
  fill_degree(n, d, 0, cur, out);
  return out;
}

DegreeBasis::DegreeBasis(int n, int max_degree) : n_(n), max_degree_(max_degree) {
  if (n < 1 || max_degree < 0) throw ConfigError("enumerate_basis: need n >= 1, r >= 0");
  std::uint64_t total = binomial(static_cast<std::uint64_t>(n + max_degree), static_cast<std::uint64_t>(n));
  if (total > (1ull << 28)) throw ConfigError("basis too large to materialize");
  int top = n + max_degree + 1;
  choose_.assign(static_cast<std::size_t>(top + 1), std::vector<std::uint64_t>(static_cast<std::size_t>(top + 1), 0));
  for (int a = 0; a <= top; ++a)
    for (int b = 0; b <= a; ++b) choose_[a][b] = binomial(static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b));
  entries_.reserve(total);
  offsets_.reserve(static_cast<std::size_t>(max_degree + 2));
  for (int d = 0; d <= max_degree; ++d) {
    offsets_.push_back(entries_.size());
    auto block = enumerate_exact_degree(n, d);
    entries_.insert(entries_.end(), block.begin(), block.end());
  }
  offsets_.push_back(entries_.size());
}

std::size_t DegreeBasis::degree_begin(int d) const {
  if (d < 0) return 0;
  if (d > max_degree_ + 1) d = max_degree_ + 1;
  return offsets_[static_cast<std::size_t>(d)];
}

long DegreeBasis::lookup(const MultiIndex& alpha) const {
  if (alpha.size() != n_) throw ConfigError("lookup: dimension mismatch");
  int d = alpha.degree();
  if (d > max_degree_) return -1;
  // rank within the degree block: count lex-smaller compositions of d
  std::uint64_t rank = 0;
  int rem = d;
  for (int j = 0; j < n_ - 1; ++j) {
    int parts = n_ - j - 1;
    for (int v = 0; v < alpha[j]; ++v) {
      int s = rem - v;
      rank += choose_[static_cast<std::size_t>(s + parts - 1)][static_cast<std::size_t>(parts - 1)];
    }
    rem -= alpha[j];
  }
  return static_cast<long>(offsets_[static_cast<std::size_t>(d)] + rank);
}

BasisPtr enumerate_basis(int n, int r) { return std::make_shared<const DegreeBasis>(n, r); }

MomentVector::MomentVector(BasisPtr b) : basis(std::move(b)), values(Eigen::VectorXd::Zero(static_cast<long>(basis->size()))) {
  values[0] = 1.0;
}

MomentVector::MomentVector(BasisPtr b, Eigen::VectorXd v) : basis(std::move(b)), values(std::move(v)) {
  if (static_cast<std::size_t>(values.size()) != basis->size()) throw ConfigError("MomentVector: size mismatch");
}

double MomentVector::at(const MultiIndex& a) const {
  long k = basis->lookup(a);
  if (k < 0) throw ConfigError("moment " + a.str() + " not stored");
  return values[k];
}

double& MomentVector::at(const MultiIndex& a) {
  long k = basis->lookup(a);
  if (k < 0) throw ConfigError("moment " + a.str() + " not stored");
  return values[k];
}

MomentVector MomentVector::truncated(int K) const {
  MomentVector out(enumerate_basis(n(), K));
  for (std::size_t k = 0; k < out.basis->size(); ++k) {
    long j = basis->lookup((*out.basis)[k]);
    out.values[static_cast<long>(k)] = j >= 0 ? values[j] : 0.0;
  }
  return out;
}

std::vector<double> MomentVector::mean() const {
  std::vector<double> mu(static_cast<std::size_t>(n()));
  for (int i = 0; i < n(); ++i) mu[static_cast<std::size_t>(i)] = at(MultiIndex::unit(n(), i));
  return mu;
}

Eigen::MatrixXd MomentVector::covariance() const {
  int d = n();
  auto mu = mean();
  Eigen::MatrixXd P(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      MultiIndex a = mi_add(MultiIndex::unit(d, i), MultiIndex::unit(d, j));
      P(i, j) = at(a) - mu[static_cast<std::size_t>(i)] * mu[static_cast<std::size_t>(j)];
    }
  return P;
}

}  // namespace skf

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace skf {

// Exponent vector alpha in N^n.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(int n) : e_(static_cast<std::size_t>(n), 0) {}
  MultiIndex(std::initializer_list<int> exps);
  explicit MultiIndex(const std::vector<int>& exps);

  int size() const { return static_cast<int>(e_.size()); }
  int operator[](int i) const { return e_[static_cast<std::size_t>(i)]; }
  void set(int i, int v);
  int degree() const;

  static MultiIndex unit(int n, int i);

  bool operator==(const MultiIndex& o) const { return e_ == o.e_; }
  bool operator!=(const MultiIndex& o) const { return e_ != o.e_; }
  // graded lexicographic: degree first, then exponents ascending
  bool operator<(const MultiIndex& o) const;

  std::string str() const;
  const std::vector<std::uint8_t>& raw() const { return e_; }

 private:
  std::vector<std::uint8_t> e_;
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& a) const noexcept;
};

MultiIndex mi_add(const MultiIndex& a, const MultiIndex& b);
// Absent when any entry would go negative.
std::optional<MultiIndex> mi_sub(const MultiIndex& a, const MultiIndex& b);

// Exact binomial in 64 bits; throws ConfigError on overflow.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

// All multi-indices of degree exactly d, lex ascending.
std::vector<MultiIndex> enumerate_exact_degree(int n, int d);

// Graded-lex basis {|alpha| <= max_degree}. Lookup is a combinatorial rank,
// so no hash table is needed even at n = 40.
class DegreeBasis {
 public:
  DegreeBasis(int n, int max_degree);

  int n() const { return n_; }
  int max_degree() const { return max_degree_; }
  std::size_t size() const { return entries_.size(); }
  const MultiIndex& operator[](std::size_t k) const { return entries_[k]; }
  const std::vector<MultiIndex>& entries() const { return entries_; }

  // ordinal of alpha, or -1 if its degree exceeds max_degree
  long lookup(const MultiIndex& alpha) const;
  // first ordinal of degree d (d may be max_degree+1 to get the end)
  std::size_t degree_begin(int d) const;

 private:
  int n_;
  int max_degree_;
  std::vector<MultiIndex> entries_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<std::uint64_t>> choose_;  // choose_[a][b]
};

using BasisPtr = std::shared_ptr<const DegreeBasis>;

BasisPtr enumerate_basis(int n, int r);

// m_alpha = E[x^alpha] for every entry of a degree-K basis.
struct MomentVector {
  BasisPtr basis;
  Eigen::VectorXd values;

  MomentVector() = default;
  explicit MomentVector(BasisPtr b);
  MomentVector(BasisPtr b, Eigen::VectorXd v);

  int n() const { return basis->n(); }
  int degree() const { return basis->max_degree(); }
  double at(const MultiIndex& a) const;
  double& at(const MultiIndex& a);
  bool has(const MultiIndex& a) const { return basis->lookup(a) >= 0; }
  // copy restricted (or zero-extended) to degree K
  MomentVector truncated(int K) const;
  std::vector<double> mean() const;
  Eigen::MatrixXd covariance() const;
};

}  // namespace skf

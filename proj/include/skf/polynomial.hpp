#pragma once

#include <map>
#include <vector>

#include "skf/polybasis.hpp"

namespace skf {

// Sparse multivariate polynomial, terms keyed in graded-lex order.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(int n) : n_(n) {}

  static Polynomial constant(int n, double c);
  static Polynomial variable(int n, int i, double c = 1.0);
  static Polynomial monomial(const MultiIndex& a, double c);

  int n() const { return n_; }
  // 0 for the zero polynomial
  int degree() const;
  bool is_zero() const { return terms_.empty(); }
  const std::map<MultiIndex, double>& terms() const { return terms_; }
  double coeff(const MultiIndex& a) const;

  void add_term(const MultiIndex& a, double c);

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

  Polynomial derivative(int i) const;
  double evaluate(const double* x) const;
  double evaluate(const std::vector<double>& x) const { return evaluate(x.data()); }

  // p(mu + s .* w) as a polynomial in w; empty s means unit scale
  Polynomial affine_substitute(const std::vector<double>& mu, const std::vector<double>& s = {}) const;

  // sum_alpha c_alpha m_alpha; throws when a needed moment is not stored
  double expectation(const MomentVector& m) const;

 private:
  int n_ = 0;
  std::map<MultiIndex, double> terms_;
};

}  // namespace skf

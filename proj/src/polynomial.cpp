#include "skf/polynomial.hpp"

#include <cmath>

#include "skf/error.hpp"

namespace skf {

Polynomial Polynomial::constant(int n, double c) {
  Polynomial p(n);
  p.add_term(MultiIndex(n), c);
  return p;
}

Polynomial Polynomial::variable(int n, int i, double c) {
  Polynomial p(n);
  p.add_term(MultiIndex::unit(n, i), c);
  return p;
}

Polynomial Polynomial::monomial(const MultiIndex& a, double c) {
  Polynomial p(a.size());
  p.add_term(a, c);
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [a, c] : terms_) d = std::max(d, a.degree());
  return d;
}

double Polynomial::coeff(const MultiIndex& a) const {
  auto it = terms_.find(a);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const MultiIndex& a, double c) {
  if (a.size() != n_) throw ConfigError("polynomial term dimension mismatch");
  if (c == 0.0) return;
  auto [it, fresh] = terms_.emplace(a, c);
  if (!fresh) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (n_ == 0) n_ = o.n_;
  for (const auto& [a, c] : o.terms_) add_term(a, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (n_ == 0) n_ = o.n_;
  for (const auto& [a, c] : o.terms_) add_term(a, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [a, c] : terms_) c *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.n_ != b.n_) throw ConfigError("polynomial product dimension mismatch");
  Polynomial out(a.n_);
  for (const auto& [ea, ca] : a.terms_)
    for (const auto& [eb, cb] : b.terms_) out.add_term(mi_add(ea, eb), ca * cb);
  return out;
}

Polynomial Polynomial::derivative(int i) const {
  Polynomial out(n_);
  for (const auto& [a, c] : terms_) {
    if (a[i] == 0) continue;
    MultiIndex b = a;
    b.set(i, a[i] - 1);
    out.add_term(b, c * a[i]);
  }
  return out;
}

double Polynomial::evaluate(const double* x) const {
  double acc = 0.0;
  for (const auto& [a, c] : terms_) {
    double t = c;
    for (int i = 0; i < n_; ++i)
      for (int k = 0; k < a[i]; ++k) t *= x[i];
    acc += t;
  }
  return acc;
}

Polynomial Polynomial::affine_substitute(const std::vector<double>& mu, const std::vector<double>& s) const {
  if (static_cast<int>(mu.size()) != n_) throw ConfigError("affine_substitute: mu dimension mismatch");
  Polynomial out(n_);
  for (const auto& [a, c] : terms_) {
    // expand prod_i (mu_i + s_i w_i)^{a_i} one coordinate at a time
    std::map<MultiIndex, double> acc{{MultiIndex(n_), c}};
    for (int i = 0; i < n_; ++i) {
      int ai = a[i];
      if (ai == 0) continue;
      double si = s.empty() ? 1.0 : s[static_cast<std::size_t>(i)];
      double mi = mu[static_cast<std::size_t>(i)];
      std::map<MultiIndex, double> next;
      for (const auto& [e, v] : acc) {
        double binom = 1.0;
        for (int k = 0; k <= ai; ++k) {
          // C(ai,k) * s^k * mu^(ai-k)
          double w = v * binom * std::pow(si, k) * std::pow(mi, ai - k);
          if (w != 0.0) {
            MultiIndex f = e;
            f.set(i, k);
            next[f] += w;
          }
          binom = binom * (ai - k) / (k + 1);
        }
      }
      acc.swap(next);
    }
    for (const auto& [e, v] : acc) out.add_term(e, v);
  }
  return out;
}

double Polynomial::expectation(const MomentVector& m) const {
  double acc = 0.0;
  for (const auto& [a, c] : terms_) {
    long k = m.basis->lookup(a);
    if (k < 0) throw ConfigError("expectation needs moment " + a.str());
    acc += c * m.values[k];
  }
  return acc;
}

}  // namespace skf

#include "skf/update.hpp"

#include <cmath>

#include "skf/error.hpp"

namespace skf {

int MeasurementModel::degree() const {
  int d = 0;
  for (const auto& p : g) d = std::max(d, p.degree());
  return d;
}

Eigen::VectorXd MeasurementModel::evaluate(const double* x) const {
  Eigen::VectorXd out(n_z());
  for (int k = 0; k < n_z(); ++k) out[k] = g[static_cast<std::size_t>(k)].evaluate(x);
  return out;
}

Eigen::MatrixXd MeasurementModel::jacobian(const double* x) const {
  int n = g.empty() ? 0 : g[0].n();
  Eigen::MatrixXd J(n_z(), n);
  for (int k = 0; k < n_z(); ++k)
    for (int j = 0; j < n; ++j) J(k, j) = g[static_cast<std::size_t>(k)].derivative(j).evaluate(x);
  return J;
}

MeasurementModel MeasurementModel::select(int n, const std::vector<int>& coords, const Eigen::MatrixXd& R) {
  MeasurementModel m;
  for (int c : coords) {
    if (c < 0 || c >= n) throw ConfigError("observed coordinate out of range");
    m.g.push_back(Polynomial::variable(n, c));
  }
  if (R.rows() != static_cast<long>(coords.size()) || R.cols() != R.rows())
    throw ConfigError("measurement noise covariance has wrong shape");
  m.R = R;
  return m;
}

ScoreParams likelihood_score_params(const MeasurementModel& model, const Eigen::VectorXd& z, const BasisPtr& basis,
                                    const std::vector<double>& mu, const std::vector<double>& s) {
  int n = basis->n();
  int r = basis->max_degree();
  if (2 * model.degree() > r)
    throw DegreeOverflow("likelihood energy degree " + std::to_string(2 * model.degree()) + " exceeds basis order " +
                         std::to_string(r));
  if (z.size() != model.n_z()) throw ConfigError("measurement dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(model.R);
  if (llt.info() != Eigen::Success) throw ConfigError("measurement covariance is not positive definite");
  Eigen::MatrixXd Rinv = llt.solve(Eigen::MatrixXd::Identity(model.R.rows(), model.R.cols()));

  std::vector<double> shift = mu.empty() ? std::vector<double>(static_cast<std::size_t>(n), 0.0) : mu;
  std::vector<Polynomial> res;
  for (int k = 0; k < model.n_z(); ++k) {
    Polynomial gk = model.g[static_cast<std::size_t>(k)].affine_substitute(shift, s);
    Polynomial rk = Polynomial::constant(n, z[k]) - gk;
    res.push_back(rk);
  }
  Polynomial energy(n);
  for (int k = 0; k < model.n_z(); ++k)
    for (int l = 0; l < model.n_z(); ++l) {
      if (Rinv(k, l) == 0.0) continue;
      energy += (res[static_cast<std::size_t>(k)] * res[static_cast<std::size_t>(l)]) * (0.5 * Rinv(k, l));
    }
  ScoreParams out(basis);
  for (const auto& [a, c] : energy.terms()) {
    if (a.degree() == 0) continue;
    long idx = basis->lookup(a);
    if (idx < 0) throw DegreeOverflow("likelihood term " + a.str() + " outside the basis");
    out.lambda[idx] = c;
  }
  return out;
}

ScoreParams conjugate_update(const ScoreParams& prior, const ScoreParams& lik) {
  if (prior.basis->n() != lik.basis->n() || prior.basis->max_degree() != lik.basis->max_degree())
    throw ConfigError("conjugate_update: basis mismatch");
  return ScoreParams(prior.basis, prior.lambda + lik.lambda);
}

RecoveryResult recover_posterior_moments(const ScoreParams& lambda_plus, int K, const RecoveryConfig& cfg) {
  SteinSystem sys = build_recovery_system(lambda_plus, K, cfg);
  FactorCache fc(std::move(sys));
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  SolveResult sol = fc.solve(one);
  RecoveryResult out;
  out.moments = MomentVector(enumerate_basis(lambda_plus.n(), K));
  for (std::size_t k = 1; k < out.moments.basis->size(); ++k)
    out.moments.values[static_cast<long>(k)] = sol.values[static_cast<long>(k - 1)];  // columns follow the graded order
  out.residual = sol.residual;
  out.rows = fc.system().n_rows();
  out.unknowns = fc.system().n_unknowns();
  return out;
}

double stein_projected_residual(const ScoreParams& lambda, const MomentVector& m) {
  GramSystem g = assemble_gram(m, lambda.r());
  Eigen::VectorXd l = lambda.lambda.tail(g.A.rows());
  double nb = g.b.norm();
  return (g.A * l - g.b).norm() / (nb > 0.0 ? nb : 1.0);
}

RefineResult refine_consistency(const ScoreParams& prior, const ScoreParams& lik, int K, const RefineOptions& opt) {
  if (opt.max_iters < 1) throw ConfigError("refinement needs max_iters >= 1");
  ScoreParams target = conjugate_update(prior, lik);
  int r = target.r();
  ScoreParams cur = target;
  RefineResult out;
  for (int it = 1; it <= opt.max_iters; ++it) {
    RecoveryResult rec;
    FitResult fit;
    try {
      rec = recover_posterior_moments(cur, K, opt.recovery);
      fit = score_match(rec.moments, r, opt.fit);
    } catch (const NumericalError& e) {
      if (it == 1) throw;
      // keep the last good iterate
      out.converged = false;
      return out;
    }
    out.moments = rec.moments;
    out.lambda = fit.params;
    out.iterations = it;
    out.ls_residuals.push_back(rec.residual);
    out.residuals.push_back(stein_projected_residual(target, rec.moments));
    Eigen::VectorXd defect = target.lambda - fit.params.lambda;
    double scale = std::max(cur.lambda.norm(), 1e-300);
    if (defect.norm() / scale < opt.tol) {
      out.converged = true;
      break;
    }
    if (it == opt.max_iters) break;
    cur = ScoreParams(cur.basis, cur.lambda + defect);
  }
  return out;
}

}  // namespace skf

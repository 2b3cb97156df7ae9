#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "skf/kernels.hpp"
#include "skf/sde_model.hpp"
#include "skf/update.hpp"

namespace skf {

// splitmix64 of the seed mixed with a tag, so every consumer gets its own stream
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double normal() { return nd_(eng_); }
  double uniform() { return ud_(eng_); }
  void fill_normal(double* out, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) out[k] = nd_(eng_);
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> nd_{0.0, 1.0};
  std::uniform_real_distribution<double> ud_{0.0, 1.0};
};

// symmetric square root (eigen-based, negative eigenvalues clipped)
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& P);

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  bool clipped = false;  // covariance needed symmetrize-and-clip
};

struct UkfParams {
  double alpha = 1e-3;
  double beta = 2.0;
  double kappa = 0.0;
};

GaussianBelief ekf_predict(const GaussianBelief& b, const PolynomialSDE& sde, double dt, double dt_ode);
GaussianBelief ekf_update(const GaussianBelief& b, const MeasurementModel& model, const Eigen::VectorXd& z);
GaussianBelief ukf_predict(const GaussianBelief& b, const PolynomialSDE& sde, double dt, double dt_ode,
                           const UkfParams& p = {});
GaussianBelief ukf_update(const GaussianBelief& b, const MeasurementModel& model, const Eigen::VectorXd& z,
                          const UkfParams& p = {});

// Structure-of-arrays particle storage: x[i][p]
struct ParticleSet {
  int n = 0;
  std::vector<std::vector<double>> x;
  std::vector<double> w;  // simplex weights; uniform for ensembles
  bool degenerate = false;

  ParticleSet() = default;
  ParticleSet(int n, std::size_t N);
  std::size_t size() const { return w.size(); }
  std::vector<const double*> columns() const;
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;
  double ess() const;
};

ParticleSet sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t N, Rng& rng);

class EulerMaruyama {
 public:
  explicit EulerMaruyama(const PolynomialSDE& sde, kernels::Isa isa = kernels::active_isa());
  void step(ParticleSet& ps, double dt, Rng& rng) const;
  // ceil(T / dt) equal steps
  void advance(ParticleSet& ps, double T, double dt, Rng& rng) const;
  kernels::Isa isa() const { return isa_; }

 private:
  PolynomialSDE sde_;
  kernels::Isa isa_;
  std::vector<kernels::PolyProgram> drift_;
  std::vector<kernels::PolyProgram> diff_;
  bool constant_h_;
  Eigen::MatrixXd h0_;
  // per-step scratch, reused across calls
  mutable std::vector<std::vector<double>> f_, xi_, inc_;
  mutable std::vector<double> hk_;
};

void enkf_update(ParticleSet& ens, const MeasurementModel& model, const Eigen::VectorXd& z, Rng& rng);
// reweight by the likelihood, resample when ESS < N/2
void pf_update(ParticleSet& ps, const MeasurementModel& model, const Eigen::VectorXd& z, Rng& rng);
void systematic_resample(ParticleSet& ps, Rng& rng);

struct McResult {
  std::vector<double> times;
  std::vector<MomentVector> raw;
  std::vector<MomentVector> centered;
  std::vector<Eigen::VectorXd> raw_se;
  std::vector<Eigen::VectorXd> centered_se;
};

struct McOptions {
  double dt = 0.005;
  std::size_t N = 100000;
  std::uint64_t seed = 1;
  int K = 4;
  int groups = 20;  // jackknife groups
  kernels::Isa isa = kernels::active_isa();
};

// Euler-Maruyama paths from N(mean, cov); moments at each requested time
McResult mc_moment_oracle(const PolynomialSDE& sde, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                          const std::vector<double>& times, const McOptions& opt);

// Filters behind one interface for the comparison harness.
class Filter {
 public:
  virtual ~Filter() = default;
  virtual std::string name() const = 0;
  virtual void predict(double dt) = 0;
  virtual void update(const MeasurementModel& model, const Eigen::VectorXd& z) = 0;
  virtual Eigen::VectorXd mean() const = 0;
  virtual Eigen::MatrixXd covariance() const = 0;
};

std::unique_ptr<Filter> make_ekf(const PolynomialSDE& sde, const GaussianBelief& init, double dt_ode);
std::unique_ptr<Filter> make_ukf(const PolynomialSDE& sde, const GaussianBelief& init, double dt_ode,
                                 const UkfParams& p = {});
std::unique_ptr<Filter> make_enkf(const PolynomialSDE& sde, const GaussianBelief& init, std::size_t N, double dt_ode,
                                  std::uint64_t seed);
std::unique_ptr<Filter> make_pf(const PolynomialSDE& sde, const GaussianBelief& init, std::size_t N, double dt_ode,
                                std::uint64_t seed);

}  // namespace skf

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "skf/sde_model.hpp"
#include "skf/update.hpp"

namespace skf {

using ParamMap = std::map<std::string, double>;

struct InitialLaw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Defaults used by the filter harness when a config leaves them out.
struct FilterDefaults {
  int r = 4;
  double dt_pred = 0.2;
  int steps = 25;
};

// Defaults used by the moment-accuracy harness.
struct MomentDefaults {
  int r = 4;
  double horizon = 2.0;
  double dt_window = 0.1;
  InitialLaw init;
};

struct SystemInstance {
  std::string name;
  ParamMap params;
  PolynomialSDE sde;
  MeasurementModel measurement;
  InitialLaw init;
  FilterDefaults filter;
  MomentDefaults moments;
};

struct SystemSpec {
  std::string name;
  std::string description;
  ParamMap defaults;
  std::function<SystemInstance(const ParamMap&)> build;
};

class SystemRegistry {
 public:
  // throws ConfigError on a duplicate name
  void add(SystemSpec spec);
  bool has(const std::string& name) const;
  const SystemSpec& get(const std::string& name) const;
  std::vector<std::string> names() const;
  // unknown parameter names are a ConfigError
  SystemInstance build(const std::string& name, const ParamMap& overrides = {}) const;

 private:
  std::vector<SystemSpec> specs_;
};

SystemRegistry register_builtin_systems();
const SystemRegistry& builtin_systems();

}  // namespace skf

#include <doctest.h>

#include "oracles.hpp"
#include "skf/bench.hpp"
#include "skf/error.hpp"

using namespace skf;
using nlohmann::json;

namespace {

ExperimentConfig random_config(oracle::Gen& g) {
  static const char* systems[] = {"ou_linear", "duffing", "lotka_volterra", "double_well", "tracer_3d"};
  static const char* filters[] = {"SKF", "EKF", "UKF", "EnKF", "PF"};
  static const char* closures[] = {"auto", "first", "standard", "extended"};
  ExperimentConfig c;
  c.kind = g.integer(0, 1) ? "filter" : "moments";
  c.system = systems[g.integer(0, 4)];
  c.filters.clear();
  for (int k = g.integer(1, 5); k > 0; --k) c.filters.push_back(filters[g.integer(0, 4)]);
  c.seeds.clear();
  for (int k = g.integer(1, 4); k > 0; --k) c.seeds.push_back(static_cast<std::uint64_t>(g.integer(0, 1 << 30)));
  c.r = g.integer(0, 1) ? -1 : g.integer(2, 5);
  c.steps = g.integer(0, 1) ? -1 : g.integer(1, 50);
  c.dt_pred = g.integer(0, 1) ? -1.0 : g.uniform(0.01, 0.5);
  c.dt_ode = g.uniform(1e-4, 0.01);
  c.scale_c = g.uniform(1.0, 5.0);
  c.closure = closures[g.integer(0, 3)];
  c.active_closure = g.integer(0, 1) == 1;
  c.refine_iters = g.integer(1, 6);
  c.refine_tol = g.uniform(1e-12, 1e-6);
  c.enkf_members = static_cast<std::size_t>(g.integer(2, 2000));
  c.pf_particles = static_cast<std::size_t>(g.integer(1, 20000));
  c.horizon = g.integer(0, 1) ? -1.0 : g.uniform(0.1, 5.0);
  c.dt_window = g.integer(0, 1) ? -1.0 : g.uniform(0.01, 0.5);
  c.mc_particles = static_cast<std::size_t>(g.integer(40, 1000000));
  c.mc_dt = g.uniform(1e-4, 0.01);
  c.mc_seed = static_cast<std::uint64_t>(g.integer(0, 1 << 30));
  c.out_dir = g.integer(0, 1) ? "" : "out/run" + std::to_string(g.integer(0, 99));
  if (c.system == "duffing" && g.integer(0, 1)) c.params["sigma"] = g.uniform(0.05, 0.5);
  return c;
}

}  // namespace

TEST_CASE("configurations survive a JSON round trip") {
  oracle::Gen g(1);
  for (int trial = 0; trial < 50; ++trial) {
    ExperimentConfig c = random_config(g);
    json j = to_json(c);
    CHECK(config_from_json(j) == c);
    // through text as well
    CHECK(config_from_json(json::parse(j.dump())) == c);
  }
}

TEST_CASE("malformed configurations are rejected") {
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"sytem": "duffing"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"r": "four"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"([1, 2])")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"system": "pendulum"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"filters": ["KF"]})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"steps": 0})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"r": 1})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"closure": "sometimes"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"params": {"zeta": 1.0}})")), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
  CHECK(parse_row_range("extended") == RowRange::Extended);
}

TEST_CASE("system registry") {
  const SystemRegistry& reg = builtin_systems();
  CHECK(reg.names().size() == 6);
  for (const char* name : {"ou_linear", "duffing", "lotka_volterra", "coupled_oscillators", "double_well", "tracer_3d"})
    CHECK(reg.has(name));
  SystemInstance d = reg.build("duffing", {{"sigma", 0.2}});
  CHECK(d.params.at("sigma") == 0.2);
  CHECK(d.sde.n() == 2);
  CHECK(reg.build("coupled_oscillators", {{"N", 3.0}}).sde.n() == 6);
  CHECK_THROWS_AS(reg.build("duffing", {{"zeta", 1.0}}), ConfigError);
  CHECK_THROWS_AS(reg.get("pendulum"), ConfigError);

  SystemRegistry mine;
  SystemSpec spec = reg.get("ou_linear");
  mine.add(spec);
  CHECK_THROWS_AS(mine.add(spec), ConfigError);
}

TEST_CASE("scaled errors use the per-degree RMS floor") {
  BasisPtr b = enumerate_basis(2, 3);
  MomentVector mc(b), est(b);
  Eigen::VectorXd se = Eigen::VectorXd::Zero(static_cast<long>(b->size()));
  oracle::Gen g(2);
  for (std::size_t k = 0; k < b->size(); ++k) {
    mc.values[static_cast<long>(k)] = g.normal();
    est.values[static_cast<long>(k)] = mc.values[static_cast<long>(k)] + 0.01 * g.normal();
  }
  mc.at(MultiIndex{1, 1}) = 0.0;
  auto errs = scaled_errors(est, mc, se, 3);
  CHECK(errs.size() == 7);  // three of degree 2, four of degree 3
  for (const auto& e : errs) {
    int d = e.index.degree();
    double tau = 0.0;
    int cnt = 0;
    for (std::size_t k = 0; k < b->size(); ++k)
      if ((*b)[k].degree() == d) {
        tau += mc.values[static_cast<long>(k)] * mc.values[static_cast<long>(k)];
        ++cnt;
      }
    tau = std::sqrt(tau / cnt);
    CHECK(e.tau == doctest::Approx(tau));
    CHECK(e.scaled == doctest::Approx(std::fabs(e.skf - e.mc) / std::max(std::fabs(e.mc), tau)));
  }
  auto pd = per_degree_error(errs, 3);
  REQUIRE(pd.size() == 4);
  CHECK(pd[0] == 0.0);
  CHECK(pd[1] == 0.0);
  double acc = 0.0;
  for (const auto& e : errs)
    if (e.index.degree() == 2) acc += e.scaled * e.scaled;
  CHECK(pd[2] == doctest::Approx(std::sqrt(acc / 3)));
}

TEST_CASE("filter comparison output is reproducible") {
  ExperimentConfig c;
  c.system = "duffing";
  c.filters = {"SKF", "EKF", "UKF", "EnKF", "PF"};
  c.seeds = {3};
  c.steps = 3;
  c.r = 3;
  c.enkf_members = 50;
  c.pf_particles = 200;
  FilterComparisonReport a = run_filter_comparison(c);
  FilterComparisonReport b = run_filter_comparison(c);
  std::string ca = filter_csv(a);
  CHECK(ca == filter_csv(b));
  CHECK(ca.rfind(std::string("# ") + kVersion + "\n", 0) == 0);
  CHECK(a.runs.size() == 5);
  CHECK(a.truth.at(3).size() == 4);
  CHECK(a.measurements.at(3).size() == 3);
  for (const auto& run : a.runs) {
    CHECK_FALSE(run.failed);
    CHECK(run.steps.size() == 3);
    double mean_err = 0.0;
    for (const auto& s : run.steps) mean_err += s.error;
    CHECK(run.rmse == doctest::Approx(mean_err / 3));
  }
  CHECK(a.summary_for("SKF").runs == 1);
  CHECK_THROWS_AS(a.summary_for("KF"), ConfigError);
  json j = report_json(a);
  CHECK(j.contains("summary"));
}

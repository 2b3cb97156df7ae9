#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "skf/bench.hpp"
#include "skf/error.hpp"
#include "skf/stein.hpp"

using namespace skf;
using nlohmann::json;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<std::size_t> particles;
  bool quiet = false;
};

std::string resolve_out(const Common& c, const std::string& from_config) {
  if (!c.out_dir.empty()) return c.out_dir;
  if (!from_config.empty()) return from_config;
  return "out";
}

void say(const Common& c, const std::string& s) {
  if (!c.quiet) std::cout << s << "\n";
}

int cmd_systems_list() {
  const auto& reg = builtin_systems();
  for (const auto& name : reg.names()) {
    const SystemSpec& spec = reg.get(name);
    SystemInstance inst = reg.build(name);
    std::cout << name << "  n=" << inst.sde.n() << "  excess_degree=" << excess_degree(inst.sde) << "  " << spec.description
              << "\n    params:";
    for (const auto& [k, v] : spec.defaults) std::cout << " " << k << "=" << v;
    std::cout << "\n";
  }
  return 0;
}

int cmd_counts(int n, int r) {
  SystemCount first = count_system(n, r, CountMode::FirstLayer);
  SystemCount standard = count_system(n, r, CountMode::Standard);
  SystemCount extended = count_system(n, r, CountMode::Extended);
  auto line = [](const char* name, const SystemCount& c) {
    std::printf("%-9s rows=%llu unknowns=%llu ratio=%.4f %s\n", name, static_cast<unsigned long long>(c.rows),
                static_cast<unsigned long long>(c.unknowns), c.ratio,
                c.rows >= c.unknowns ? "overdetermined" : "underdetermined");
  };
  std::printf("n=%d r=%d\n", n, r);
  line("first", first);
  line("standard", standard);
  line("extended", extended);
  return 0;
}

int cmd_moments(const std::string& path, const Common& c) {
  ExperimentConfig cfg = load_config(path);
  cfg.kind = "moments";
  if (c.seed) cfg.mc_seed = *c.seed;
  MomentAccuracyReport rep = run_moment_accuracy(cfg);
  std::string out = resolve_out(c, cfg.out_dir);
  write_text(out + "/moments.csv", moments_csv(rep));
  write_text(out + "/summary.json", report_json(rep).dump(2) + "\n");
  if (rep.diverged) {
    std::cerr << "closure diverged: " << rep.failure << "\n";
    return 2;
  }
  if (!rep.degree_error.empty()) {
    std::string s = "terminal per-degree scaled error:";
    const auto& e = rep.degree_error.back();
    for (std::size_t d = 2; d < e.size(); ++d) s += " d" + std::to_string(d) + "=" + std::to_string(e[d]);
    say(c, s);
  }
  say(c, "wrote " + out + "/moments.csv and " + out + "/summary.json");
  return 0;
}

int cmd_filter(const std::string& path, const Common& c) {
  ExperimentConfig cfg = load_config(path);
  cfg.kind = "filter";
  if (c.seed) cfg.seeds = {*c.seed};
  if (c.particles) cfg.pf_particles = *c.particles;
  cfg.validate();
  FilterComparisonReport rep = run_filter_comparison(cfg);
  std::string out = resolve_out(c, cfg.out_dir);
  write_text(out + "/filter.csv", filter_csv(rep));
  write_text(out + "/summary.json", report_json(rep).dump(2) + "\n");
  for (const auto& s : rep.summary) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-5s mean RMSE %.4f +- %.4f (%d runs, %d failed)", s.filter.c_str(), s.mean, s.std,
                  s.runs, s.failures);
    say(c, buf);
  }
  say(c, "wrote " + out + "/filter.csv and " + out + "/summary.json");
  return 0;
}

int cmd_cone_cbf(const ConeCbfOptions& opt_in, const Common& c) {
  ConeCbfOptions opt = opt_in;
  if (c.seed) opt.seed = *c.seed;
  if (c.particles) opt.mc_particles = *c.particles;
  ConeCbfReport rep = run_cone_cbf_demo(opt);
  std::string out = resolve_out(c, "");
  write_text(out + "/cone_cbf.csv", cone_cbf_csv(rep));
  write_text(out + "/summary.json", report_json(rep).dump(2) + "\n");
  char buf[200];
  std::snprintf(buf, sizeof buf, "theta_inf=%.6f terminal rel error m2=%.4f m4=%.4f m6=%.4f min barrier=%.3e",
                rep.theta_inf, rep.terminal_rel[0], rep.terminal_rel[1], rep.terminal_rel[2], rep.min_barrier);
  say(c, buf);
  for (const auto& u : rep.unconstrained) {
    std::snprintf(buf, sizeof buf, "unconstrained r=%d: %s", u.r,
                  u.diverged ? ("diverged at t=" + std::to_string(u.t_star)).c_str() : u.message.c_str());
    say(c, buf);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score Kalman filter benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  Common common;
  app.add_option("--seed", common.seed, "override the seed list with one seed");
  app.add_option("--out-dir", common.out_dir, "directory for CSV and JSON outputs");
  app.add_option("--particles", common.particles, "particle count for the PF (or the MC reference in cone-cbf)");
  app.add_flag("--quiet", common.quiet, "print nothing on success");

  auto* systems = app.add_subcommand("systems", "system registry");
  systems->require_subcommand(1);
  systems->add_subcommand("list", "list the built-in systems");

  std::string moments_cfg, filter_cfg;
  auto* moments = app.add_subcommand("moments", "moment accuracy against Monte Carlo");
  moments->require_subcommand(1);
  moments->add_subcommand("run", "run a moment-accuracy config")->add_option("config", moments_cfg)->required();

  auto* filter = app.add_subcommand("filter", "filter comparison");
  filter->require_subcommand(1);
  filter->add_subcommand("run", "run a filter-comparison config")->add_option("config", filter_cfg)->required();

  int count_n = 0, count_r = 0;
  auto* counts = app.add_subcommand("counts", "Stein closure row/unknown counts");
  counts->add_option("n", count_n)->required()->check(CLI::Range(1, 255));
  counts->add_option("r", count_r)->required()->check(CLI::Range(2, 127));

  ConeCbfOptions cbf;
  auto* cone = app.add_subcommand("cone-cbf", "constrained closure demo on the double well");
  cone->require_subcommand(1);
  auto* cone_run = cone->add_subcommand("run", "run the demo");
  cone_run->add_option("--sigma", cbf.sigma, "noise level");
  cone_run->add_option("--kappa", cbf.kappa_cbf, "barrier rate");
  cone_run->add_option("--horizon", cbf.horizon, "final time");

  // options given after a subcommand belong to the top level too
  for (auto* sub : {systems, moments, filter, counts, cone}) sub->fallthrough();
  for (auto* sub : app.get_subcommands({})) {
    for (auto* leaf : sub->get_subcommands({})) leaf->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (systems->parsed()) return cmd_systems_list();
    if (counts->parsed()) return cmd_counts(count_n, count_r);
    if (moments->parsed()) return cmd_moments(moments_cfg, common);
    if (filter->parsed()) return cmd_filter(filter_cfg, common);
    if (cone->parsed()) return cmd_cone_cbf(cbf, common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    json dump{{"version", kVersion}, {"error", e.what()}};
    if (auto* d = dynamic_cast<const DivergedClosure*>(&e)) dump["time"] = d->time();
    if (auto* r = dynamic_cast<const RankDeficient*>(&e)) {
      dump["rank"] = r->rank();
      dump["columns"] = r->columns();
    }
    std::cerr << "numerical failure: " << dump.dump(2) << "\n";
    return 2;
  }
  return 0;
}

// Command-line front end: run, suite, validate, list-scenarios.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "handover/errors.hpp"
#include "handover/harness.hpp"
#include "handover/scenario.hpp"

namespace fs = std::filesystem;
using namespace handover;

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitFailed = 1;
constexpr int kExitError = 2;

fs::path output_dir(const std::string& flag, const ScenarioConfig* cfg, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("HANDOVER_OUT_DIR"); env && *env) return env;
  if (cfg && !cfg->output_path.empty()) return cfg->output_path;
  return fs::path("out") / fallback;
}

void apply_overrides(ScenarioConfig& cfg, const std::string& behavior, std::optional<double> dt,
                     std::optional<double> duration) {
  if (!behavior.empty()) {
    const auto b = parse_behavior(behavior);
    if (!b || *b == Behavior::Custom) throw ConfigError("--behavior must be rigid or compliant, got '" + behavior + "'");
    cfg.set_behavior(*b);
  }
  if (dt) cfg.dt = *dt;
  if (duration) cfg.duration = *duration;
  cfg.validate();
}

int cmd_run(const std::string& target, const std::string& behavior, std::optional<double> dt,
            std::optional<double> duration, const std::string& out) {
  ScenarioConfig cfg = load_scenario(resolve_scenario(target));
  apply_overrides(cfg, behavior, dt, duration);
  const RunResult run = run_scenario(cfg);
  const fs::path dir = output_dir(out, &cfg, cfg.name);
  write_run_outputs(run, dir);
  write_summary_text(std::cout, run.summary);
  std::cout << "outputs:           " << (dir / run_stem(run.summary)).string() << "_{trajectory,events}.csv\n";
  return run.summary.outcome == Outcome::Success ? kExitSuccess : kExitFailed;
}

int cmd_suite(const std::string& dir, bool sweep, const std::string& out) {
  std::vector<ScenarioConfig> configs;
  for (const auto& file : scenario_files(dir)) {
    ScenarioConfig cfg = load_scenario(file);
    if (!sweep) {
      configs.push_back(std::move(cfg));
      continue;
    }
    for (Behavior b : {Behavior::Rigid, Behavior::Compliant}) {
      // fig2-rigid and fig2-compliant sweep to the same two runs.
      const bool seen = std::any_of(configs.begin(), configs.end(), [&](const ScenarioConfig& c) {
        return c.name == cfg.name && c.behavior == b;
      });
      if (seen) continue;
      ScenarioConfig variant = cfg;
      variant.set_behavior(b);
      configs.push_back(std::move(variant));
    }
  }
  if (configs.empty()) throw ConfigError("no *.yaml scenarios in " + dir);
  const fs::path out_dir = output_dir(out, nullptr, "suite");
  const auto rows = run_suite(configs, out_dir);
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "suite.csv", std::ios::binary);
  write_suite_csv(csv, rows);
  write_suite_table(std::cout, rows);
  std::cout << "summary: " << (out_dir / "suite.csv").string() << '\n';
  for (const auto& r : rows) {
    if (!r.error.empty()) return kExitError;
  }
  for (const auto& r : rows) {
    if (r.outcome != Outcome::Success) return kExitFailed;
  }
  return kExitSuccess;
}

int cmd_validate(const std::string& target) {
  const fs::path path = resolve_scenario(target);
  const ScenarioConfig cfg = load_scenario(path);
  std::cout << path.string() << ": ok (" << cfg.name << ", " << task_name(cfg.mode) << ", "
            << to_string(cfg.behavior) << ", " << horizon_steps(cfg) << " steps)\n";
  return kExitSuccess;
}

int cmd_list() {
  const fs::path dir = scenario_dir();
  for (const auto& file : scenario_files(dir)) {
    try {
      const ScenarioConfig cfg = load_scenario(file);
      std::cout << file.stem().string() << "  " << task_name(cfg.mode) << "  " << to_string(cfg.behavior) << '\n';
    } catch (const std::exception& e) {
      std::cout << file.stem().string() << "  invalid: " << e.what() << '\n';
    }
  }
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-flying manipulator handover simulator"};
  app.require_subcommand(1);

  std::string target, behavior, out, suite_dir;
  std::optional<double> dt, duration;
  bool sweep = false;

  auto* run = app.add_subcommand("run", "Run one scenario and write its logs");
  run->add_option("scenario", target, "Scenario file or shipped scenario name")->required();
  run->add_option("--behavior", behavior, "rigid or compliant");
  run->add_option("--dt", dt, "Step size override [s]");
  run->add_option("--duration", duration, "Horizon override [s]");
  run->add_option("--out", out, "Output directory");

  auto* suite = app.add_subcommand("suite", "Run every scenario of a directory");
  suite->add_option("dir", suite_dir, "Directory of *.yaml scenarios")->required();
  suite->add_flag("--sweep", sweep, "Run each scenario under both rigid and compliant gains");
  suite->add_option("--out", out, "Output directory");

  auto* validate = app.add_subcommand("validate", "Check a scenario file without running it");
  validate->add_option("scenario", target, "Scenario file or shipped scenario name")->required();

  app.add_subcommand("list-scenarios", "List the shipped scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitSuccess : kExitError;
  }

  try {
    if (*run) return cmd_run(target, behavior, dt, duration, out);
    if (*suite) return cmd_suite(suite_dir, sweep, out);
    if (*validate) return cmd_validate(target);
    return cmd_list();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

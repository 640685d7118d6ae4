#include "stealsim/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation toolkit for model-stealing attacks and budgeted response defenses"};
  app.set_version_flag("--version", stealsim::kToolkitVersion);
  app.require_subcommand(1);

  std::string config_arg;
  std::string out_dir;
  std::string run_dir;
  std::string figure_id;
  int jobs = 0;
  std::uint64_t seed_override = 0;
  bool has_seed = false;
  int replicates_override = 0;

  CLI::App* run = app.add_subcommand("run", "Run a scenario and write raw/summary CSV output");
  run->add_option("config", config_arg, "Config file path or built-in scenario id")->required();
  run->add_option("--seed", seed_override, "Override the master seed")
      ->each([&](const std::string&) { has_seed = true; });
  run->add_option("--replicates", replicates_override, "Override the replicate count");
  run->add_option("--jobs", jobs, "Worker threads (0 = all cores)");
  run->add_option("--out", out_dir, "Output directory (default runs/<id>)");

  CLI::App* validate = app.add_subcommand("validate", "Check a config and exit");
  validate->add_option("config", config_arg, "Config file path or built-in scenario id")
      ->required();

  CLI::App* exp = app.add_subcommand("export", "Export figure data from a finished run");
  exp->add_option("run-dir", run_dir, "Directory holding summary.csv")->required();
  exp->add_option("figure-id", figure_id, "privacy_vs_n | privacy_vs_u | symdiff_vs_u")
      ->required();

  CLI::App* list = app.add_subcommand("list-scenarios", "List built-in scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (list->parsed()) {
      for (const auto& b : stealsim::builtin_scenarios())
        std::printf("%-20s %s\n", b.id.c_str(), b.description.c_str());
      return kExitOk;
    }
    if (validate->parsed()) {
      stealsim::ScenarioConfig cfg = stealsim::load_scenario(config_arg);
      stealsim::validate_config(cfg);
      std::printf("ok: scenario '%s' (%zu defenses, %zu n values, %zu budgets, %d replicates)\n",
                  cfg.id.c_str(), cfg.defenses.size(), cfg.n_values.size(), cfg.u_values.size(),
                  cfg.replicates);
      return kExitOk;
    }
    if (run->parsed()) {
      stealsim::ScenarioConfig cfg = stealsim::load_scenario(config_arg);
      if (has_seed) cfg.seed = seed_override;
      if (replicates_override > 0) cfg.replicates = replicates_override;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      stealsim::validate_config(cfg);
      stealsim::ScenarioResult result = stealsim::run_scenario(cfg, resolve_jobs(jobs));
      std::string dir = stealsim::write_run_outputs(result, out_dir);
      int failed = 0;
      for (const auto& s : result.summary) failed += s.failed;
      std::printf("wrote %zu raw rows, %zu summary rows to %s (%d failed replicates)\n",
                  result.raw.size(), result.summary.size(), dir.c_str(), failed);
      return kExitOk;
    }
    // export
    std::filesystem::path summary_path = std::filesystem::path(run_dir) / "summary.csv";
    std::ifstream in(summary_path);
    if (!in) throw std::runtime_error("cannot read " + summary_path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string csv = stealsim::export_figure_data(stealsim::parse_summary_csv(buf.str()),
                                                   figure_id);
    std::filesystem::path fig_path =
        std::filesystem::path(run_dir) / ("figure_" + figure_id + ".csv");
    std::ofstream out(fig_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + fig_path.string());
    out << csv;
    std::printf("wrote %s\n", fig_path.string().c_str());
    return kExitOk;
  } catch (const stealsim::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}

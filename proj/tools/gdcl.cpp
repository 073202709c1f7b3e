// gdcl: run class-incremental experiment grids from a JSON config.
//
//   gdcl run <config.json>        train every (variant, seed) trial and write results
//   gdcl validate <config.json>   check the config and print it fully resolved
//   gdcl plots <results-dir>      rebuild per-stage series from run records
//
// Relative output directories are resolved against $GDCL_OUTPUT_ROOT when set.
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "gdcl/runner.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitFailedTrials = 3;

fs::path output_root(const std::string& dir) {
  fs::path p(dir);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("GDCL_OUTPUT_ROOT"); root && *root) return fs::path(root) / p;
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-incremental learning with global distillation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  auto* run = app.add_subcommand("run", "Run the experiment grid described by a config");
  run->add_option("config", config_path, "Config file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", out_override, "Output directory (overrides output.dir)");

  auto* validate = app.add_subcommand("validate", "Check a config and print it with defaults applied");
  validate->add_option("config", config_path, "Config file (JSON)")->required()->check(CLI::ExistingFile);

  std::string results_path;
  auto* plots = app.add_subcommand("plots", "Write per-stage ACC/FGT series from run records");
  plots->add_option("results", results_path, "Results directory of a previous run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      std::cout << gdcl::config::serialize(gdcl::config::load_config(config_path));
      return 0;
    }
    if (*run) {
      const auto config = gdcl::config::load_config(config_path);
      const fs::path out = output_root(out_override.empty() ? config.output_dir : out_override);
      const auto summary = gdcl::runner::run_experiment(config, out, &std::cerr);
      gdcl::runner::write_aggregate_csv(std::cout, summary.rows);
      std::cerr << summary.trials << " trials, " << summary.failed << " failed; results in " << out.string() << '\n';
      return summary.failed ? kExitFailedTrials : 0;
    }
    if (*plots) {
      const auto n = gdcl::runner::emit_plots(output_root(results_path));
      std::cerr << n << " series written\n";
      return 0;
    }
  } catch (const gdcl::config::ConfigError& e) {
    std::cerr << "config error at " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

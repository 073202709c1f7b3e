#pragma once

#include <string>
#include <vector>

#include "gdcl/taskgen.hpp"
#include "gdcl/trainer.hpp"

// Experiment configuration. The document is JSON; every key is optional and
// falls back to the default shown in README.md. Unknown keys, wrong types and
// out-of-range values raise ConfigError naming the offending key path.
namespace gdcl::config {

inline constexpr const char* kConfigSchema = "gdcl-config/1";

class ConfigError : public InvalidConfig {
 public:
  ConfigError(std::string path, const std::string& what)
      : InvalidConfig(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct BenchmarkConfig {
  taskgen::GeometrySpec geometry;
  std::size_t task_size = 10;
  std::size_t per_class_train = 200;
  std::size_t per_class_test = 100;
  double prev_like_fraction = 0.05;
  std::uint64_t geometry_seed = 2020;

  bool operator==(const BenchmarkConfig& o) const;
};

// Full-length schedule shape; every epoch count and milestone is divided by
// `divisor` (rounding up) to get the schedule actually run.
struct ScheduleConfig {
  std::size_t divisor = 20;
  std::size_t epochs = 200;
  std::vector<std::size_t> milestones{120, 160, 180};
  std::size_t epochs_before_finetune = 180;
  std::vector<std::size_t> milestones_before_finetune{120, 160, 170};
  std::size_t finetune_epochs = 20;
  std::vector<std::size_t> finetune_milestones{10, 15};
  double finetune_lr = 0.01;
  double decay = 0.1;

  bool operator==(const ScheduleConfig&) const = default;
};

struct ExperimentConfig {
  BenchmarkConfig benchmark;
  std::vector<std::size_t> hidden{64, 64};
  nnet::SgdSettings optimizer;
  std::size_t batch_size = 128;
  ScheduleConfig schedule;
  std::size_t coreset_size = 2000;  // divided by schedule.divisor, rounding up
  double ood_ratio = 0.7;
  std::size_t n_max = 20000;
  std::size_t external_size = 0;  // 0: match the labeled training set
  std::size_t score_batch = 512;
  double gamma_previous = 2.0;
  double gamma_current = 2.0;
  double gamma_ensemble = 1.0;
  trainer::LossWeighting loss_weighting = trainer::LossWeighting::task_size;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t jobs = 1;
  std::string output_dir = "results";
  std::vector<trainer::MethodVariant> variants;

  bool operator==(const ExperimentConfig& o) const;
};

// The three variants compared by default: Baseline, GD, and GD with external data.
std::vector<trainer::MethodVariant> default_variants();

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Fully explicit JSON document; parse_config(serialize(c)) == c.
std::string serialize(const ExperimentConfig& config);
// Throws ConfigError on constraint violations. parse_config already calls it.
void validate(const ExperimentConfig& config);

// Training settings after applying the schedule divisor.
trainer::TrainConfig resolve(const ExperimentConfig& config);

}  // namespace gdcl::config

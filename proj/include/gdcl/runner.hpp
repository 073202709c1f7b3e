#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gdcl/config.hpp"

namespace gdcl::runner {

inline constexpr const char* kRunSchema = "gdcl-run/1";
inline constexpr const char* kAggregateSchema = "gdcl-aggregate/1";
inline constexpr const char* kSeriesSchema = "gdcl-series/1";

struct StageRecord {
  std::size_t stage = 0;
  std::vector<double> accuracy;
  trainer::StageDiagnostics diagnostics;
  trainer::LossTraces loss_traces;
};

struct TrialRecord {
  std::string variant;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<std::size_t> task_sizes;
  std::optional<metrics::AccuracyMatrix> accuracy;
  double acc = 0.0;
  double fgt = 0.0;
  std::vector<StageRecord> stages;
};

struct AggregateRow {
  std::string variant;
  std::size_t seeds = 0;  // successful trials
  double acc_mean = 0.0, acc_std = 0.0;
  double fgt_mean = 0.0, fgt_std = 0.0;
};

struct SeriesPoint {
  std::size_t stage = 0;
  std::size_t classes_seen = 0;
  std::size_t seeds = 0;
  double acc_mean = 0.0, acc_std = 0.0;
  double fgt_mean = 0.0, fgt_std = 0.0;
};

// Task sequence and stream shared by every variant for one seed.
struct Benchmark {
  taskgen::Geometry geometry;
  taskgen::TaskLayout layout;
  std::vector<taskgen::TaskData> tasks;
  std::shared_ptr<const taskgen::PointSet> test_points;
  double prev_like_fraction = 0.05;
  std::uint64_t seed = 0;

  // Unlabeled stream for `stage` (1-based): previously seen clusters are the
  // clusters of every earlier task. Test points never appear.
  std::unique_ptr<UnlabeledStream> stream(std::size_t stage) const;
};

taskgen::Geometry make_geometry(const config::ExperimentConfig& config);
Benchmark make_benchmark(const config::ExperimentConfig& config, const taskgen::Geometry& geometry, std::uint64_t seed);

// One (variant, seed) trial. Failures are caught and recorded, never thrown.
TrialRecord run_trial(const config::ExperimentConfig& config, const taskgen::Geometry& geometry,
                      const trainer::MethodVariant& variant, std::uint64_t seed);

// Every (variant, seed) trial, ordered variant-major as in the config. Trials
// run on `config.jobs` worker threads; the result does not depend on it.
std::vector<TrialRecord> run_trials(const config::ExperimentConfig& config);

// Mean and sample standard deviation over the successful trials of each variant.
std::vector<AggregateRow> aggregate(const config::ExperimentConfig& config, const std::vector<TrialRecord>& trials);
// ACC and FGT of the truncated matrix after each stage from 2 on, averaged over successful trials.
std::vector<SeriesPoint> series(const std::vector<TrialRecord>& trials, const std::string& variant);

std::string run_json(const TrialRecord& trial, const trainer::MethodVariant& variant);
TrialRecord parse_run_json(const std::string& text);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
void write_series_csv(std::ostream& out, const std::string& variant, const std::vector<SeriesPoint>& points);

// File-system safe form of a variant label.
std::string file_stem(const std::string& label);

struct ExperimentSummary {
  std::size_t trials = 0;
  std::size_t failed = 0;
  std::vector<AggregateRow> rows;
};

// Runs the grid and writes under `out_dir`:
//   config.json                      resolved configuration
//   runs/<variant>_seed<k>.json      one record per trial
//   runs/<variant>_seed<k>_accuracy.csv
//   aggregate.csv
//   plots/<variant>.csv              per-stage series
ExperimentSummary run_experiment(const config::ExperimentConfig& config, const std::filesystem::path& out_dir,
                                 std::ostream* log = nullptr);

// Rebuilds plots/<variant>.csv from the run records under `results_dir`.
// Returns the number of series written.
std::size_t emit_plots(const std::filesystem::path& results_dir);

}  // namespace gdcl::runner

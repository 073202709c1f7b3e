#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gdcl/coreset.hpp"
#include "gdcl/metrics.hpp"
#include "gdcl/objective.hpp"
#include "gdcl/taskgen.hpp"

namespace gdcl::trainer {

enum class Method { oracle, baseline, lwf, dr, gd };
enum class Balancing { none, dw, ft_dset, ft_dw };
enum class Sampling { none, random_only, pred_only, combined };
enum class LossWeighting { task_size, uniform };

// Which reference models feed distillation terms under Method::gd.
struct ReferenceSet {
  bool previous = true;
  bool current = true;
  bool ensemble = true;

  bool operator==(const ReferenceSet&) const = default;
};

struct MethodVariant {
  std::string label = "GD";
  Method method = Method::gd;
  ReferenceSet references;
  Balancing balancing = Balancing::ft_dw;
  Sampling sampling = Sampling::none;
  // Adds the confidence term on coreset plus external data when training the
  // current-task teacher.
  bool teacher_cnf = true;

  bool use_external() const noexcept { return sampling != Sampling::none; }
  // Whether stages after the first need a current-task teacher.
  bool needs_current_teacher() const noexcept;
  bool fine_tunes() const noexcept { return balancing == Balancing::ft_dw || balancing == Balancing::ft_dset; }
  bool operator==(const MethodVariant&) const = default;
};

const char* to_string(Method m);
const char* to_string(Balancing b);
const char* to_string(Sampling s);
const char* to_string(LossWeighting w);
Method method_from_string(const std::string& s);
Balancing balancing_from_string(const std::string& s);
Sampling sampling_from_string(const std::string& s);
LossWeighting loss_weighting_from_string(const std::string& s);

// Fully resolved training settings shared by every variant of an experiment.
struct TrainConfig {
  std::vector<std::size_t> hidden{64, 64};
  nnet::SgdSettings sgd;
  std::size_t batch_size = 128;
  Schedule teacher;
  Schedule main;                  // main training when no fine-tuning follows
  Schedule main_before_finetune;  // main training when fine-tuning follows
  Schedule finetune;
  double gamma_previous = 2.0;
  double gamma_current = 2.0;
  double gamma_ensemble = 1.0;
  LossWeighting loss_weighting = LossWeighting::task_size;
  std::size_t coreset_size = 200;
  double ood_ratio = 0.7;
  std::size_t n_max = 20000;
  std::size_t external_size = 0;  // 0: as many as labeled training examples
  std::size_t score_batch = 512;

  bool operator==(const TrainConfig&) const = default;
};

struct StageDiagnostics {
  std::size_t labeled_size = 0;
  std::size_t external_size = 0;
  std::size_t external_ood = 0;
  std::size_t external_prev = 0;
  std::size_t retrieved = 0;
  // L1 distance between the prediction histogram on the balanced test pool
  // and the uniform histogram, before and after balanced fine-tuning.
  double bias_before_finetune = 0.0;
  double bias_after_finetune = 0.0;
  double wall_time_seconds = 0.0;  // never written to result files
};

struct StageResult {
  std::size_t stage = 0;  // 1-based
  nnet::Model model;
  Coreset coreset;
  std::vector<double> accuracy;  // entry r - 1 holds the accuracy on task r
  LossTraces loss_traces;        // keys prefixed with teacher/, main/ or finetune/
  StageDiagnostics diagnostics;
};

// Current-task teacher: a fresh single-head model trained with cls on `d_t`
// (labels first_label .. first_label + num_classes - 1) plus, when enabled,
// the confidence term on `cnf_pool`.
nnet::Model train_current_teacher(const LabeledSet& d_t, std::size_t first_label, std::size_t num_classes,
                                  const Matrix& cnf_pool, bool use_cnf, const TrainConfig& config,
                                  std::uint64_t seed, LossTraces* traces = nullptr);

// Terms of the main objective for `student` (previous heads plus one new head).
// The combined role holds the labeled inputs followed by `external`.
Objective build_main_objective(const nnet::Model& prev, const nnet::Model* current,
                               const nnet::Model& student, const LabeledSet& d_trn,
                               const Matrix& external, const MethodVariant& variant,
                               const TrainConfig& config);

// Warm-starts from `prev` with a fresh head of `new_classes` and minimizes the
// main objective.
nnet::Model train_main(const nnet::Model& prev, const nnet::Model* current, const LabeledSet& d_trn,
                       const Matrix& external, std::size_t new_classes, const MethodVariant& variant,
                       const TrainConfig& config, std::uint64_t seed, LossTraces* traces = nullptr);

// Second pass over the main objective to remove the bias toward the current
// task. ft_dw freezes the trunk and weighs every term by inverse class
// frequency; ft_dset undersamples the labeled set to the rarest class count and
// tunes the whole network unweighted; none and dw return `m` unchanged.
nnet::Model balanced_finetune(const nnet::Model& m, const Objective& objective, Balancing mode,
                              std::size_t num_labeled, const TrainConfig& config, std::uint64_t seed,
                              LossTraces* traces = nullptr);

// Keeps the given labeled columns (and their copies at the start of the
// combined role) and drops the rest.
Objective restrict_labeled(const Objective& objective, std::span<const std::size_t> keep,
                           std::size_t num_labeled);

struct StageInput {
  const LabeledSet* train = nullptr;        // this task's labeled data
  std::vector<const LabeledSet*> tests;     // test sets of tasks 1..t
  std::size_t first_label = 0;
  std::size_t num_classes = 0;
  UnlabeledStream* stream = nullptr;        // required when the variant uses external data
  std::uint64_t seed = 0;
};

// One stage: sample, current-task teacher, main training, balanced
// fine-tuning, coreset update. At the first stage the model is the teacher.
StageResult run_stage(const StageResult* prev, const StageInput& input, const MethodVariant& variant,
                      const TrainConfig& config);

struct SequenceResult {
  metrics::AccuracyMatrix accuracy;
  std::vector<StageResult> stages;
};

using StreamFactory = std::function<std::unique_ptr<UnlabeledStream>(std::size_t stage)>;

// Runs every task in order and fills the accuracy matrix over all heads jointly.
SequenceResult run_sequence(const std::vector<taskgen::TaskData>& tasks, const StreamFactory& streams,
                            const MethodVariant& variant, const TrainConfig& config, std::uint64_t seed);

// L1 distance between the normalized histogram of predicted classes and uniform.
double prediction_bias(const nnet::Model& model, const Matrix& inputs);

}  // namespace gdcl::trainer

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "gdcl/nnet.hpp"

namespace gdcl::losses {

// Scalar loss and its gradient with respect to the logits it was computed from.
struct LossValue {
  double value = 0.0;
  Matrix grad;
};

// Every loss below averages over the batch. Optional per-example weights
// multiply the per-example terms before the mean, and the mean divides by
// the batch size rather than the weight sum, so weight 2 on one example is
// the same as feeding it twice.

// Mean weighted -log p(y|x); labels index the rows of `logits`.
LossValue cls_loss(const Matrix& logits, std::span<const std::size_t> labels,
                   std::span<const double> weights = {});

// Mean weighted cross-entropy -sum_y q(y) log p_gamma(y) where p_gamma is the
// student softmax at temperature gamma. `teacher_probs` must already be the
// teacher's distribution at the same temperature, one column per example.
LossValue dst_loss(const Matrix& student_logits, const Matrix& teacher_probs, double gamma,
                   std::span<const double> weights = {});

// Mean over examples and classes of -log p(y|x): cross-entropy to uniform.
LossValue cnf_loss(const Matrix& logits, std::span<const double> weights = {});

// Inverse-frequency class weights normalised by |D| / |T|.
class DataWeights {
 public:
  DataWeights() = default;
  explicit DataWeights(std::map<std::size_t, double> w) : per_class_(std::move(w)) {}

  double at(std::size_t cls) const;
  const std::map<std::size_t, double>& per_class() const noexcept { return per_class_; }

  // Per-example weights for a label list.
  std::vector<double> for_labels(std::span<const std::size_t> labels) const;

 private:
  std::map<std::size_t, double> per_class_;
};

// w_k = (1 / n_k) * (|D| / |T|) over the classes in `class_range`. A class with
// no examples has no defined weight and raises MissingClass; a label outside
// `class_range` raises InvalidInput.
DataWeights data_weights(std::span<const std::size_t> labels, std::span<const std::size_t> class_range);

// |T| / |T_1:t|: the share of all classes seen so far that a term trains.
double loss_weight(std::size_t task_size, std::size_t total_classes);

}  // namespace gdcl::losses

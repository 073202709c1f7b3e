#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gdcl/common.hpp"

// Feed-forward classifier with a shared trunk and one linear head per task.
//
// Trunk layers use softplus, log(1 + e^z): ReLU-shaped but smooth, so the
// finite-difference gradient checks never straddle a kink. Heads are linear and
// their logits are concatenated in task order. Weights and biases of every
// layer are initialized from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
namespace gdcl::nnet {

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out

  bool operator==(const Layer& other) const;
};

// Parameter-shaped container. Also used for gradients and optimizer velocity.
struct ParamSet {
  std::vector<Layer> trunk;
  std::vector<Layer> heads;

  bool operator==(const ParamSet& other) const = default;
  bool same_shape(const ParamSet& other) const;
  void set_zero();
  ParamSet& operator+=(const ParamSet& other);

  // Visits every tensor with a stable path such as "trunk[0].weight".
  void for_each(const std::function<void(const std::string&, Eigen::Ref<Matrix>)>& fn);
  void for_each(const std::function<void(const std::string&, const Eigen::Ref<const Matrix>&)>& fn) const;
  std::size_t num_values() const;
};

// Half-open range of task heads [first, last).
struct HeadRange {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t count() const noexcept { return last - first; }
  bool contains(std::size_t head) const noexcept { return head >= first && head < last; }
  bool operator==(const HeadRange&) const = default;
};

class Model {
 public:
  Model(std::size_t input_dim, std::span<const std::size_t> hidden, Rng& rng);
  // Rebuilds a model from explicit parameters (checkpoints, fixtures).
  Model(std::size_t input_dim, ParamSet params, std::vector<std::size_t> head_sizes);

  // Appends a freshly initialized head; existing parameters are untouched.
  void add_head(std::size_t num_classes, Rng& rng);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t feature_dim() const noexcept;
  std::size_t num_heads() const noexcept { return head_sizes_.size(); }
  const std::vector<std::size_t>& head_sizes() const noexcept { return head_sizes_; }
  std::size_t total_classes() const noexcept;
  // First global class index produced by `head`.
  std::size_t class_offset(std::size_t head) const;
  std::size_t classes_in(HeadRange range) const;
  HeadRange all_heads() const noexcept { return {0, num_heads()}; }

  const ParamSet& params() const noexcept { return params_; }
  // Mutable access bumps the revision, invalidating outstanding tapes.
  ParamSet& mutable_params() noexcept;
  std::uint64_t revision() const noexcept { return revision_; }

  ParamSet zeros_like() const;

 private:
  void validate() const;

  std::size_t input_dim_ = 0;
  ParamSet params_;
  std::vector<std::size_t> head_sizes_;
  std::uint64_t revision_ = 0;
};

// Activations recorded by a training forward pass.
struct Tape {
  const Model* model = nullptr;
  std::uint64_t revision = 0;
  HeadRange range;
  std::vector<Matrix> pre;  // trunk pre-activations
  std::vector<Matrix> act;  // act[0] is the input, act[i + 1] the output of trunk layer i
};

// Logits (classes of `range` x batch) for the columns of `inputs`.
Matrix forward(const Model& model, const Matrix& inputs, HeadRange range);
Matrix forward(const Model& model, const Matrix& inputs, HeadRange range, Tape& tape);

// Accumulates dL/dparams into `grads` given dL/dlogits from the taped forward.
// Heads outside the taped range receive nothing.
void backward(const Model& model, const Tape& tape, const Matrix& logit_grad, ParamSet& grads);
ParamSet backward(const Model& model, const Tape& tape, const Matrix& logit_grad);

// exp(z_k / gamma) / sum exp(z_j / gamma), computed with a max shift.
Vector softmax_temperature(const Vector& logits, double gamma);
// Column-wise version over a logits matrix.
Matrix softmax_columns(const Matrix& logits, double gamma);
// Column-wise log-softmax at temperature 1.
Matrix log_softmax_columns(const Matrix& logits);

struct SgdSettings {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
};

struct OptimizerState {
  ParamSet velocity;
  SgdSettings settings;

  OptimizerState(const Model& model, SgdSettings s);
};

enum class UpdateScope { all, heads_only };

// Classical momentum with coupled L2:  v <- mu v + (g + lambda p);  p <- p - lr v.
// With heads_only, trunk parameters and their velocity are left untouched.
void sgd_step(OptimizerState& state, Model& model, const ParamSet& grads,
              UpdateScope scope = UpdateScope::all);

// FNV-1a over parameter bytes and head sizes; equal models hash equal.
std::uint64_t fingerprint(const Model& model);

}  // namespace gdcl::nnet

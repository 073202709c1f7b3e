#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "gdcl/nnet.hpp"

// Composite training objectives: a weighted sum of loss terms, each bound to
// one data role and one contiguous range of heads of the student.
namespace gdcl::trainer {

// Datasets a term can read. Terms on the same role share each step's batch.
enum class Role : std::size_t { labeled = 0, combined = 1, external = 2 };
inline constexpr std::size_t kNumRoles = 3;

const char* role_name(Role role);

enum class TermKind { cls, dst, cnf };

struct Term {
  std::string name;
  TermKind kind = TermKind::cls;
  Role role = Role::labeled;
  nnet::HeadRange heads;
  double gamma = 1.0;   // dst only
  double weight = 1.0;  // loss weight
  // cls: target rows relative to the start of `heads`. dst: the teacher's
  // argmax, used only to derive data weights. One entry per role example.
  std::vector<std::size_t> labels;
  Matrix targets;  // dst: teacher distribution per role example
  std::vector<double> example_weights;  // empty means unweighted
};

struct Objective {
  std::array<Matrix, kNumRoles> data;
  std::vector<Term> terms;

  const Matrix& inputs(Role role) const { return data[static_cast<std::size_t>(role)]; }
  // A role is used when some term reads it and it holds at least one example.
  bool active(Role role) const;
  // Checks shapes against `model`; throws InvalidConfig naming the term.
  void validate(const nnet::Model& model) const;
};

// Replaces every term's example weights with inverse class-frequency weights
// of its labels. cls terms weigh over every class of their head range, so an
// absent class raises MissingClass; dst terms weigh over the classes their
// teacher actually predicts.
void apply_data_weighting(Objective& objective, const nnet::Model& model);

// Column indices, one list per role; an empty list skips every term on that role.
using RoleBatch = std::array<std::vector<std::size_t>, kNumRoles>;

struct Evaluation {
  double total = 0.0;
  std::map<std::string, double> per_term;  // unweighted term values
  nnet::ParamSet grad;
};

// Weighted objective value and parameter gradient on the given batch.
Evaluation evaluate(const nnet::Model& model, const Objective& objective, const RoleBatch& batch);
// Same over every example of every role.
Evaluation evaluate(const nnet::Model& model, const Objective& objective);

// Piecewise-constant learning rate: lr * decay^(milestones passed).
struct Schedule {
  std::size_t epochs = 0;
  std::vector<std::size_t> milestones;  // epoch indices at which the rate decays
  double lr = 0.1;
  double decay = 0.1;

  double rate_at(std::size_t epoch) const;
  bool operator==(const Schedule&) const = default;
};

struct FitOptions {
  Schedule schedule;
  nnet::SgdSettings sgd;
  std::size_t batch_size = 128;
  nnet::UpdateScope scope = nnet::UpdateScope::all;
};

// Mean value of each term per epoch.
using LossTraces = std::map<std::string, std::vector<double>>;

// Minibatch SGD. Each role is reshuffled whenever it is exhausted, and an
// epoch runs ceil(largest active role / batch_size) steps.
LossTraces fit(nnet::Model& model, const Objective& objective, const FitOptions& options, Rng& rng);

}  // namespace gdcl::trainer

#include "gdcl/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gdcl/losses.hpp"

namespace gdcl::trainer {

const char* role_name(Role role) {
  switch (role) {
    case Role::labeled: return "labeled";
    case Role::combined: return "combined";
    case Role::external: return "external";
  }
  return "?";
}

bool Objective::active(Role role) const {
  if (inputs(role).cols() == 0) return false;
  return std::any_of(terms.begin(), terms.end(), [&](const Term& t) { return t.role == role; });
}

void Objective::validate(const nnet::Model& model) const {
  for (const auto& t : terms) {
    auto fail = [&](const std::string& what) { throw InvalidConfig("term " + t.name + ": " + what); };
    if (t.heads.first >= t.heads.last || t.heads.last > model.num_heads())
      fail("head range [" + std::to_string(t.heads.first) + "," + std::to_string(t.heads.last) +
           ") does not fit a model with " + std::to_string(model.num_heads()) + " heads");
    const auto n = static_cast<std::size_t>(inputs(t.role).cols());
    if (n > 0 && inputs(t.role).rows() != static_cast<Eigen::Index>(model.input_dim())) fail("input dimension mismatch");
    const auto width = static_cast<Eigen::Index>(model.classes_in(t.heads));
    if (t.kind == TermKind::cls && t.labels.size() != n) fail("needs one label per example");
    if (t.kind == TermKind::dst) {
      if (n > 0 && (t.targets.rows() != width || t.targets.cols() != static_cast<Eigen::Index>(n)))
        fail("teacher targets do not match the head range");
      if (!(t.gamma > 0.0)) fail("temperature must be positive");
    }
    if (!t.example_weights.empty() && t.example_weights.size() != n) fail("needs one weight per example");
    if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) fail("loss weight must be finite and nonnegative");
  }
}

void apply_data_weighting(Objective& objective, const nnet::Model& model) {
  for (auto& t : objective.terms) {
    if (objective.inputs(t.role).cols() == 0) {
      t.example_weights.clear();
      continue;
    }
    if (t.kind == TermKind::cnf) continue;  // no labels to balance over
    std::vector<std::size_t> range;
    if (t.kind == TermKind::cls) {
      range.resize(model.classes_in(t.heads));
      std::iota(range.begin(), range.end(), 0);
    } else {
      const std::set<std::size_t> present(t.labels.begin(), t.labels.end());
      range.assign(present.begin(), present.end());
    }
    t.example_weights = losses::data_weights(t.labels, range).for_labels(t.labels);
  }
}

namespace {

Matrix gather(const Matrix& m, const std::vector<std::size_t>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  if (v.empty()) return out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

Evaluation evaluate(const nnet::Model& model, const Objective& objective, const RoleBatch& batch) {
  Evaluation ev;
  ev.grad = model.zeros_like();
  for (std::size_t r = 0; r < kNumRoles; ++r) {
    const auto role = static_cast<Role>(r);
    const auto& idx = batch[r];
    if (idx.empty() || !objective.active(role)) continue;

    nnet::Tape tape;
    const Matrix logits = nnet::forward(model, gather(objective.inputs(role), idx), model.all_heads(), tape);
    Matrix logit_grad = Matrix::Zero(logits.rows(), logits.cols());
    for (const auto& t : objective.terms) {
      if (t.role != role) continue;
      const auto row0 = static_cast<Eigen::Index>(model.class_offset(t.heads.first));
      const auto rows = static_cast<Eigen::Index>(model.classes_in(t.heads));
      const Matrix slice = logits.middleRows(row0, rows);
      const auto w = gather(t.example_weights, idx);
      losses::LossValue lv;
      switch (t.kind) {
        case TermKind::cls: lv = losses::cls_loss(slice, gather(t.labels, idx), w); break;
        case TermKind::dst: lv = losses::dst_loss(slice, gather(t.targets, idx), t.gamma, w); break;
        case TermKind::cnf: lv = losses::cnf_loss(slice, w); break;
      }
      ev.per_term[t.name] = lv.value;
      ev.total += t.weight * lv.value;
      logit_grad.middleRows(row0, rows) += t.weight * lv.grad;
    }
    nnet::backward(model, tape, logit_grad, ev.grad);
  }
  return ev;
}

Evaluation evaluate(const nnet::Model& model, const Objective& objective) {
  RoleBatch all;
  for (std::size_t r = 0; r < kNumRoles; ++r) {
    all[r].resize(static_cast<std::size_t>(objective.data[r].cols()));
    std::iota(all[r].begin(), all[r].end(), 0);
  }
  return evaluate(model, objective, all);
}

double Schedule::rate_at(std::size_t epoch) const {
  double rate = lr;
  for (auto m : milestones)
    if (epoch >= m) rate *= decay;
  return rate;
}

namespace {

// Endless shuffled pass over [0, n).
class Cursor {
 public:
  Cursor(std::size_t n, Rng& rng) : order_(n), rng_(&rng) {
    std::iota(order_.begin(), order_.end(), 0);
    pos_ = n;
  }

  std::vector<std::size_t> take(std::size_t k) {
    std::vector<std::size_t> out;
    if (order_.empty()) return out;
    k = std::min(k, order_.size());
    out.reserve(k);
    while (out.size() < k) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), *rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng* rng_;
};

}  // namespace

LossTraces fit(nnet::Model& model, const Objective& objective, const FitOptions& options, Rng& rng) {
  objective.validate(model);
  if (options.batch_size == 0) throw InvalidConfig("fit: batch size must be positive");

  std::size_t largest = 0;
  std::vector<Cursor> cursors;
  for (std::size_t r = 0; r < kNumRoles; ++r) {
    const auto n = objective.active(static_cast<Role>(r)) ? static_cast<std::size_t>(objective.data[r].cols()) : 0;
    largest = std::max(largest, n);
    cursors.emplace_back(n, rng);
  }
  LossTraces traces;
  for (const auto& t : objective.terms) traces[t.name];
  if (largest == 0 || options.schedule.epochs == 0) return traces;

  const std::size_t steps = (largest + options.batch_size - 1) / options.batch_size;
  nnet::SgdSettings sgd = options.sgd;
  nnet::OptimizerState state(model, sgd);
  for (std::size_t epoch = 0; epoch < options.schedule.epochs; ++epoch) {
    state.settings.lr = options.schedule.rate_at(epoch);
    std::map<std::string, double> sums;
    std::map<std::string, std::size_t> counts;
    for (std::size_t step = 0; step < steps; ++step) {
      RoleBatch batch;
      for (std::size_t r = 0; r < kNumRoles; ++r) batch[r] = cursors[r].take(options.batch_size);
      const Evaluation ev = evaluate(model, objective, batch);
      for (const auto& [name, v] : ev.per_term) {
        sums[name] += v;
        ++counts[name];
      }
      nnet::sgd_step(state, model, ev.grad, options.scope);
    }
    for (auto& [name, trace] : traces)
      trace.push_back(counts[name] ? sums[name] / static_cast<double>(counts[name]) : 0.0);
  }
  return traces;
}

}  // namespace gdcl::trainer

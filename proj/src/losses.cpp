#include "gdcl/losses.hpp"

#include <cmath>

namespace gdcl::losses {

namespace {

void check_weights(std::span<const double> weights, Eigen::Index batch) {
  if (weights.empty()) return;
  if (static_cast<Eigen::Index>(weights.size()) != batch)
    throw InvalidInput("loss: weight count does not match batch size");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("loss: weights must be finite and nonnegative");
}

double weight_of(std::span<const double> weights, Eigen::Index j) {
  return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(j)];
}

}  // namespace

LossValue cls_loss(const Matrix& logits, std::span<const std::size_t> labels,
                   std::span<const double> weights) {
  const Eigen::Index n = logits.cols();
  if (n == 0) throw InvalidInput("cls_loss: empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != n) throw InvalidInput("cls_loss: label count mismatch");
  check_weights(weights, n);
  for (auto y : labels)
    if (static_cast<Eigen::Index>(y) >= logits.rows())
      throw InvalidInput("cls_loss: label " + std::to_string(y) + " outside logit width " +
                         std::to_string(logits.rows()));

  const Matrix log_p = nnet::log_softmax_columns(logits);
  LossValue out{0.0, log_p.array().exp()};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(j)]);
    const double w = weight_of(weights, j);
    out.value -= w * log_p(y, j);
    out.grad(y, j) -= 1.0;
    out.grad.col(j) *= w * inv_n;
  }
  out.value *= inv_n;
  return out;
}

LossValue dst_loss(const Matrix& student_logits, const Matrix& teacher_probs, double gamma,
                   std::span<const double> weights) {
  if (!(gamma > 0.0)) throw InvalidInput("dst_loss: gamma must be positive");
  const Eigen::Index n = student_logits.cols();
  if (n == 0) throw InvalidInput("dst_loss: empty batch");
  if (teacher_probs.rows() != student_logits.rows() || teacher_probs.cols() != n)
    throw InvalidInput("dst_loss: teacher covers " + std::to_string(teacher_probs.rows()) +
                       " classes, student " + std::to_string(student_logits.rows()));
  check_weights(weights, n);

  const Matrix log_p = nnet::log_softmax_columns(student_logits / gamma);
  LossValue out{0.0, Matrix(student_logits.rows(), n)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double w = weight_of(weights, j);
    out.value -= w * teacher_probs.col(j).dot(log_p.col(j));
    // d/dz of -sum q log softmax(z/gamma) = (p * sum(q) - q) / gamma. sum(q) is 1 for a
    // distribution but kept so unnormalised targets still get the exact gradient.
    const double mass = teacher_probs.col(j).sum();
    out.grad.col(j) = (log_p.col(j).array().exp() * mass - teacher_probs.col(j).array()) * (w * inv_n / gamma);
  }
  out.value *= inv_n;
  return out;
}

LossValue cnf_loss(const Matrix& logits, std::span<const double> weights) {
  const Eigen::Index n = logits.cols();
  if (n == 0) throw InvalidInput("cnf_loss: empty batch");
  check_weights(weights, n);
  const Eigen::Index k = logits.rows();
  const double inv_k = 1.0 / static_cast<double>(k);
  const double inv_n = 1.0 / static_cast<double>(n);

  const Matrix log_p = nnet::log_softmax_columns(logits);
  LossValue out{0.0, log_p.array().exp() - inv_k};
  for (Eigen::Index j = 0; j < n; ++j) {
    const double w = weight_of(weights, j);
    out.value -= w * log_p.col(j).mean();
    out.grad.col(j) *= w * inv_n;
  }
  out.value *= inv_n;
  return out;
}

double DataWeights::at(std::size_t cls) const {
  auto it = per_class_.find(cls);
  if (it == per_class_.end()) throw MissingClass(cls, "data weight requested for unknown class " + std::to_string(cls));
  return it->second;
}

std::vector<double> DataWeights::for_labels(std::span<const std::size_t> labels) const {
  std::vector<double> w;
  w.reserve(labels.size());
  for (auto y : labels) w.push_back(at(y));
  return w;
}

DataWeights data_weights(std::span<const std::size_t> labels, std::span<const std::size_t> class_range) {
  if (class_range.empty()) throw InvalidInput("data_weights: empty class range");
  std::map<std::size_t, std::size_t> counts;
  for (auto k : class_range) counts.emplace(k, 0);
  if (counts.size() != class_range.size()) throw InvalidInput("data_weights: duplicate class in range");
  for (auto y : labels) {
    auto it = counts.find(y);
    if (it == counts.end()) throw InvalidInput("data_weights: label " + std::to_string(y) + " outside class range");
    ++it->second;
  }
  const double total = static_cast<double>(labels.size());
  const double num_classes = static_cast<double>(class_range.size());
  std::map<std::size_t, double> w;
  for (const auto& [k, n] : counts) {
    if (n == 0) throw MissingClass(k, "data_weights: class " + std::to_string(k) + " has no examples");
    // total / (n * |T|) is exactly 1 when every n equals total / |T|.
    w.emplace(k, total / (static_cast<double>(n) * num_classes));
  }
  return DataWeights(std::move(w));
}

double loss_weight(std::size_t task_size, std::size_t total_classes) {
  if (task_size == 0 || task_size > total_classes)
    throw InvalidInput("loss_weight: need 1 <= |T| <= |T_1:t|");
  return static_cast<double>(task_size) / static_cast<double>(total_classes);
}

}  // namespace gdcl::losses

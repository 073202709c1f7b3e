#include "gdcl/ensemble.hpp"

#include <cmath>

namespace gdcl::ensemble {

namespace {

void check_distribution(const Eigen::Ref<const Vector>& p, const char* name) {
  if (p.size() == 0) throw InvalidInput(std::string("q_predict: empty ") + name);
  if (!p.allFinite() || (p.array() < 0.0).any())
    throw InvalidInput(std::string("q_predict: ") + name + " is not a probability vector");
  if (std::abs(p.sum() - 1.0) > 1e-6)
    throw InvalidInput(std::string("q_predict: ") + name + " does not sum to 1");
}

}  // namespace

double epsilon(double p_max, std::size_t cur_size, std::size_t total_size) {
  if (total_size < 2) throw InvalidInput("epsilon: need at least two classes in total");
  if (cur_size == 0 || cur_size >= total_size) throw InvalidInput("epsilon: need 1 <= |T_t| < |T_1:t|");
  if (!(p_max > 0.0 && p_max <= 1.0)) throw InvalidInput("epsilon: p_max must lie in (0, 1]");
  return (1.0 - p_max) * static_cast<double>(cur_size) / static_cast<double>(total_size - 1);
}

EnsembleOutput q_predict(const Vector& p_prev, const Vector& p_cur) {
  check_distribution(p_prev, "p_prev");
  check_distribution(p_cur, "p_cur");
  const auto n_prev = static_cast<std::size_t>(p_prev.size());
  const auto n_cur = static_cast<std::size_t>(p_cur.size());
  const std::size_t total = n_prev + n_cur;

  EnsembleOutput out;
  Eigen::Index arg = 0;
  out.p_max = p_prev.maxCoeff(&arg);  // first maximal index
  out.y_max = static_cast<std::size_t>(arg);
  out.epsilon = epsilon(out.p_max, n_cur, total);

  const double scale = static_cast<double>(n_prev - 1) / static_cast<double>(total - 1);
  out.probs.resize(static_cast<Eigen::Index>(total));
  out.probs.head(p_prev.size()) = p_prev * scale;
  out.probs(arg) = out.p_max;
  out.probs.tail(p_cur.size()) = p_cur * out.epsilon;
  return out;
}

Matrix q_predict_columns(const Matrix& p_prev, const Matrix& p_cur) {
  if (p_prev.cols() != p_cur.cols()) throw InvalidInput("q_predict_columns: batch size mismatch");
  Matrix out(p_prev.rows() + p_cur.rows(), p_prev.cols());
  for (Eigen::Index j = 0; j < p_prev.cols(); ++j)
    out.col(j) = q_predict(p_prev.col(j), p_cur.col(j)).probs;
  return out;
}

}  // namespace gdcl::ensemble

#pragma once

#include "gdcl/common.hpp"

// Ensemble teacher over all classes seen so far, built from the previous
// model's distribution over old classes and the current-task teacher's
// distribution over new classes.
//
// With p_max / y_max the previous model's top probability / class, the output
// keeps p_max on y_max, rescales the remaining old classes so they share
// 1 - p_max - eps, and gives the new classes eps * p_cur, where
//
//   eps = (1 - p_max) |T_t| / (|T_1:t| - 1)
//
// is the mass that makes the expected probability equal across all
// non-top classes.
namespace gdcl::ensemble {

struct EnsembleOutput {
  Vector probs;  // previous classes first, then current-task classes
  double epsilon = 0.0;
  std::size_t y_max = 0;
  double p_max = 0.0;
};

double epsilon(double p_max, std::size_t cur_size, std::size_t total_size);

// Argmax ties resolve to the lowest class index. The old-class rescale factor
// (1 - p_max - eps) / (1 - p_max) simplifies to (|T_1:t-1| - 1) / (|T_1:t| - 1)
// and is evaluated in that form, so p_max = 1 needs no special casing: the
// remaining old classes then carry zero mass, the limit of the quotient.
EnsembleOutput q_predict(const Vector& p_prev, const Vector& p_cur);

// Column-wise q_predict; returns probabilities (|T_1:t| x batch).
Matrix q_predict_columns(const Matrix& p_prev, const Matrix& p_cur);

}  // namespace gdcl::ensemble

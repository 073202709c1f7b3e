#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "gdcl/metrics.hpp"
#include "gdcl/nnet.hpp"
#include "gdcl/sampler.hpp"

namespace oracle {

using gdcl::Matrix;
using gdcl::Vector;

struct GradientReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

// Central differences of `loss` with respect to every parameter value of
// `model`, compared against `analytic`. The relative error of an entry is
// |a - n| / max(|a|, |n|, floor); the floor keeps derivatives that are zero
// up to rounding from dividing noise by noise.
inline GradientReport check_gradient(gdcl::nnet::Model model, const gdcl::nnet::ParamSet& analytic,
                                     const std::function<double(const gdcl::nnet::Model&)>& loss,
                                     double step = 1e-5, double floor = 1e-7) {
  GradientReport report;
  std::vector<double> numeric;
  auto& params = model.mutable_params();
  params.for_each([&](const std::string&, Eigen::Ref<Matrix> p) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double saved = p.data()[i];
      p.data()[i] = saved + step;
      const double up = loss(model);
      p.data()[i] = saved - step;
      const double down = loss(model);
      p.data()[i] = saved;
      numeric.push_back((up - down) / (2 * step));
    }
  });
  std::size_t k = 0;
  analytic.for_each([&](const std::string&, const Eigen::Ref<const Matrix>& g) {
    for (Eigen::Index i = 0; i < g.size(); ++i, ++k) {
      const double a = g.data()[i], n = numeric[k];
      const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
      report.max_relative_error = std::max(report.max_relative_error, err);
      ++report.checked;
    }
  });
  return report;
}

struct Scored {
  std::size_t y_hat;
  double p_hat;
  std::uint64_t arrival;
};

// Per predicted class, the top `cap` items by probability (earlier arrival
// first among equals), reported in arrival order.
inline std::vector<std::vector<Scored>> top_cap_per_class(const std::vector<Scored>& items, std::size_t num_classes,
                                                          std::size_t cap) {
  std::vector<std::vector<Scored>> out(num_classes);
  for (const auto& s : items) out[s.y_hat].push_back(s);
  for (auto& bucket : out) {
    std::sort(bucket.begin(), bucket.end(), [](const Scored& a, const Scored& b) {
      return a.p_hat != b.p_hat ? a.p_hat > b.p_hat : a.arrival < b.arrival;
    });
    if (bucket.size() > cap) bucket.resize(cap);
    std::sort(bucket.begin(), bucket.end(), [](const Scored& a, const Scored& b) { return a.arrival < b.arrival; });
  }
  return out;
}

// Direct transcription of the size-weighted double sums.
inline double acc(const gdcl::metrics::AccuracyMatrix& m) {
  const auto& n = m.task_sizes();
  const std::size_t t = n.size();
  double outer = 0.0;
  for (std::size_t s = 2; s <= t; ++s) {
    double seen = 0.0;
    for (std::size_t q = 1; q <= s; ++q) seen += static_cast<double>(n[q - 1]);
    for (std::size_t r = 1; r <= s; ++r) outer += static_cast<double>(n[r - 1]) / seen * m.at(r, s);
  }
  return outer / static_cast<double>(t - 1);
}

inline double fgt(const gdcl::metrics::AccuracyMatrix& m) {
  const auto& n = m.task_sizes();
  const std::size_t t = n.size();
  double outer = 0.0;
  for (std::size_t s = 2; s <= t; ++s) {
    double seen = 0.0;
    for (std::size_t q = 1; q <= s; ++q) seen += static_cast<double>(n[q - 1]);
    for (std::size_t r = 1; r < s; ++r) outer += static_cast<double>(n[r - 1]) / seen * (m.at(r, r) - m.at(r, s));
  }
  return outer / static_cast<double>(t - 1);
}

}  // namespace oracle

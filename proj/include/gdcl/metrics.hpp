#pragma once

#include <iosfwd>
#include <map>
#include <utility>
#include <vector>

#include "gdcl/dataset.hpp"
#include "gdcl/nnet.hpp"

// Accuracy bookkeeping across stages. Indices are 1-based: entry (r, s) is the
// accuracy on task r's test set of the model after stage s, defined for r <= s.
namespace gdcl::metrics {

class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::vector<std::size_t> task_sizes);

  std::size_t num_tasks() const noexcept { return task_sizes_.size(); }
  const std::vector<std::size_t>& task_sizes() const noexcept { return task_sizes_; }

  void set(std::size_t r, std::size_t s, double accuracy);
  double at(std::size_t r, std::size_t s) const;
  bool has(std::size_t r, std::size_t s) const;
  // True once every entry with r <= s <= num_tasks() is set.
  bool complete() const;

  // The leading t x t block (stages 1..t only).
  AccuracyMatrix truncated(std::size_t t) const;

  bool operator==(const AccuracyMatrix&) const = default;

 private:
  void check_index(std::size_t r, std::size_t s) const;

  std::vector<std::size_t> task_sizes_;
  std::map<std::pair<std::size_t, std::size_t>, double> entries_;
};

// Fraction of `test_set` whose argmax over every head of `model` equals the label.
// Each label present must occur equally often.
double task_accuracy(const nnet::Model& model, const LabeledSet& test_set);

// Class-count weighted averages over stages 2..t. Both refuse t < 2: a
// single stage is not incremental and has nothing to average.
double acc(const AccuracyMatrix& m);
double fgt(const AccuracyMatrix& m);

// Header `r,s,accuracy`, one row per defined entry ordered by s then r.
void write_csv(std::ostream& out, const AccuracyMatrix& m);
// Task sizes are not stored in the CSV and must be supplied.
AccuracyMatrix read_csv(std::istream& in, std::vector<std::size_t> task_sizes);

}  // namespace gdcl::metrics

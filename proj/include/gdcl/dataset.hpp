#pragma once

#include <fstream>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdcl/common.hpp"

namespace gdcl {

// Labeled examples; inputs are stored one per column.
struct LabeledSet {
  Matrix inputs;
  std::vector<std::size_t> labels;

  LabeledSet() = default;
  LabeledSet(Matrix x, std::vector<std::size_t> y);

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(inputs.rows()); }
  bool empty() const noexcept { return labels.empty(); }

  LabeledSet subset(std::span<const std::size_t> indices) const;

  // Count of each label in [0, num_classes).
  std::vector<std::size_t> class_counts(std::size_t num_classes) const;

  bool operator==(const LabeledSet& other) const;
};

// Concatenation; either side may be empty.
LabeledSet concat(const LabeledSet& a, const LabeledSet& b);

// Horizontal stack of two input matrices with matching row count (empty allowed).
Matrix hstack(const Matrix& a, const Matrix& b);

// Pull-based source of unlabeled feature vectors. nullopt signals exhaustion.
class UnlabeledStream {
 public:
  virtual ~UnlabeledStream() = default;
  virtual std::optional<Vector> next() = 0;
};

// Finite in-memory stream over the columns of a matrix.
class MatrixStream final : public UnlabeledStream {
 public:
  explicit MatrixStream(Matrix items) : items_(std::move(items)) {}
  std::optional<Vector> next() override;
  std::size_t pulled() const noexcept { return cursor_; }

 private:
  Matrix items_;
  std::size_t cursor_ = 0;
};

// File-backed stream: CSV with a header row `x0,...,x{d-1}` and one example per line.
class CsvStream final : public UnlabeledStream {
 public:
  explicit CsvStream(const std::string& path);
  std::optional<Vector> next() override;
  std::size_t dim() const noexcept { return dim_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t dim_ = 0;
  std::size_t line_ = 1;
};

// CSV layout for labeled sets: header `x0,...,x{d-1},label`, one example per line,
// values printed with 17 significant digits so a round trip is exact.
void write_csv(std::ostream& out, const LabeledSet& set);
LabeledSet read_labeled_csv(std::istream& in);

// Same layout without the label column, as read by CsvStream.
void write_unlabeled_csv(std::ostream& out, const Matrix& inputs);

}  // namespace gdcl

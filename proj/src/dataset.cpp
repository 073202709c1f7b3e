#include "gdcl/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace gdcl {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("csv line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

void write_number(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

void write_header(std::ostream& out, std::size_t dim, bool with_label) {
  for (std::size_t i = 0; i < dim; ++i) out << (i ? "," : "") << 'x' << i;
  if (with_label) out << (dim ? "," : "") << "label";
  out << '\n';
}

}  // namespace

LabeledSet::LabeledSet(Matrix x, std::vector<std::size_t> y)
    : inputs(std::move(x)), labels(std::move(y)) {
  if (static_cast<std::size_t>(inputs.cols()) != labels.size())
    throw InvalidInput("LabeledSet: " + std::to_string(inputs.cols()) + " inputs but " +
                       std::to_string(labels.size()) + " labels");
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> indices) const {
  LabeledSet out;
  out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(indices.size()));
  out.labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= size()) throw InvalidInput("LabeledSet::subset: index out of range");
    out.inputs.col(static_cast<Eigen::Index>(j)) = inputs.col(static_cast<Eigen::Index>(indices[j]));
    out.labels.push_back(labels[indices[j]]);
  }
  return out;
}

std::vector<std::size_t> LabeledSet::class_counts(std::size_t num_classes) const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (auto y : labels) {
    if (y >= num_classes) throw InvalidInput("class_counts: label out of range");
    ++counts[y];
  }
  return counts;
}

bool LabeledSet::operator==(const LabeledSet& other) const {
  return labels == other.labels && inputs.rows() == other.inputs.rows() &&
         inputs.cols() == other.inputs.cols() && inputs == other.inputs;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  if (a.cols() == 0) return b;
  if (b.cols() == 0) return a;
  if (a.rows() != b.rows()) throw InvalidInput("hstack: dimension mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

LabeledSet concat(const LabeledSet& a, const LabeledSet& b) {
  LabeledSet out;
  out.inputs = hstack(a.inputs, b.inputs);
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

std::optional<Vector> MatrixStream::next() {
  if (cursor_ >= static_cast<std::size_t>(items_.cols())) return std::nullopt;
  return Vector(items_.col(static_cast<Eigen::Index>(cursor_++)));
}

CsvStream::CsvStream(const std::string& path) : in_(path), path_(path) {
  if (!in_) throw InvalidInput("cannot open stream file: " + path);
  std::string header;
  if (!std::getline(in_, header)) throw InvalidInput(path + ": missing header");
  dim_ = split_csv(header).size();
  if (dim_ == 0) throw InvalidInput(path + ": empty header");
}

std::optional<Vector> CsvStream::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != dim_)
      throw InvalidInput(path_ + ":" + std::to_string(line_) + ": expected " +
                         std::to_string(dim_) + " fields");
    Vector x(static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < dim_; ++i) x(static_cast<Eigen::Index>(i)) = parse_double(fields[i], line_);
    return x;
  }
  return std::nullopt;
}

void write_csv(std::ostream& out, const LabeledSet& set) {
  write_header(out, set.dim(), true);
  for (std::size_t j = 0; j < set.size(); ++j) {
    for (std::size_t i = 0; i < set.dim(); ++i) {
      if (i) out << ',';
      write_number(out, set.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out << ',' << set.labels[j] << '\n';
  }
}

void write_unlabeled_csv(std::ostream& out, const Matrix& inputs) {
  write_header(out, static_cast<std::size_t>(inputs.rows()), false);
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
      if (i) out << ',';
      write_number(out, inputs(i, j));
    }
    out << '\n';
  }
}

LabeledSet read_labeled_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("labeled csv: missing header");
  const auto header = split_csv(line);
  if (header.empty() || header.back() != "label") throw InvalidInput("labeled csv: last column must be 'label'");
  const std::size_t dim = header.size() - 1;

  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != dim + 1)
      throw InvalidInput("labeled csv line " + std::to_string(lineno) + ": wrong field count");
    for (std::size_t i = 0; i < dim; ++i) values.push_back(parse_double(fields[i], lineno));
    std::size_t y = 0;
    const auto& f = fields.back();
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), y);
    if (ec != std::errc{} || ptr != f.data() + f.size())
      throw InvalidInput("labeled csv line " + std::to_string(lineno) + ": bad label '" + f + "'");
    labels.push_back(y);
  }
  Matrix x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j)
    for (std::size_t i = 0; i < dim; ++i)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[j * dim + i];
  return LabeledSet(std::move(x), std::move(labels));
}

}  // namespace gdcl

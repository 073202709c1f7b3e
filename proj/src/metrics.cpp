#include "gdcl/metrics.hpp"

#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

namespace gdcl::metrics {

AccuracyMatrix::AccuracyMatrix(std::vector<std::size_t> task_sizes) : task_sizes_(std::move(task_sizes)) {
  for (auto n : task_sizes_)
    if (n == 0) throw InvalidInput("accuracy matrix: task sizes must be positive");
}

void AccuracyMatrix::check_index(std::size_t r, std::size_t s) const {
  if (r < 1 || r > s || s > num_tasks())
    throw InvalidInput("accuracy matrix: entry (" + std::to_string(r) + "," + std::to_string(s) +
                       ") is outside 1 <= r <= s <= " + std::to_string(num_tasks()));
}

void AccuracyMatrix::set(std::size_t r, std::size_t s, double accuracy) {
  check_index(r, s);
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw InvalidInput("accuracy matrix: entries must lie in [0, 1]");
  entries_[{r, s}] = accuracy;
}

double AccuracyMatrix::at(std::size_t r, std::size_t s) const {
  check_index(r, s);
  auto it = entries_.find({r, s});
  if (it == entries_.end())
    throw InvalidInput("accuracy matrix: entry (" + std::to_string(r) + "," + std::to_string(s) + ") not set");
  return it->second;
}

bool AccuracyMatrix::has(std::size_t r, std::size_t s) const {
  return entries_.count({r, s}) > 0;
}

bool AccuracyMatrix::complete() const {
  return entries_.size() == num_tasks() * (num_tasks() + 1) / 2;
}

AccuracyMatrix AccuracyMatrix::truncated(std::size_t t) const {
  if (t > num_tasks()) throw InvalidInput("accuracy matrix: cannot truncate beyond its size");
  AccuracyMatrix out(std::vector<std::size_t>(task_sizes_.begin(), task_sizes_.begin() + static_cast<std::ptrdiff_t>(t)));
  for (const auto& [key, value] : entries_)
    if (key.second <= t) out.entries_.emplace(key, value);
  return out;
}

double task_accuracy(const nnet::Model& model, const LabeledSet& test_set) {
  if (test_set.empty()) throw InvalidInput("task_accuracy: empty test set");
  std::unordered_map<std::size_t, std::size_t> counts;
  for (auto y : test_set.labels) ++counts[y];
  const std::size_t expected = counts.begin()->second;
  for (const auto& [cls, n] : counts)
    if (n != expected) throw InvalidInput("task_accuracy: test classes must have equal counts");
  for (const auto& [cls, n] : counts)
    if (cls >= model.total_classes())
      throw InvalidInput("task_accuracy: label " + std::to_string(cls) + " not covered by the model heads");

  const Matrix logits = nnet::forward(model, test_set.inputs, model.all_heads());
  std::size_t correct = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::Index arg = 0;
    logits.col(j).maxCoeff(&arg);
    if (static_cast<std::size_t>(arg) == test_set.labels[static_cast<std::size_t>(j)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

namespace {

void require_incremental(const AccuracyMatrix& m) {
  if (m.num_tasks() < 2) throw InvalidInput("metrics need at least two stages; a single stage is not incremental");
}

}  // namespace

double acc(const AccuracyMatrix& m) {
  require_incremental(m);
  const auto& sizes = m.task_sizes();
  double total = 0.0;
  std::size_t seen = sizes[0];
  for (std::size_t s = 2; s <= m.num_tasks(); ++s) {
    seen += sizes[s - 1];
    double stage = 0.0;
    for (std::size_t r = 1; r <= s; ++r) stage += static_cast<double>(sizes[r - 1]) * m.at(r, s);
    total += stage / static_cast<double>(seen);
  }
  return total / static_cast<double>(m.num_tasks() - 1);
}

double fgt(const AccuracyMatrix& m) {
  require_incremental(m);
  const auto& sizes = m.task_sizes();
  double total = 0.0;
  std::size_t seen = sizes[0];
  for (std::size_t s = 2; s <= m.num_tasks(); ++s) {
    seen += sizes[s - 1];
    double stage = 0.0;
    for (std::size_t r = 1; r < s; ++r) stage += static_cast<double>(sizes[r - 1]) * (m.at(r, r) - m.at(r, s));
    total += stage / static_cast<double>(seen);
  }
  return total / static_cast<double>(m.num_tasks() - 1);
}

void write_csv(std::ostream& out, const AccuracyMatrix& m) {
  out << "r,s,accuracy\n";
  char buf[64];
  for (std::size_t s = 1; s <= m.num_tasks(); ++s)
    for (std::size_t r = 1; r <= s; ++r) {
      if (!m.has(r, s)) continue;
      std::snprintf(buf, sizeof buf, "%.17g", m.at(r, s));
      out << r << ',' << s << ',' << buf << '\n';
    }
}

AccuracyMatrix read_csv(std::istream& in, std::vector<std::size_t> task_sizes) {
  AccuracyMatrix m(std::move(task_sizes));
  std::string line;
  if (!std::getline(in, line) || line != "r,s,accuracy") throw InvalidInput("accuracy csv: bad header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string r, s, a;
    if (!std::getline(row, r, ',') || !std::getline(row, s, ',') || !std::getline(row, a))
      throw InvalidInput("accuracy csv: malformed line " + std::to_string(lineno));
    try {
      m.set(std::stoul(r), std::stoul(s), std::stod(a));
    } catch (const std::logic_error&) {
      throw InvalidInput("accuracy csv: malformed number on line " + std::to_string(lineno));
    }
  }
  return m;
}

}  // namespace gdcl::metrics

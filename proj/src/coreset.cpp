#include "gdcl/coreset.hpp"

#include <algorithm>
#include <map>

namespace gdcl {

Coreset update_coreset(const LabeledSet& d_trn, std::size_t n_c, std::span<const std::size_t> classes, Rng& rng) {
  if (classes.empty()) throw InvalidInput("update_coreset: no classes");
  const std::size_t quota = n_c / classes.size();

  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (auto k : classes) by_class[k];
  for (std::size_t i = 0; i < d_trn.size(); ++i) {
    auto it = by_class.find(d_trn.labels[i]);
    if (it != by_class.end()) it->second.push_back(i);
  }

  std::vector<std::size_t> chosen;
  for (auto k : classes) {
    auto& pool = by_class[k];
    const std::size_t take = std::min(quota, pool.size());
    // Partial Fisher-Yates: the first `take` slots become a uniform sample.
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  }

  Coreset out;
  out.examples = d_trn.subset(chosen);
  out.capacity = n_c;
  out.classes.assign(classes.begin(), classes.end());
  return out;
}

}  // namespace gdcl

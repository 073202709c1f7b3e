#pragma once

#include <span>
#include <vector>

#include "gdcl/dataset.hpp"

namespace gdcl {

// Class-balanced replay memory carried between stages.
struct Coreset {
  LabeledSet examples;
  std::size_t capacity = 0;
  std::vector<std::size_t> classes;

  std::size_t size() const noexcept { return examples.size(); }
};

// Keeps floor(n_c / |classes|) examples of each class, drawn uniformly without
// replacement from `d_trn`; a class with fewer examples contributes all of
// them. The remainder of the division is not redistributed. Output is grouped
// by class in the order of `classes`, each group in original `d_trn` order.
Coreset update_coreset(const LabeledSet& d_trn, std::size_t n_c, std::span<const std::size_t> classes, Rng& rng);

}  // namespace gdcl

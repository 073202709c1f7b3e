#pragma once

#include <optional>
#include <vector>

#include "gdcl/dataset.hpp"
#include "gdcl/nnet.hpp"

// Builds the per-stage external set from an unlabeled stream.
//
// The first ceil(ood_ratio * n_d) pulls go verbatim into an OOD bucket. Every
// further pull, up to n_max pulls in total, is scored by the previous model
// and offered to the bucket of its predicted class. A bucket below its cap
// accepts; a full bucket swaps out its least probable member only when that
// member's probability is strictly lower than the candidate's. Among equal
// probabilities the earlier arrival is kept, so each bucket ends up as the
// top-cap items of its class ordered by (probability desc, arrival asc).
namespace gdcl::sampler {

struct ScoredExample {
  Vector x;
  std::size_t y_hat = 0;   // argmax under the previous model
  double p_hat = 0.0;      // max probability under the previous model
  std::uint64_t arrival = 0;  // 0-based pull index in the stream
};

struct ExternalSet {
  std::vector<std::vector<ScoredExample>> prev_bucket;  // one list per previous class, arrival order
  std::vector<Vector> ood_bucket;                       // pull order
  std::size_t n_prev_target = 0;
  std::size_t n_ood_target = 0;
  std::size_t per_class_cap = 0;
  std::size_t retrieved_count = 0;  // total stream pulls
  bool truncated = false;           // stream ran dry before n_max pulls

  std::size_t prev_size() const;
  std::size_t size() const { return ood_bucket.size() + prev_size(); }
};

struct SampleRequest {
  std::size_t n_d = 0;
  std::size_t n_max = 0;
  double ood_ratio = 0.7;
  // Scoring happens in batches of this many pulls; results do not depend on it.
  std::size_t score_batch = 512;
};

// ceil(ood_ratio * n_d), robust to representation error in the product
// (0.7 * 10 must give 7, not 8).
std::size_t ood_target(double ood_ratio, std::size_t n_d);

// `prev_model` scores over all of its heads at temperature 1. It may be null
// only when ood_ratio == 1, in which case nothing is scored.
ExternalSet sample_external(const nnet::Model* prev_model, UnlabeledStream& stream,
                            const SampleRequest& request);

// OOD inputs in pull order, then previous-class inputs by class ascending and
// arrival ascending. Labels and scores are dropped.
Matrix flatten(const ExternalSet& ext, std::size_t dim);

}  // namespace gdcl::sampler

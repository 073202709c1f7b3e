#include "gdcl/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace gdcl::sampler {

namespace {

// Heap order: the front is the member to evict first (lowest p_hat, latest arrival).
bool evicts_later(const ScoredExample& a, const ScoredExample& b) {
  if (a.p_hat != b.p_hat) return a.p_hat > b.p_hat;
  return a.arrival < b.arrival;
}

class ClassBuckets {
 public:
  ClassBuckets(std::size_t num_classes, std::size_t cap) : heaps_(num_classes), cap_(cap) {}

  void offer(ScoredExample&& cand) {
    auto& heap = heaps_[cand.y_hat];
    if (heap.size() < cap_) {
      heap.push_back(std::move(cand));
      std::push_heap(heap.begin(), heap.end(), evicts_later);
      return;
    }
    if (heap.empty() || !(heap.front().p_hat < cand.p_hat)) return;
    std::pop_heap(heap.begin(), heap.end(), evicts_later);
    heap.back() = std::move(cand);
    std::push_heap(heap.begin(), heap.end(), evicts_later);
  }

  std::vector<std::vector<ScoredExample>> release() {
    for (auto& heap : heaps_)
      std::sort(heap.begin(), heap.end(),
                [](const ScoredExample& a, const ScoredExample& b) { return a.arrival < b.arrival; });
    return std::move(heaps_);
  }

 private:
  std::vector<std::vector<ScoredExample>> heaps_;
  std::size_t cap_;
};

}  // namespace

std::size_t ExternalSet::prev_size() const {
  std::size_t n = 0;
  for (const auto& b : prev_bucket) n += b.size();
  return n;
}

std::size_t ood_target(double ood_ratio, std::size_t n_d) {
  if (!(ood_ratio >= 0.0 && ood_ratio <= 1.0)) throw InvalidConfig("ood_ratio must lie in [0, 1]");
  const double raw = ood_ratio * static_cast<double>(n_d);
  const double nearest = std::round(raw);
  const double target = std::abs(raw - nearest) < 1e-9 * std::max(1.0, raw) ? nearest : std::ceil(raw);
  return std::min(n_d, static_cast<std::size_t>(target));
}

ExternalSet sample_external(const nnet::Model* prev_model, UnlabeledStream& stream,
                            const SampleRequest& request) {
  if (request.n_d == 0) throw InvalidConfig("sample_external: n_d must be at least 1");
  if (request.n_max < request.n_d) throw InvalidConfig("sample_external: n_max must be >= n_d");
  if (request.score_batch == 0) throw InvalidConfig("sample_external: score_batch must be positive");

  ExternalSet ext;
  ext.n_ood_target = ood_target(request.ood_ratio, request.n_d);
  ext.n_prev_target = request.n_d - ext.n_ood_target;
  if (ext.n_prev_target > 0 && prev_model == nullptr)
    throw InvalidConfig("sample_external: ood_ratio < 1 requires a previous model to score the stream");

  while (ext.ood_bucket.size() < ext.n_ood_target) {
    auto x = stream.next();
    if (!x) {
      ext.truncated = true;
      ext.retrieved_count = ext.ood_bucket.size();
      return ext;
    }
    ext.ood_bucket.push_back(std::move(*x));
  }
  ext.retrieved_count = ext.ood_bucket.size();
  if (ext.n_prev_target == 0) return ext;

  const std::size_t num_classes = prev_model->total_classes();
  ext.per_class_cap = ext.n_prev_target / num_classes;
  ClassBuckets buckets(num_classes, ext.per_class_cap);
  if (ext.per_class_cap == 0) {
    ext.prev_bucket = buckets.release();
    return ext;
  }

  const auto dim = static_cast<Eigen::Index>(prev_model->input_dim());
  Matrix batch(dim, static_cast<Eigen::Index>(request.score_batch));
  // The retrieval counter starts at the OOD target, so OOD pulls count against n_max.
  std::size_t n_ret = ext.n_ood_target;
  while (n_ret < request.n_max) {
    const std::size_t want = std::min(request.score_batch, request.n_max - n_ret);
    std::size_t got = 0;
    for (; got < want; ++got) {
      auto x = stream.next();
      if (!x) break;
      if (x->size() != dim) throw InvalidInput("sample_external: stream item has wrong dimension");
      batch.col(static_cast<Eigen::Index>(got)) = *x;
    }
    if (got > 0) {
      const Matrix probs = nnet::softmax_columns(
          nnet::forward(*prev_model, batch.leftCols(static_cast<Eigen::Index>(got)), prev_model->all_heads()),
          1.0);
      for (std::size_t j = 0; j < got; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        Eigen::Index arg = 0;
        const double p = probs.col(col).maxCoeff(&arg);
        buckets.offer(ScoredExample{batch.col(col), static_cast<std::size_t>(arg), p,
                                    static_cast<std::uint64_t>(ext.retrieved_count + j)});
      }
      ext.retrieved_count += got;
      n_ret += got;
    }
    if (got < want) {
      ext.truncated = true;
      break;
    }
  }
  ext.prev_bucket = buckets.release();
  return ext;
}

Matrix flatten(const ExternalSet& ext, std::size_t dim) {
  Matrix out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(ext.size()));
  Eigen::Index col = 0;
  for (const auto& x : ext.ood_bucket) {
    if (static_cast<std::size_t>(x.size()) != dim) throw InvalidInput("flatten: dimension mismatch");
    out.col(col++) = x;
  }
  for (const auto& bucket : ext.prev_bucket)
    for (const auto& item : bucket) {
      if (static_cast<std::size_t>(item.x.size()) != dim) throw InvalidInput("flatten: dimension mismatch");
      out.col(col++) = item.x;
    }
  return out;
}

}  // namespace gdcl::sampler

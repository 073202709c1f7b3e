#pragma once

#include <memory>
#include <unordered_set>
#include <vector>

#include "gdcl/dataset.hpp"

// Synthetic class-incremental benchmark: isotropic Gaussian clusters, one per
// class, split into tasks by a seeded class permutation, plus an unbounded
// unlabeled stream mixing samples from already-seen clusters with samples from
// a separate family of OOD clusters.
//
// Global label j (the j-th class in learning order) is drawn from cluster
// class_order[j], so task t owns the contiguous labels of its head.
namespace gdcl::taskgen {

struct GeometrySpec {
  std::size_t input_dim = 8;
  std::size_t num_clusters = 20;
  double center_spread = 3.0;        // task centers uniform in [-spread, spread]^d
  double min_center_distance = 4.0;  // rejection threshold between task centers, in sigma units
  double sigma = 1.0;
  std::size_t ood_clusters = 40;
  double ood_spread = 10.0;
  double ood_min_distance = 6.0;  // from every task center, in sigma units
  double ood_sigma = 3.0;
};

struct Geometry {
  std::size_t dim = 0;
  std::vector<Vector> centers;
  double sigma = 1.0;
  std::vector<Vector> ood_centers;
  double ood_sigma = 1.0;
};

Geometry make_geometry(const GeometrySpec& spec, Rng& rng);

struct TaskLayout {
  std::size_t num_classes = 0;
  std::size_t task_size = 0;
  std::vector<std::size_t> class_order;  // label -> cluster

  std::size_t num_tasks() const;
  std::size_t task_size_of(std::size_t task) const;
  std::size_t first_label(std::size_t task) const;
  std::vector<std::size_t> task_sizes() const;
};

// Shuffles the clusters uniformly and cuts them into tasks of `task_size`
// (the last task takes any remainder).
TaskLayout make_layout(std::size_t num_classes, std::size_t task_size, Rng& rng);

struct TaskData {
  LabeledSet train;
  LabeledSet test;
  std::size_t first_label = 0;
  std::size_t num_classes = 0;
};

// Every class gets exactly per_class_train / per_class_test points.
std::vector<TaskData> make_task_sequence(const Geometry& geometry, const TaskLayout& layout,
                                         std::size_t per_class_train, std::size_t per_class_test, Rng& rng);

// Exact-bitwise set of points, used to keep stream draws off the test sets.
class PointSet {
 public:
  void insert(const Eigen::Ref<const Vector>& x);
  void insert_columns(const Matrix& xs);
  bool contains(const Eigen::Ref<const Vector>& x) const;
  std::size_t size() const noexcept { return points_.size(); }

 private:
  std::unordered_set<std::string> points_;
};

struct StreamSpec {
  double prev_like_fraction = 0.05;
  std::vector<std::size_t> seen_clusters;  // clusters that count as previously seen
  std::uint64_t seed = 0;
};

class SyntheticStream final : public UnlabeledStream {
 public:
  SyntheticStream(const Geometry& geometry, StreamSpec spec,
                  std::shared_ptr<const PointSet> excluded = nullptr);

  // Never exhausts.
  std::optional<Vector> next() override { return next_unlabeled(); }

  // With probability prev_like_fraction (and at least one seen cluster) a draw
  // from a uniformly chosen seen cluster, otherwise a draw from a uniformly
  // chosen OOD cluster. Draws that coincide with an excluded point are redrawn.
  Vector next_unlabeled();

  bool last_was_prev_like() const noexcept { return last_prev_like_; }
  std::size_t draws() const noexcept { return draws_; }
  std::size_t prev_like_draws() const noexcept { return prev_like_draws_; }

 private:
  Geometry geometry_;
  StreamSpec spec_;
  std::shared_ptr<const PointSet> excluded_;
  Rng rng_;
  bool last_prev_like_ = false;
  std::size_t draws_ = 0;
  std::size_t prev_like_draws_ = 0;
};

// Held-out OOD points (not from any stream instance) for calibration checks.
Matrix sample_ood(const Geometry& geometry, std::size_t count, Rng& rng);

}  // namespace gdcl::taskgen

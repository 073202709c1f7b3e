#include "gdcl/taskgen.hpp"

#include <algorithm>
#include <numeric>

namespace gdcl::taskgen {

namespace {

Vector uniform_point(std::size_t dim, double spread, Rng& rng) {
  std::uniform_real_distribution<double> u(-spread, spread);
  Vector x(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
  return x;
}

Vector gaussian_point(const Vector& center, double sigma, Rng& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  Vector x = center;
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += n(rng);
  return x;
}

double min_distance(const Vector& x, const std::vector<Vector>& others) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : others) best = std::min(best, (x - o).norm());
  return best;
}

constexpr int kMaxRejections = 100000;

}  // namespace

Geometry make_geometry(const GeometrySpec& spec, Rng& rng) {
  if (spec.input_dim == 0 || spec.num_clusters == 0) throw InvalidConfig("geometry: empty dimension or cluster count");
  if (!(spec.sigma > 0.0) || !(spec.ood_sigma > 0.0)) throw InvalidConfig("geometry: sigmas must be positive");

  Geometry g;
  g.dim = spec.input_dim;
  g.sigma = spec.sigma;
  g.ood_sigma = spec.ood_sigma;
  int attempts = 0;
  while (g.centers.size() < spec.num_clusters) {
    Vector c = uniform_point(spec.input_dim, spec.center_spread, rng);
    if (min_distance(c, g.centers) >= spec.min_center_distance * spec.sigma) {
      g.centers.push_back(std::move(c));
    } else if (++attempts > kMaxRejections) {
      throw InvalidConfig("geometry: cannot place task clusters; increase center_spread or lower min_center_distance");
    }
  }
  attempts = 0;
  while (g.ood_centers.size() < spec.ood_clusters) {
    Vector c = uniform_point(spec.input_dim, spec.ood_spread, rng);
    if (min_distance(c, g.centers) >= spec.ood_min_distance * spec.sigma) {
      g.ood_centers.push_back(std::move(c));
    } else if (++attempts > kMaxRejections) {
      throw InvalidConfig("geometry: cannot place OOD clusters; increase ood_spread");
    }
  }
  return g;
}

std::size_t TaskLayout::num_tasks() const {
  return task_size == 0 ? 0 : (num_classes + task_size - 1) / task_size;
}

std::size_t TaskLayout::task_size_of(std::size_t task) const {
  if (task >= num_tasks()) throw InvalidInput("task index out of range");
  return std::min(task_size, num_classes - task * task_size);
}

std::size_t TaskLayout::first_label(std::size_t task) const {
  if (task >= num_tasks()) throw InvalidInput("task index out of range");
  return task * task_size;
}

std::vector<std::size_t> TaskLayout::task_sizes() const {
  std::vector<std::size_t> sizes;
  for (std::size_t t = 0; t < num_tasks(); ++t) sizes.push_back(task_size_of(t));
  return sizes;
}

TaskLayout make_layout(std::size_t num_classes, std::size_t task_size, Rng& rng) {
  if (num_classes == 0 || task_size == 0 || task_size > num_classes)
    throw InvalidConfig("layout: need 1 <= task_size <= num_classes");
  TaskLayout layout{num_classes, task_size, std::vector<std::size_t>(num_classes)};
  std::iota(layout.class_order.begin(), layout.class_order.end(), 0);
  for (std::size_t i = num_classes; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(layout.class_order[i - 1], layout.class_order[pick(rng)]);
  }
  return layout;
}

std::vector<TaskData> make_task_sequence(const Geometry& geometry, const TaskLayout& layout,
                                         std::size_t per_class_train, std::size_t per_class_test, Rng& rng) {
  if (per_class_train == 0 || per_class_test == 0) throw InvalidConfig("task sequence: per-class counts must be positive");
  if (layout.class_order.size() != layout.num_classes) throw InvalidConfig("task sequence: malformed layout");
  for (auto c : layout.class_order)
    if (c >= geometry.centers.size()) throw InvalidConfig("task sequence: layout references a missing cluster");

  const auto dim = static_cast<Eigen::Index>(geometry.dim);
  std::vector<TaskData> tasks;
  for (std::size_t t = 0; t < layout.num_tasks(); ++t) {
    TaskData task;
    task.first_label = layout.first_label(t);
    task.num_classes = layout.task_size_of(t);
    auto fill = [&](LabeledSet& set, std::size_t per_class) {
      set.inputs.resize(dim, static_cast<Eigen::Index>(per_class * task.num_classes));
      set.labels.clear();
      Eigen::Index col = 0;
      for (std::size_t k = 0; k < task.num_classes; ++k) {
        const std::size_t label = task.first_label + k;
        const auto& center = geometry.centers[layout.class_order[label]];
        for (std::size_t i = 0; i < per_class; ++i) {
          set.inputs.col(col++) = gaussian_point(center, geometry.sigma, rng);
          set.labels.push_back(label);
        }
      }
    };
    fill(task.train, per_class_train);
    fill(task.test, per_class_test);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

void PointSet::insert(const Eigen::Ref<const Vector>& x) {
  points_.emplace(reinterpret_cast<const char*>(x.data()), static_cast<std::size_t>(x.size()) * sizeof(double));
}

void PointSet::insert_columns(const Matrix& xs) {
  for (Eigen::Index j = 0; j < xs.cols(); ++j) insert(xs.col(j));
}

bool PointSet::contains(const Eigen::Ref<const Vector>& x) const {
  return points_.count(std::string(reinterpret_cast<const char*>(x.data()),
                                   static_cast<std::size_t>(x.size()) * sizeof(double))) > 0;
}

SyntheticStream::SyntheticStream(const Geometry& geometry, StreamSpec spec, std::shared_ptr<const PointSet> excluded)
    : geometry_(geometry), spec_(std::move(spec)), excluded_(std::move(excluded)), rng_(spec_.seed) {
  if (!(spec_.prev_like_fraction >= 0.0 && spec_.prev_like_fraction <= 1.0))
    throw InvalidConfig("stream: prev_like_fraction must lie in [0, 1]");
  for (auto c : spec_.seen_clusters)
    if (c >= geometry_.centers.size()) throw InvalidConfig("stream: unknown seen cluster");
  if (geometry_.ood_centers.empty() && spec_.prev_like_fraction < 1.0)
    throw InvalidConfig("stream: no OOD clusters to draw from");
}

Vector SyntheticStream::next_unlabeled() {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  while (true) {
    const bool prev_like = !spec_.seen_clusters.empty() && coin(rng_) < spec_.prev_like_fraction;
    Vector x;
    if (prev_like) {
      std::uniform_int_distribution<std::size_t> pick(0, spec_.seen_clusters.size() - 1);
      x = gaussian_point(geometry_.centers[spec_.seen_clusters[pick(rng_)]], geometry_.sigma, rng_);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, geometry_.ood_centers.size() - 1);
      x = gaussian_point(geometry_.ood_centers[pick(rng_)], geometry_.ood_sigma, rng_);
    }
    if (excluded_ && excluded_->contains(x)) continue;
    last_prev_like_ = prev_like;
    ++draws_;
    if (prev_like) ++prev_like_draws_;
    return x;
  }
}

Matrix sample_ood(const Geometry& geometry, std::size_t count, Rng& rng) {
  if (geometry.ood_centers.empty()) throw InvalidConfig("sample_ood: no OOD clusters");
  Matrix out(static_cast<Eigen::Index>(geometry.dim), static_cast<Eigen::Index>(count));
  std::uniform_int_distribution<std::size_t> pick(0, geometry.ood_centers.size() - 1);
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    out.col(j) = gaussian_point(geometry.ood_centers[pick(rng)], geometry.ood_sigma, rng);
  return out;
}

}  // namespace gdcl::taskgen

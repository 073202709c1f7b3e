#include "doctest.h"
#include "gdcl/ensemble.hpp"
#include "gdcl/nnet.hpp"

using namespace gdcl;
using namespace gdcl::ensemble;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Vector random_distribution(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> z(0.0, 2.0);
  Vector logits(n);
  for (Eigen::Index i = 0; i < n; ++i) logits(i) = z(rng);
  return nnet::softmax_temperature(logits, 1.0);
}

}  // namespace

TEST_CASE("epsilon") {
  CHECK(epsilon(1.0, 10, 20) == 0.0);
  CHECK(epsilon(0.8, 10, 20) == doctest::Approx(2.0 / 19.0).epsilon(1e-14));
  CHECK(epsilon(0.8, 10, 20) == doctest::Approx(0.10526).epsilon(1e-4));
  // One previous class: the current task takes everything but p_max.
  CHECK(epsilon(0.35, 4, 5) == doctest::Approx(0.65).epsilon(1e-14));
  CHECK_THROWS_AS(epsilon(0.5, 1, 1), InvalidInput);
  CHECK_THROWS_AS(epsilon(0.0, 1, 3), InvalidInput);
}

TEST_CASE("two-by-two fixture") {
  const auto out = q_predict(vec({0.6, 0.4}), vec({0.7, 0.3}));
  CHECK(out.epsilon == doctest::Approx(4.0 / 15.0).epsilon(1e-14));
  CHECK(out.y_max == 0);
  CHECK(out.p_max == 0.6);
  CHECK(out.probs(0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(out.probs(1) == doctest::Approx(0.13333).epsilon(1e-4));
  CHECK(out.probs(2) == doctest::Approx(0.18667).epsilon(1e-4));
  CHECK(out.probs(3) == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(out.probs.sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("one-hot previous prediction leaves nothing for the current task") {
  const auto out = q_predict(vec({0, 1, 0}), vec({0.5, 0.5}));
  CHECK(out.epsilon == 0.0);
  CHECK(out.probs == vec({0, 1, 0, 0, 0}));
}

TEST_CASE("argmax ties resolve to the lowest index") {
  const auto out = q_predict(vec({0.2, 0.4, 0.4}), vec({1.0}));
  CHECK(out.y_max == 1);
  CHECK(out.probs(1) == 0.4);
}

TEST_CASE("q_predict rejects inputs that are not distributions") {
  CHECK_THROWS_AS(q_predict(vec({0.5, 0.6}), vec({1.0})), InvalidInput);
  CHECK_THROWS_AS(q_predict(vec({1.0}), vec({0.2, 0.2})), InvalidInput);
  CHECK_THROWS_AS(q_predict(Vector(0), vec({1.0})), InvalidInput);
}

TEST_CASE("ensemble invariants on random inputs") {
  Rng rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::Index n_prev = 1 + static_cast<Eigen::Index>(rng() % 6);
    const Eigen::Index n_cur = 1 + static_cast<Eigen::Index>(rng() % 6);
    const Vector p = random_distribution(n_prev, rng), c = random_distribution(n_cur, rng);
    const auto out = q_predict(p, c);
    CHECK(std::abs(out.probs.sum() - 1.0) <= 1e-9);
    CHECK(out.probs(static_cast<Eigen::Index>(out.y_max)) == p.maxCoeff());
    CHECK(out.probs.tail(n_cur).sum() == doctest::Approx(out.epsilon).epsilon(1e-9));
    CHECK(out.probs.head(n_prev).sum() == doctest::Approx(1.0 - out.epsilon).epsilon(1e-9));
    if (out.epsilon > 0) CHECK((out.probs.tail(n_cur) / out.epsilon).isApprox(c, 1e-9));
    // Raising p_max never adds current-task mass.
    const double bumped = std::min(1.0, out.p_max + 0.1);
    CHECK(epsilon(bumped, static_cast<std::size_t>(n_cur), static_cast<std::size_t>(n_prev + n_cur)) <= out.epsilon);
  }
}

TEST_CASE("column-wise ensemble matches the per-example version") {
  Rng rng(2);
  Matrix p(3, 4), c(2, 4);
  for (int j = 0; j < 4; ++j) {
    p.col(j) = random_distribution(3, rng);
    c.col(j) = random_distribution(2, rng);
  }
  const Matrix q = q_predict_columns(p, c);
  for (int j = 0; j < 4; ++j) CHECK(q.col(j) == q_predict(p.col(j), c.col(j)).probs);
}

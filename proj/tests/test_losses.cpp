#include <cmath>

#include "doctest.h"
#include "gdcl/losses.hpp"

using namespace gdcl;
using namespace gdcl::losses;

namespace {

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Matrix random_logits(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 3.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Matrix random_distribution(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  return nnet::softmax_columns(random_logits(rows, cols, rng), 1.0);
}

// Central differences of a scalar function of the logits.
template <typename F>
Matrix numeric_grad(const Matrix& z, F f, double h = 1e-6) {
  Matrix g(z.rows(), z.cols());
  Matrix w = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    w.data()[i] = z.data()[i] + h;
    const double up = f(w);
    w.data()[i] = z.data()[i] - h;
    const double down = f(w);
    w.data()[i] = z.data()[i];
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("cls loss values") {
  const std::vector<std::size_t> y{0};
  CHECK(cls_loss(col({50, 0, 0}), y).value < 1e-20);
  CHECK(cls_loss(col({0, 0, 0, 0}), y).value == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(cls_loss(col({1, 2, 3}), y).value == doctest::Approx(std::log(std::exp(1) + std::exp(2) + std::exp(3)) - 1).epsilon(1e-14));
  CHECK_THROWS_AS(cls_loss(col({0, 0}), std::vector<std::size_t>{2}), InvalidInput);
  CHECK_THROWS_AS(cls_loss(col({0, 0}), std::vector<std::size_t>{0, 1}), InvalidInput);
}

TEST_CASE("cls loss stays finite for extremely confident wrong logits") {
  const auto lv = cls_loss(col({1000, -1000}), std::vector<std::size_t>{1});
  CHECK(lv.value == doctest::Approx(2000.0));
  CHECK(std::isfinite(lv.grad.sum()));
}

TEST_CASE("weight 2 equals feeding the example twice") {
  Rng rng(1);
  const Matrix z = random_logits(3, 2, rng);
  Matrix dup(3, 3);
  dup << z.col(0), z.col(0), z.col(1);
  const std::vector<std::size_t> y2{2, 1}, y3{2, 2, 1};
  const std::vector<double> w{2.0, 1.0};
  const auto weighted = cls_loss(z, y2, w);
  const auto twice = cls_loss(dup, y3);
  // Mean over 2 rows vs 3 rows: the totals agree once rescaled by the row count.
  CHECK(weighted.value * 2 == doctest::Approx(twice.value * 3).epsilon(1e-14));
  CHECK((weighted.grad.col(0) * 2).isApprox((twice.grad.col(0) + twice.grad.col(1)) * 3, 1e-13));
}

TEST_CASE("dst loss values") {
  // Student equal to a uniform teacher: the teacher's entropy.
  CHECK(dst_loss(col({0, 0}), col({0.5, 0.5}), 2.0).value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  // A uniform student costs ln 2 whatever the teacher.
  CHECK(dst_loss(col({0, 0}), col({0.75, 0.25}), 1.0).value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  // One-hot teacher reduces to cls on its argmax.
  const Matrix z = col({0.3, -1.2, 2.0});
  const auto d = dst_loss(z, col({0, 1, 0}), 1.0);
  const auto c = cls_loss(z, std::vector<std::size_t>{1});
  CHECK(d.value == doctest::Approx(c.value).epsilon(1e-14));
  CHECK(d.grad.isApprox(c.grad, 1e-14));
  CHECK_THROWS_AS(dst_loss(z, col({0.5, 0.5}), 1.0), InvalidInput);
  CHECK_THROWS_AS(dst_loss(z, col({0, 1, 0}), 0.0), InvalidInput);
}

TEST_CASE("dst loss is bounded below by the smoothed teacher entropy") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const double gamma = trial % 2 ? 2.0 : 1.0;
    const Matrix teacher = random_distribution(4, 1, rng);
    const Matrix student = random_logits(4, 1, rng);
    const double entropy = -(teacher.array() * teacher.array().log()).sum();
    CHECK(dst_loss(student, teacher, gamma).value >= entropy - 1e-12);
    // Equality when the smoothed student matches: logits gamma * log q.
    const Matrix matched = gamma * teacher.array().log().matrix();
    CHECK(dst_loss(matched, teacher, gamma).value == doctest::Approx(entropy).epsilon(1e-12));
  }
}

TEST_CASE("cnf loss") {
  CHECK(cnf_loss(col({0, 0, 0, 0})).value == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  const double lse = 10 + std::log1p(3 * std::exp(-10.0));
  const auto peaked = cnf_loss(col({10, 0, 0, 0}));
  CHECK(peaked.value == doctest::Approx(lse - 2.5).epsilon(1e-14));
  CHECK(peaked.value > std::log(4.0));
  CHECK(cnf_loss(col({3, 3, 3})).grad.norm() < 1e-10);
}

TEST_CASE("loss gradients match central differences") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix z = random_logits(5, 4, rng);
    std::vector<std::size_t> y{0, 4, 2, 2};
    std::vector<double> w{0.5, 1.0, 2.0, 0.0};
    const Matrix q = random_distribution(5, 4, rng);
    const double gamma = trial % 2 ? 2.0 : 1.0;
    auto cls = [&](const Matrix& m) { return cls_loss(m, y, w).value; };
    auto dst = [&](const Matrix& m) { return dst_loss(m, q, gamma, w).value; };
    auto cnf = [&](const Matrix& m) { return cnf_loss(m, w).value; };
    CHECK(cls_loss(z, y, w).grad.isApprox(numeric_grad(z, cls), 1e-7));
    CHECK(dst_loss(z, q, gamma, w).grad.isApprox(numeric_grad(z, dst), 1e-7));
    CHECK(cnf_loss(z, w).grad.isApprox(numeric_grad(z, cnf), 1e-7));
  }
}

TEST_CASE("data weights") {
  const std::vector<std::size_t> range{0, 1, 2};
  const auto balanced = data_weights(std::vector<std::size_t>{0, 1, 2, 2, 1, 0}, range);
  for (const auto& [k, w] : balanced.per_class()) CHECK(w == 1.0);

  const auto w = data_weights(std::vector<std::size_t>{0, 0, 1, 2}, range);
  CHECK(w.at(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(w.at(1) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(w.at(2) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(w.for_labels(std::vector<std::size_t>{1, 0}) == std::vector<double>{w.at(1), w.at(0)});

  CHECK(data_weights(std::vector<std::size_t>{5, 5, 5}, std::vector<std::size_t>{5}).at(5) == 1.0);

  try {
    data_weights(std::vector<std::size_t>{0, 0, 2}, range);
    FAIL("expected MissingClass");
  } catch (const MissingClass& e) {
    CHECK(e.missing_class() == 1);
  }
  CHECK_THROWS_AS(data_weights(std::vector<std::size_t>{3}, range), InvalidInput);
  CHECK_THROWS_AS(data_weights(std::vector<std::size_t>{}, std::vector<std::size_t>{}), InvalidInput);
}

TEST_CASE("balanced label lists always weigh exactly one") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng() % 7, per = 1 + rng() % 9;
    std::vector<std::size_t> labels, range;
    for (std::size_t c = 0; c < k; ++c) {
      range.push_back(c * 3);
      for (std::size_t i = 0; i < per; ++i) labels.push_back(c * 3);
    }
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto weights = data_weights(labels, range);
    for (const auto& [c, w] : weights.per_class()) CHECK(w == 1.0);
  }
}

TEST_CASE("loss weights") {
  CHECK(loss_weight(20, 20) == 1.0);
  CHECK(loss_weight(10, 30) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(loss_weight(10, 20) == 0.5);
  // Previous and current teacher weights split the unit.
  CHECK(loss_weight(30, 40) + loss_weight(10, 40) == 1.0);
  CHECK_THROWS_AS(loss_weight(0, 5), InvalidInput);
  CHECK_THROWS_AS(loss_weight(6, 5), InvalidInput);
}

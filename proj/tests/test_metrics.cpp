#include <sstream>

#include "doctest.h"
#include "gdcl/metrics.hpp"
#include "support/oracles.hpp"

using namespace gdcl;
using namespace gdcl::metrics;

namespace {

AccuracyMatrix fixture() {
  AccuracyMatrix m({10, 10, 10});
  m.set(1, 1, 0.9);
  m.set(1, 2, 0.8);
  m.set(2, 2, 0.85);
  m.set(1, 3, 0.7);
  m.set(2, 3, 0.75);
  m.set(3, 3, 0.9);
  return m;
}

AccuracyMatrix random_matrix(Rng& rng) {
  const std::size_t t = 2 + rng() % 7;
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < t; ++i) sizes.push_back(1 + rng() % 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AccuracyMatrix m(sizes);
  for (std::size_t s = 1; s <= t; ++s)
    for (std::size_t r = 1; r <= s; ++r) m.set(r, s, u(rng));
  return m;
}

}  // namespace

TEST_CASE("hand-computed fixture") {
  const auto m = fixture();
  CHECK(acc(m) == doctest::Approx(0.80417).epsilon(1e-5));
  CHECK(acc(m) == doctest::Approx((0.825 + (0.7 + 0.75 + 0.9) / 3) / 2).epsilon(1e-14));
  CHECK(fgt(m) == doctest::Approx(0.075).epsilon(1e-12));
}

TEST_CASE("no forgetting gives zero and backward transfer gives a negative value") {
  AccuracyMatrix flat({5, 10, 5});
  AccuracyMatrix better({5, 10, 5});
  for (std::size_t s = 1; s <= 3; ++s)
    for (std::size_t r = 1; r <= s; ++r) {
      flat.set(r, s, 0.6 + 0.1 * static_cast<double>(r));
      better.set(r, s, 0.5 + 0.1 * static_cast<double>(s - r));
    }
  CHECK(fgt(flat) == 0.0);
  CHECK(fgt(better) < 0.0);
}

TEST_CASE("a single stage is refused") {
  AccuracyMatrix m({10});
  m.set(1, 1, 0.9);
  CHECK_THROWS_AS(acc(m), InvalidInput);
  CHECK_THROWS_AS(fgt(m), InvalidInput);
  CHECK_THROWS_AS(fixture().truncated(2).at(1, 3), InvalidInput);
  CHECK_NOTHROW(acc(fixture().truncated(2)));
}

TEST_CASE("matrix bookkeeping") {
  AccuracyMatrix m({3, 3});
  CHECK_FALSE(m.complete());
  CHECK_THROWS_AS(m.set(2, 1, 0.5), InvalidInput);
  CHECK_THROWS_AS(m.set(1, 3, 0.5), InvalidInput);
  CHECK_THROWS_AS(m.set(0, 1, 0.5), InvalidInput);
  CHECK_THROWS_AS(m.set(1, 1, 1.5), InvalidInput);
  CHECK_THROWS_AS(m.at(1, 1), InvalidInput);
  m.set(1, 1, 0.5);
  CHECK(m.has(1, 1));
  CHECK_FALSE(m.has(1, 2));
  m.set(1, 2, 0.4);
  m.set(2, 2, 0.3);
  CHECK(m.complete());
  CHECK_THROWS_AS(AccuracyMatrix({3, 0}), InvalidInput);
  CHECK(fixture().truncated(3) == fixture());
}

TEST_CASE("agreement with the summation oracle on random matrices") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = random_matrix(rng);
    CHECK(std::abs(acc(m) - oracle::acc(m)) <= 1e-12);
    CHECK(std::abs(fgt(m) - oracle::fgt(m)) <= 1e-12);
    CHECK(acc(m) >= 0.0);
    CHECK(acc(m) <= 1.0);
    CHECK(std::abs(fgt(m)) <= 1.0);
  }
}

TEST_CASE("metrics are linear in the entries") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_matrix(rng);
    AccuracyMatrix b(a.task_sizes()), mix(a.task_sizes());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double lambda = u(rng);
    const std::size_t t = a.num_tasks();
    for (std::size_t s = 1; s <= t; ++s)
      for (std::size_t r = 1; r <= s; ++r) {
        b.set(r, s, u(rng));
        mix.set(r, s, lambda * a.at(r, s) + (1 - lambda) * b.at(r, s));
      }
    CHECK(acc(mix) == doctest::Approx(lambda * acc(a) + (1 - lambda) * acc(b)).epsilon(1e-12));
    CHECK(fgt(mix) == doctest::Approx(lambda * fgt(a) + (1 - lambda) * fgt(b)).epsilon(1e-10));
  }
}

TEST_CASE("csv round trip is exact") {
  Rng rng(3);
  const auto m = random_matrix(rng);
  std::ostringstream out;
  write_csv(out, m);
  std::istringstream in(out.str());
  CHECK(read_csv(in, m.task_sizes()) == m);
  CHECK(out.str().rfind("r,s,accuracy\n1,1,", 0) == 0);
  std::istringstream bad("r,s,acc\n");
  CHECK_THROWS_AS(read_csv(bad, {1}), InvalidInput);
}

TEST_CASE("task accuracy uses the argmax over every head") {
  // Two heads of one class each over a 2-d identity trunk-free model.
  nnet::ParamSet p;
  p.heads.push_back(nnet::Layer{Matrix{{1.0, 0.0}}, Vector::Zero(1)});
  p.heads.push_back(nnet::Layer{Matrix{{0.0, 1.0}}, Vector::Zero(1)});
  const nnet::Model model(2, p, {1, 1});
  Matrix x(2, 4);
  x << 1, 0, 2, 3,
       0, 1, 5, 1;
  CHECK(task_accuracy(model, LabeledSet(x, {0, 1, 1, 0})) == 1.0);
  CHECK(task_accuracy(model, LabeledSet(x, {0, 0, 1, 1})) == 0.5);
  // Labels of one class only: any head may still win.
  CHECK(task_accuracy(model, LabeledSet(x.leftCols(2), {1, 1})) == 0.5);
  CHECK_THROWS_AS(task_accuracy(model, LabeledSet(x.leftCols(3), {0, 1, 1})), InvalidInput);
  CHECK_THROWS_AS(task_accuracy(model, LabeledSet(x.leftCols(2), {0, 2})), InvalidInput);
  CHECK_THROWS_AS(task_accuracy(model, LabeledSet()), InvalidInput);
}

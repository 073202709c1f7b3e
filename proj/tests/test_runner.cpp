#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gdcl/runner.hpp"

using namespace gdcl;
using namespace gdcl::runner;
namespace fs = std::filesystem;

namespace {

// Four classes, quick schedules; `task_size` sets the number of stages.
config::ExperimentConfig tiny(std::size_t task_size = 2) {
  return config::parse_config(R"({
    "benchmark": {"input_dim": 4, "num_classes": 4, "task_size": )" + std::to_string(task_size) + R"(,
                  "per_class_train": 20, "per_class_test": 10, "ood_clusters": 4},
    "model": {"hidden": [8]},
    "optimizer": {"batch_size": 16},
    "schedule": {"divisor": 50},
    "sampling": {"n_max": 200, "score_batch": 32},
    "seeds": [0, 1, 2],
    "variants": [{"label": "Baseline", "method": "Baseline"}, {"label": "GD+ext", "sampling": "combined"}]
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gdcl_runner_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("two variants by three seeds give six records and one aggregate") {
  const auto dir = scratch("grid");
  const auto cfg = tiny();
  const auto summary = run_experiment(cfg, dir);
  CHECK(summary.trials == 6);
  CHECK(summary.failed == 0);
  std::size_t records = 0;
  for (const auto& e : fs::directory_iterator(dir / "runs")) records += e.path().extension() == ".json";
  CHECK(records == 6);
  CHECK(fs::exists(dir / "runs" / "GD+ext_seed2.json"));
  CHECK(fs::exists(dir / "runs" / "Baseline_seed0_accuracy.csv"));
  CHECK(fs::exists(dir / "plots" / "Baseline.csv"));
  CHECK(config::parse_config(slurp(dir / "config.json")) == cfg);

  std::istringstream agg(slurp(dir / "aggregate.csv"));
  std::string line;
  std::getline(agg, line);
  CHECK(line == "schema,variant,seeds,ACC_mean,ACC_std,FGT_mean,FGT_std");
  std::size_t rows = 0;
  while (std::getline(agg, line)) {
    CHECK(line.rfind("gdcl-aggregate/1,", 0) == 0);
    CHECK(line.find(",3,") != std::string::npos);
    ++rows;
  }
  CHECK(rows == 2);
  fs::remove_all(dir);
}

TEST_CASE("rerunning gives identical bytes, whatever the worker count") {
  const auto a = scratch("a"), b = scratch("b");
  auto cfg = tiny();
  run_experiment(cfg, a);
  cfg.jobs = 3;
  run_experiment(cfg, b);
  CHECK(slurp(a / "aggregate.csv") == slurp(b / "aggregate.csv"));
  for (const auto& e : fs::directory_iterator(a / "runs"))
    CHECK(slurp(e.path()) == slurp(b / "runs" / e.path().filename()));
  CHECK(slurp(a / "plots" / "GD+ext.csv") == slurp(b / "plots" / "GD+ext.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("aggregate uses the mean and the sample standard deviation") {
  const auto cfg = tiny();
  std::vector<TrialRecord> trials(3);
  const double accs[] = {0.5, 0.7, 0.9};
  for (std::size_t i = 0; i < 3; ++i) {
    trials[i].variant = "Baseline";
    trials[i].ok = true;
    trials[i].acc = accs[i];
    trials[i].fgt = 0.1;
  }
  TrialRecord failed;
  failed.variant = "Baseline";
  failed.acc = 100;
  trials.push_back(failed);
  const auto rows = aggregate(cfg, trials);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].seeds == 3);
  CHECK(rows[0].acc_mean == doctest::Approx(0.7));
  CHECK(rows[0].acc_std == doctest::Approx(0.2));
  CHECK(rows[0].fgt_std == doctest::Approx(0.0));
  CHECK(rows[1].seeds == 0);
}

TEST_CASE("series length follows the number of stages and matches the metrics") {
  for (std::size_t task_size : {2u, 1u}) {
    auto cfg = tiny(task_size);
    cfg.seeds = {4, 5};
    cfg.variants.resize(1);
    const auto trials = run_trials(cfg);
    const auto points = series(trials, "Baseline");
    const std::size_t stages = 4 / task_size;
    REQUIRE(points.size() == stages - 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::size_t s = i + 2;
      CHECK(points[i].stage == s);
      CHECK(points[i].classes_seen == s * task_size);
      CHECK(points[i].seeds == 2);
      const double expected = (metrics::acc(trials[0].accuracy->truncated(s)) +
                               metrics::acc(trials[1].accuracy->truncated(s))) / 2;
      CHECK(points[i].acc_mean == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(points.back().acc_mean == doctest::Approx((trials[0].acc + trials[1].acc) / 2).epsilon(1e-12));
    CHECK(points.back().fgt_mean == doctest::Approx((trials[0].fgt + trials[1].fgt) / 2).epsilon(1e-12));
  }
}

TEST_CASE("run records round trip") {
  auto cfg = tiny();
  const auto geometry = make_geometry(cfg);
  const auto t = run_trial(cfg, geometry, cfg.variants[1], 7);
  REQUIRE(t.ok);
  const auto back = parse_run_json(run_json(t, cfg.variants[1]));
  CHECK(back.variant == "GD+ext");
  CHECK(back.seed == 7);
  CHECK(back.acc == t.acc);
  CHECK(back.fgt == t.fgt);
  CHECK(*back.accuracy == *t.accuracy);
  CHECK(back.stages.size() == t.stages.size());
  CHECK(run_json(t, cfg.variants[1]).find("wall_time") == std::string::npos);
  CHECK_THROWS_AS(parse_run_json("{}"), InvalidInput);
}

TEST_CASE("a failing trial is recorded and the run continues") {
  const auto dir = scratch("failed");
  auto cfg = tiny();
  // A one-example coreset cannot cover the first task's classes, so the
  // data-weighted fine-tuning of the second stage has a class to weigh with
  // no examples.
  cfg.coreset_size = 1;
  cfg.schedule.divisor = 50;
  cfg.variants[0].balancing = trainer::Balancing::ft_dw;
  cfg.variants[1].balancing = trainer::Balancing::none;
  const auto summary = run_experiment(cfg, dir);
  CHECK(summary.failed == 3);
  CHECK(summary.rows[0].seeds == 0);
  CHECK(summary.rows[1].seeds == 3);
  const auto record = slurp(dir / "runs" / "Baseline_seed1.json");
  CHECK(record.find("\"status\": \"failed\"") != std::string::npos);
  CHECK(record.find("has no examples") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "runs" / "Baseline_seed1_accuracy.csv"));
  fs::remove_all(dir);
}

TEST_CASE("benchmark streams respect test points and earlier tasks") {
  const auto cfg = tiny();
  const auto geometry = make_geometry(cfg);
  const auto bench = make_benchmark(cfg, geometry, 3);
  CHECK(bench.tasks.size() == 2);
  CHECK(bench.test_points->size() == 40);
  const auto again = make_benchmark(cfg, geometry, 3);
  CHECK(again.tasks[1].train == bench.tasks[1].train);
  auto s1 = bench.stream(1), s1b = again.stream(1), s2 = bench.stream(2);
  for (int i = 0; i < 20; ++i) {
    const auto x = *s1->next();
    CHECK(x == *s1b->next());
    CHECK_FALSE(bench.test_points->contains(x));
  }
  CHECK_FALSE(*bench.stream(1)->next() == *s2->next());
}

TEST_CASE("emit_plots rebuilds series from records") {
  const auto dir = scratch("plots");
  run_experiment(tiny(), dir);
  const auto before = slurp(dir / "plots" / "GD+ext.csv");
  fs::remove_all(dir / "plots");
  CHECK(emit_plots(dir) == 2);
  CHECK(slurp(dir / "plots" / "GD+ext.csv") == before);
  CHECK(before.rfind("schema,variant,stage,classes_seen,seeds,ACC_mean,ACC_std,FGT_mean,FGT_std\ngdcl-series/1,GD+ext,2,4,3,", 0) == 0);
  CHECK_THROWS_AS(emit_plots(dir / "missing"), Error);
  fs::remove_all(dir);
}

TEST_CASE("file stems") {
  CHECK(file_stem("GD+ext") == "GD+ext");
  CHECK(file_stem("GD {P,C}") == "GD__P_C_");
}

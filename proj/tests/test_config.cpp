#include "doctest.h"
#include "gdcl/config.hpp"

using namespace gdcl;
using namespace gdcl::config;

namespace {

std::string error_path(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<accepted>";
}

}  // namespace

TEST_CASE("an empty document gives the documented defaults") {
  const auto c = parse_config("{}");
  CHECK(c.gamma_previous == 2.0);
  CHECK(c.gamma_current == 2.0);
  CHECK(c.gamma_ensemble == 1.0);
  CHECK(c.ood_ratio == 0.7);
  CHECK(c.batch_size == 128);
  CHECK(c.schedule.epochs == 200);
  CHECK(c.schedule.milestones == std::vector<std::size_t>{120, 160, 180});
  CHECK(c.optimizer.lr == 0.1);
  CHECK(c.optimizer.momentum == 0.9);
  CHECK(c.optimizer.weight_decay == 0.0005);
  CHECK(c.coreset_size == 2000);
  CHECK(c.benchmark.geometry.num_clusters == 20);
  CHECK(c.benchmark.task_size == 10);
  CHECK(c.seeds.size() == 10);
  CHECK(c.variants == default_variants());
  REQUIRE(c.variants.size() == 3);
  CHECK(c.variants[0].method == trainer::Method::baseline);
  CHECK(c.variants[2].sampling == trainer::Sampling::combined);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("resolve divides the schedule, rounding up") {
  auto c = parse_config(R"({"schedule": {"divisor": 20}})");
  const auto t = resolve(c);
  CHECK(t.teacher.epochs == 10);
  CHECK(t.teacher.milestones == std::vector<std::size_t>{6, 8, 9});
  CHECK(t.main_before_finetune.epochs == 9);
  CHECK(t.main_before_finetune.milestones == std::vector<std::size_t>{6, 8, 9});
  CHECK(t.finetune.epochs == 1);
  CHECK(t.finetune.lr == 0.01);
  CHECK(t.coreset_size == 100);
  const auto full = resolve(parse_config(R"({"schedule": {"divisor": 1}})"));
  CHECK(full.teacher.epochs == 200);
  CHECK(full.finetune.milestones == std::vector<std::size_t>{10, 15});
  CHECK(full.coreset_size == 2000);
}

TEST_CASE("out-of-range values are rejected with their key path") {
  CHECK(error_path(R"({"sampling": {"ood_ratio": 1.3}})") == "sampling.ood_ratio");
  CHECK(error_path(R"({"sampling": {"ood_ratio": -0.1}})") == "sampling.ood_ratio");
  CHECK(error_path(R"({"temperatures": {"previous": 0}})") == "temperatures.previous");
  CHECK(error_path(R"({"optimizer": {"momentum": 1.0}})") == "optimizer.momentum");
  CHECK(error_path(R"({"benchmark": {"task_size": 21}})") == "benchmark.task_size");
  CHECK(error_path(R"({"seeds": [1, 1]})") == "seeds");
  CHECK(error_path(R"({"seeds": []})") == "seeds");
  CHECK(error_path(R"({"variants": []})") == "variants");
}

TEST_CASE("unknown keys and wrong types are rejected") {
  CHECK(error_path(R"({"optimiser": {}})") == "optimiser");
  CHECK(error_path(R"({"optimizer": {"learning_rate": 0.1}})") == "optimizer.learning_rate");
  CHECK(error_path(R"({"optimizer": {"lr": "fast"}})") == "optimizer.lr");
  CHECK(error_path(R"({"optimizer": {"batch_size": 12.5}})") == "optimizer.batch_size");
  CHECK(error_path(R"({"optimizer": {"batch_size": -3}})") == "optimizer.batch_size");
  CHECK(error_path(R"({"model": {"hidden": 64}})") == "model.hidden");
  CHECK(error_path(R"({"variants": [{"label": "x", "method": "EWC"}]})") == "variants[0].method");
  CHECK(error_path(R"({"variants": [{"label": "x", "references": ["P", "R"]}]})") == "variants[0].references[1]");
  CHECK(error_path(R"({"variants": [{"label": "x", "colour": 1}]})") == "variants[0].colour");
  CHECK(error_path(R"({"variants": [{"label": "x", "method": "LwF", "references": ["P"]}]})") ==
        "variants[0].references");
  CHECK(error_path(R"({"variants": [{"label": "x"}, {"label": "x"}]})") == "variants[1].label");
  CHECK(error_path(R"({"schema": "gdcl-config/9"})") == "schema");
  CHECK(error_path("[1, 2]") == "<root>");
  CHECK(error_path("{") == "<document>");
}

TEST_CASE("variant defaults depend on the method") {
  const auto c = parse_config(R"({"variants": [
    {"label": "a"},
    {"label": "b", "method": "LwF"},
    {"label": "c", "method": "GD", "references": ["P", "C"], "balancing": "FT-DSet", "sampling": "pred-only",
     "teacher_cnf": false}]})");
  REQUIRE(c.variants.size() == 3);
  CHECK(c.variants[0].method == trainer::Method::gd);
  CHECK(c.variants[0].references == trainer::ReferenceSet{true, true, true});
  CHECK(c.variants[0].balancing == trainer::Balancing::ft_dw);
  CHECK(c.variants[1].references == trainer::ReferenceSet{false, false, false});
  CHECK(c.variants[1].balancing == trainer::Balancing::none);
  CHECK(c.variants[2].references == trainer::ReferenceSet{true, true, false});
  CHECK(c.variants[2].balancing == trainer::Balancing::ft_dset);
  CHECK(c.variants[2].sampling == trainer::Sampling::pred_only);
  CHECK_FALSE(c.variants[2].teacher_cnf);
}

TEST_CASE("external size accepts the labeled keyword or a count") {
  CHECK(parse_config(R"({"sampling": {"external_size": "labeled"}})").external_size == 0);
  CHECK(parse_config(R"({"sampling": {"external_size": 500}})").external_size == 500);
  CHECK(error_path(R"({"sampling": {"external_size": 0}})") == "sampling.external_size");
  CHECK(error_path(R"({"sampling": {"external_size": "all"}})") == "sampling.external_size");
}

TEST_CASE("serialize and parse round trip") {
  const auto defaults = parse_config("{}");
  CHECK(parse_config(serialize(defaults)) == defaults);
  const auto custom = parse_config(R"({
    "benchmark": {"input_dim": 2, "num_classes": 10, "task_size": 5, "sigma": 0.5, "prev_like_fraction": 0.3,
                  "geometry_seed": 7},
    "model": {"hidden": [32]},
    "optimizer": {"lr": 0.05, "momentum": 0.8, "weight_decay": 0.001, "batch_size": 64},
    "schedule": {"divisor": 5, "finetune_lr": 0.02},
    "coreset": {"size": 300},
    "sampling": {"ood_ratio": 0.5, "n_max": 5000, "external_size": 400, "score_batch": 100},
    "temperatures": {"previous": 3, "current": 1.5, "ensemble": 2},
    "loss": {"weighting": "uniform"},
    "seeds": [3, 5],
    "jobs": 2,
    "output": {"dir": "out"},
    "variants": [{"label": "GD-P", "references": ["P"], "sampling": "combined"}, {"label": "O", "method": "Oracle"}]
  })");
  CHECK(custom.benchmark.geometry.input_dim == 2);
  CHECK(custom.loss_weighting == trainer::LossWeighting::uniform);
  CHECK(parse_config(serialize(custom)) == custom);
  CHECK(serialize(parse_config(serialize(custom))) == serialize(custom));
  CHECK_FALSE(custom == defaults);
}

TEST_CASE("load_config reports unreadable files") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

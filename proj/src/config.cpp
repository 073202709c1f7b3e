#include "gdcl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gdcl::config {

using nlohmann::json;

bool BenchmarkConfig::operator==(const BenchmarkConfig& o) const {
  const auto& a = geometry;
  const auto& b = o.geometry;
  return a.input_dim == b.input_dim && a.num_clusters == b.num_clusters && a.center_spread == b.center_spread &&
         a.min_center_distance == b.min_center_distance && a.sigma == b.sigma && a.ood_clusters == b.ood_clusters &&
         a.ood_spread == b.ood_spread && a.ood_min_distance == b.ood_min_distance && a.ood_sigma == b.ood_sigma &&
         task_size == o.task_size && per_class_train == o.per_class_train && per_class_test == o.per_class_test &&
         prev_like_fraction == o.prev_like_fraction && geometry_seed == o.geometry_seed;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return benchmark == o.benchmark && hidden == o.hidden && optimizer.lr == o.optimizer.lr &&
         optimizer.momentum == o.optimizer.momentum && optimizer.weight_decay == o.optimizer.weight_decay &&
         batch_size == o.batch_size && schedule == o.schedule && coreset_size == o.coreset_size &&
         ood_ratio == o.ood_ratio && n_max == o.n_max && external_size == o.external_size &&
         score_batch == o.score_batch && gamma_previous == o.gamma_previous && gamma_current == o.gamma_current &&
         gamma_ensemble == o.gamma_ensemble && loss_weighting == o.loss_weighting && seeds == o.seeds &&
         jobs == o.jobs && output_dir == o.output_dir && variants == o.variants;
}

std::vector<trainer::MethodVariant> default_variants() {
  using namespace trainer;
  MethodVariant baseline;
  baseline.label = "Baseline";
  baseline.method = Method::baseline;
  baseline.references = {false, false, false};
  baseline.balancing = Balancing::none;
  MethodVariant gd;
  gd.label = "GD";
  MethodVariant gd_ext = gd;
  gd_ext.label = "GD+ext";
  gd_ext.sampling = Sampling::combined;
  return {baseline, gd, gd_ext};
}

namespace {

// Typed access to one JSON object that remembers which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, std::size_t& out) {
    if (auto* v = find(key)) out = as_size(*v, key_path(key));
  }
  void read(const std::string& key, std::uint64_t& out, int) {
    if (auto* v = find(key)) out = as_u64(*v, key_path(key));
  }
  void read(const std::string& key, double& out) {
    if (auto* v = find(key)) out = as_double(*v, key_path(key));
  }
  void read(const std::string& key, bool& out) {
    if (auto* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key), "expected a boolean");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (auto* v = find(key)) out = as_string(*v, key_path(key));
  }
  void read(const std::string& key, std::vector<std::size_t>& out) {
    if (auto* v = find(key)) {
      if (!v->is_array()) throw ConfigError(key_path(key), "expected an array");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) out.push_back(as_size((*v)[i], key_path(key) + "[" + std::to_string(i) + "]"));
    }
  }

  template <typename Fn>
  void object(const std::string& key, Fn&& fn) {
    if (auto* v = find(key)) {
      Reader sub(*v, key_path(key));
      fn(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
  }

  static std::uint64_t as_u64(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) throw ConfigError(path, "must not be negative");
    throw ConfigError(path, "expected a nonnegative integer");
  }
  static std::size_t as_size(const json& v, const std::string& path) {
    return static_cast<std::size_t>(as_u64(v, path));
  }
  static double as_double(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
  }
  static std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E, typename Parse>
void read_enum(Reader& r, const std::string& key, E& out, Parse parse) {
  std::string s;
  r.read(key, s);
  if (s.empty()) return;
  try {
    out = parse(s);
  } catch (const InvalidConfig& e) {
    throw ConfigError(r.key_path(key), e.what());
  }
}

trainer::MethodVariant parse_variant(const json& j, const std::string& path) {
  using namespace trainer;
  MethodVariant v;
  Reader r(j, path);
  read_enum(r, "method", v.method, method_from_string);
  v.label = to_string(v.method);
  v.balancing = v.method == Method::gd ? Balancing::ft_dw : Balancing::none;
  v.references = v.method == Method::gd ? ReferenceSet{} : ReferenceSet{false, false, false};
  r.read("label", v.label);
  read_enum(r, "balancing", v.balancing, balancing_from_string);
  read_enum(r, "sampling", v.sampling, sampling_from_string);
  r.read("teacher_cnf", v.teacher_cnf);
  if (auto* refs = r.find("references")) {
    const auto key = r.key_path("references");
    if (!refs->is_array()) throw ConfigError(key, "expected an array of \"P\", \"C\", \"Q\"");
    v.references = {false, false, false};
    for (std::size_t i = 0; i < refs->size(); ++i) {
      const auto name = Reader::as_string((*refs)[i], key + "[" + std::to_string(i) + "]");
      bool* slot = name == "P" ? &v.references.previous
                   : name == "C" ? &v.references.current
                   : name == "Q" ? &v.references.ensemble
                                 : nullptr;
      if (!slot) throw ConfigError(key + "[" + std::to_string(i) + "]", "unknown reference '" + name + "'");
      if (*slot) throw ConfigError(key + "[" + std::to_string(i) + "]", "duplicate reference '" + name + "'");
      *slot = true;
    }
  }
  r.finish();
  return v;
}

json variant_json(const trainer::MethodVariant& v) {
  json refs = json::array();
  if (v.references.previous) refs.push_back("P");
  if (v.references.current) refs.push_back("C");
  if (v.references.ensemble) refs.push_back("Q");
  return json{{"label", v.label},
              {"method", trainer::to_string(v.method)},
              {"references", refs},
              {"balancing", trainer::to_string(v.balancing)},
              {"sampling", trainer::to_string(v.sampling)},
              {"teacher_cnf", v.teacher_cnf}};
}

std::size_t scaled(std::size_t n, std::size_t divisor) { return (n + divisor - 1) / divisor; }

trainer::Schedule scaled_schedule(std::size_t epochs, const std::vector<std::size_t>& milestones, double lr,
                                  const ScheduleConfig& s) {
  trainer::Schedule out;
  out.epochs = scaled(epochs, s.divisor);
  for (auto m : milestones) out.milestones.push_back(scaled(m, s.divisor));
  out.lr = lr;
  out.decay = s.decay;
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text.empty() ? std::string("{}") : text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  c.variants = default_variants();
  Reader root(doc, "");
  if (auto* schema = root.find("schema")) {
    if (Reader::as_string(*schema, "schema") != kConfigSchema)
      throw ConfigError("schema", std::string("unsupported schema (expected ") + kConfigSchema + ")");
  }
  root.object("benchmark", [&](Reader& r) {
    auto& g = c.benchmark.geometry;
    r.read("input_dim", g.input_dim);
    r.read("num_classes", g.num_clusters);
    r.read("center_spread", g.center_spread);
    r.read("min_center_distance", g.min_center_distance);
    r.read("sigma", g.sigma);
    r.read("ood_clusters", g.ood_clusters);
    r.read("ood_spread", g.ood_spread);
    r.read("ood_min_distance", g.ood_min_distance);
    r.read("ood_sigma", g.ood_sigma);
    r.read("task_size", c.benchmark.task_size);
    r.read("per_class_train", c.benchmark.per_class_train);
    r.read("per_class_test", c.benchmark.per_class_test);
    r.read("prev_like_fraction", c.benchmark.prev_like_fraction);
    r.read("geometry_seed", c.benchmark.geometry_seed, 0);
  });
  root.object("model", [&](Reader& r) { r.read("hidden", c.hidden); });
  root.object("optimizer", [&](Reader& r) {
    r.read("lr", c.optimizer.lr);
    r.read("momentum", c.optimizer.momentum);
    r.read("weight_decay", c.optimizer.weight_decay);
    r.read("batch_size", c.batch_size);
  });
  root.object("schedule", [&](Reader& r) {
    auto& s = c.schedule;
    r.read("divisor", s.divisor);
    r.read("epochs", s.epochs);
    r.read("milestones", s.milestones);
    r.read("epochs_before_finetune", s.epochs_before_finetune);
    r.read("milestones_before_finetune", s.milestones_before_finetune);
    r.read("finetune_epochs", s.finetune_epochs);
    r.read("finetune_milestones", s.finetune_milestones);
    r.read("finetune_lr", s.finetune_lr);
    r.read("decay", s.decay);
  });
  root.object("coreset", [&](Reader& r) { r.read("size", c.coreset_size); });
  root.object("sampling", [&](Reader& r) {
    r.read("ood_ratio", c.ood_ratio);
    r.read("n_max", c.n_max);
    r.read("score_batch", c.score_batch);
    if (auto* v = r.find("external_size")) {
      if (v->is_string()) {
        if (v->get<std::string>() != "labeled")
          throw ConfigError(r.key_path("external_size"), "expected \"labeled\" or a positive integer");
        c.external_size = 0;
      } else {
        c.external_size = Reader::as_size(*v, r.key_path("external_size"));
        if (c.external_size == 0) throw ConfigError(r.key_path("external_size"), "must be positive");
      }
    }
  });
  root.object("temperatures", [&](Reader& r) {
    r.read("previous", c.gamma_previous);
    r.read("current", c.gamma_current);
    r.read("ensemble", c.gamma_ensemble);
  });
  root.object("loss", [&](Reader& r) { read_enum(r, "weighting", c.loss_weighting, trainer::loss_weighting_from_string); });
  if (auto* seeds = root.find("seeds")) {
    if (!seeds->is_array()) throw ConfigError("seeds", "expected an array");
    c.seeds.clear();
    for (std::size_t i = 0; i < seeds->size(); ++i)
      c.seeds.push_back(Reader::as_u64((*seeds)[i], "seeds[" + std::to_string(i) + "]"));
  }
  root.read("jobs", c.jobs);
  root.object("output", [&](Reader& r) { r.read("dir", c.output_dir); });
  if (auto* variants = root.find("variants")) {
    if (!variants->is_array()) throw ConfigError("variants", "expected an array");
    c.variants.clear();
    for (std::size_t i = 0; i < variants->size(); ++i)
      c.variants.push_back(parse_variant((*variants)[i], "variants[" + std::to_string(i) + "]"));
  }
  root.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize(const ExperimentConfig& c) {
  const auto& g = c.benchmark.geometry;
  const auto& s = c.schedule;
  json variants = json::array();
  for (const auto& v : c.variants) variants.push_back(variant_json(v));
  json doc = {
      {"schema", kConfigSchema},
      {"benchmark",
       {{"input_dim", g.input_dim},
        {"num_classes", g.num_clusters},
        {"task_size", c.benchmark.task_size},
        {"per_class_train", c.benchmark.per_class_train},
        {"per_class_test", c.benchmark.per_class_test},
        {"center_spread", g.center_spread},
        {"min_center_distance", g.min_center_distance},
        {"sigma", g.sigma},
        {"ood_clusters", g.ood_clusters},
        {"ood_spread", g.ood_spread},
        {"ood_min_distance", g.ood_min_distance},
        {"ood_sigma", g.ood_sigma},
        {"prev_like_fraction", c.benchmark.prev_like_fraction},
        {"geometry_seed", c.benchmark.geometry_seed}}},
      {"model", {{"hidden", c.hidden}}},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"momentum", c.optimizer.momentum},
        {"weight_decay", c.optimizer.weight_decay},
        {"batch_size", c.batch_size}}},
      {"schedule",
       {{"divisor", s.divisor},
        {"epochs", s.epochs},
        {"milestones", s.milestones},
        {"epochs_before_finetune", s.epochs_before_finetune},
        {"milestones_before_finetune", s.milestones_before_finetune},
        {"finetune_epochs", s.finetune_epochs},
        {"finetune_milestones", s.finetune_milestones},
        {"finetune_lr", s.finetune_lr},
        {"decay", s.decay}}},
      {"coreset", {{"size", c.coreset_size}}},
      {"sampling",
       {{"ood_ratio", c.ood_ratio},
        {"n_max", c.n_max},
        {"external_size", c.external_size == 0 ? json("labeled") : json(c.external_size)},
        {"score_batch", c.score_batch}}},
      {"temperatures",
       {{"previous", c.gamma_previous}, {"current", c.gamma_current}, {"ensemble", c.gamma_ensemble}}},
      {"loss", {{"weighting", trainer::to_string(c.loss_weighting)}}},
      {"seeds", c.seeds},
      {"jobs", c.jobs},
      {"output", {{"dir", c.output_dir}}},
      {"variants", variants}};
  return doc.dump(2) + "\n";
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* path, const std::string& what) {
    if (!ok) throw ConfigError(path, what);
  };
  auto positive = [&](double v, const char* path) { require(v > 0.0 && std::isfinite(v), path, "must be positive"); };
  const auto& g = c.benchmark.geometry;
  require(g.input_dim >= 1, "benchmark.input_dim", "must be at least 1");
  require(g.num_clusters >= 2, "benchmark.num_classes", "must be at least 2");
  require(c.benchmark.task_size >= 1 && c.benchmark.task_size <= g.num_clusters, "benchmark.task_size",
          "must lie in [1, num_classes]");
  require(c.benchmark.per_class_train >= 1, "benchmark.per_class_train", "must be positive");
  require(c.benchmark.per_class_test >= 1, "benchmark.per_class_test", "must be positive");
  positive(g.center_spread, "benchmark.center_spread");
  require(g.min_center_distance >= 0.0, "benchmark.min_center_distance", "must not be negative");
  positive(g.sigma, "benchmark.sigma");
  require(g.ood_clusters >= 1, "benchmark.ood_clusters", "must be at least 1");
  positive(g.ood_spread, "benchmark.ood_spread");
  require(g.ood_min_distance >= 0.0, "benchmark.ood_min_distance", "must not be negative");
  positive(g.ood_sigma, "benchmark.ood_sigma");
  require(c.benchmark.prev_like_fraction >= 0.0 && c.benchmark.prev_like_fraction <= 1.0,
          "benchmark.prev_like_fraction", "must lie in [0, 1]");

  require(!c.hidden.empty(), "model.hidden", "needs at least one layer");
  for (auto h : c.hidden) require(h >= 1, "model.hidden", "layer widths must be positive");
  positive(c.optimizer.lr, "optimizer.lr");
  require(c.optimizer.momentum >= 0.0 && c.optimizer.momentum < 1.0, "optimizer.momentum", "must lie in [0, 1)");
  require(c.optimizer.weight_decay >= 0.0 && std::isfinite(c.optimizer.weight_decay), "optimizer.weight_decay",
          "must not be negative");
  require(c.batch_size >= 1, "optimizer.batch_size", "must be positive");

  const auto& s = c.schedule;
  require(s.divisor >= 1, "schedule.divisor", "must be at least 1");
  require(s.epochs >= 1, "schedule.epochs", "must be positive");
  require(s.epochs_before_finetune >= 1, "schedule.epochs_before_finetune", "must be positive");
  require(s.finetune_epochs >= 1, "schedule.finetune_epochs", "must be positive");
  positive(s.finetune_lr, "schedule.finetune_lr");
  require(s.decay > 0.0 && s.decay <= 1.0, "schedule.decay", "must lie in (0, 1]");

  require(c.coreset_size >= 1, "coreset.size", "must be positive");
  require(c.ood_ratio >= 0.0 && c.ood_ratio <= 1.0, "sampling.ood_ratio", "must lie in [0, 1]");
  require(c.n_max >= 1, "sampling.n_max", "must be positive");
  require(c.score_batch >= 1, "sampling.score_batch", "must be positive");
  positive(c.gamma_previous, "temperatures.previous");
  positive(c.gamma_current, "temperatures.current");
  positive(c.gamma_ensemble, "temperatures.ensemble");

  require(!c.seeds.empty(), "seeds", "needs at least one seed");
  std::set<std::uint64_t> seeds(c.seeds.begin(), c.seeds.end());
  require(seeds.size() == c.seeds.size(), "seeds", "must not repeat");
  require(c.jobs >= 1, "jobs", "must be at least 1");
  require(!c.output_dir.empty(), "output.dir", "must not be empty");
  require(!c.variants.empty(), "variants", "needs at least one variant");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < c.variants.size(); ++i) {
    const auto path = "variants[" + std::to_string(i) + "]";
    const auto& v = c.variants[i];
    if (v.label.empty()) throw ConfigError(path + ".label", "must not be empty");
    if (!labels.insert(v.label).second) throw ConfigError(path + ".label", "duplicate label '" + v.label + "'");
    if (v.method != trainer::Method::gd && !(v.references == trainer::ReferenceSet{false, false, false}))
      throw ConfigError(path + ".references", "only GD takes reference models");
  }
}

trainer::TrainConfig resolve(const ExperimentConfig& c) {
  trainer::TrainConfig t;
  t.hidden = c.hidden;
  t.sgd = c.optimizer;
  t.batch_size = c.batch_size;
  const auto& s = c.schedule;
  t.teacher = scaled_schedule(s.epochs, s.milestones, c.optimizer.lr, s);
  t.main = t.teacher;
  t.main_before_finetune = scaled_schedule(s.epochs_before_finetune, s.milestones_before_finetune, c.optimizer.lr, s);
  t.finetune = scaled_schedule(s.finetune_epochs, s.finetune_milestones, s.finetune_lr, s);
  t.gamma_previous = c.gamma_previous;
  t.gamma_current = c.gamma_current;
  t.gamma_ensemble = c.gamma_ensemble;
  t.loss_weighting = c.loss_weighting;
  t.coreset_size = scaled(c.coreset_size, s.divisor);
  t.ood_ratio = c.ood_ratio;
  t.n_max = c.n_max;
  t.external_size = c.external_size;
  t.score_batch = c.score_batch;
  return t;
}

}  // namespace gdcl::config

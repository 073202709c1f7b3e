#include "gdcl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace gdcl::runner {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum BenchmarkTag : std::uint64_t { kGeometry = 0xA0, kLayout, kSamples, kStreamBase = 0xB0 };

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = sd = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::unique_ptr<UnlabeledStream> Benchmark::stream(std::size_t stage) const {
  taskgen::StreamSpec spec;
  spec.prev_like_fraction = prev_like_fraction;
  const std::size_t seen_labels = stage >= 2 ? tasks[stage - 1].first_label : 0;
  spec.seen_clusters.assign(layout.class_order.begin(),
                            layout.class_order.begin() + static_cast<std::ptrdiff_t>(seen_labels));
  spec.seed = mix_seed(seed, kStreamBase + stage);
  return std::make_unique<taskgen::SyntheticStream>(geometry, std::move(spec), test_points);
}

taskgen::Geometry make_geometry(const config::ExperimentConfig& config) {
  Rng rng = make_rng(config.benchmark.geometry_seed, kGeometry);
  return taskgen::make_geometry(config.benchmark.geometry, rng);
}

Benchmark make_benchmark(const config::ExperimentConfig& config, const taskgen::Geometry& geometry, std::uint64_t seed) {
  Benchmark b;
  b.geometry = geometry;
  b.seed = seed;
  b.prev_like_fraction = config.benchmark.prev_like_fraction;
  Rng layout_rng = make_rng(seed, kLayout);
  b.layout = taskgen::make_layout(config.benchmark.geometry.num_clusters, config.benchmark.task_size, layout_rng);
  Rng sample_rng = make_rng(seed, kSamples);
  b.tasks = taskgen::make_task_sequence(geometry, b.layout, config.benchmark.per_class_train,
                                        config.benchmark.per_class_test, sample_rng);
  auto points = std::make_shared<taskgen::PointSet>();
  for (const auto& t : b.tasks) points->insert_columns(t.test.inputs);
  b.test_points = std::move(points);
  return b;
}

TrialRecord run_trial(const config::ExperimentConfig& config, const taskgen::Geometry& geometry,
                      const trainer::MethodVariant& variant, std::uint64_t seed) {
  TrialRecord rec;
  rec.variant = variant.label;
  rec.seed = seed;
  try {
    const Benchmark bench = make_benchmark(config, geometry, seed);
    rec.task_sizes = bench.layout.task_sizes();
    auto seq = trainer::run_sequence(
        bench.tasks, [&](std::size_t stage) { return bench.stream(stage); }, variant, config::resolve(config), seed);
    for (const auto& s : seq.stages)
      rec.stages.push_back(StageRecord{s.stage, s.accuracy, s.diagnostics, s.loss_traces});
    rec.accuracy = seq.accuracy;
    rec.acc = metrics::acc(seq.accuracy);
    rec.fgt = metrics::fgt(seq.accuracy);
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

std::vector<TrialRecord> run_trials(const config::ExperimentConfig& config) {
  config::validate(config);
  const taskgen::Geometry geometry = make_geometry(config);
  struct Job {
    const trainer::MethodVariant* variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& v : config.variants)
    for (auto s : config.seeds) jobs.push_back({&v, s});

  std::vector<TrialRecord> out(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      out[i] = run_trial(config, geometry, *jobs[i].variant, jobs[i].seed);
  };
  const std::size_t n_threads = std::min(config.jobs, jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

std::vector<AggregateRow> aggregate(const config::ExperimentConfig& config, const std::vector<TrialRecord>& trials) {
  std::vector<AggregateRow> rows;
  for (const auto& v : config.variants) {
    std::vector<double> accs, fgts;
    for (const auto& t : trials)
      if (t.variant == v.label && t.ok) {
        accs.push_back(t.acc);
        fgts.push_back(t.fgt);
      }
    AggregateRow row;
    row.variant = v.label;
    row.seeds = accs.size();
    mean_std(accs, row.acc_mean, row.acc_std);
    mean_std(fgts, row.fgt_mean, row.fgt_std);
    rows.push_back(row);
  }
  return rows;
}

std::vector<SeriesPoint> series(const std::vector<TrialRecord>& trials, const std::string& variant) {
  std::map<std::size_t, std::vector<double>> accs, fgts;
  std::map<std::size_t, std::size_t> classes;
  for (const auto& t : trials) {
    if (t.variant != variant || !t.ok || !t.accuracy) continue;
    std::size_t seen = t.task_sizes.empty() ? 0 : t.task_sizes[0];
    for (std::size_t s = 2; s <= t.accuracy->num_tasks(); ++s) {
      seen += t.task_sizes[s - 1];
      const auto m = t.accuracy->truncated(s);
      accs[s].push_back(metrics::acc(m));
      fgts[s].push_back(metrics::fgt(m));
      classes[s] = seen;
    }
  }
  std::vector<SeriesPoint> out;
  for (const auto& [s, a] : accs) {
    SeriesPoint p;
    p.stage = s;
    p.classes_seen = classes[s];
    p.seeds = a.size();
    mean_std(a, p.acc_mean, p.acc_std);
    mean_std(fgts[s], p.fgt_mean, p.fgt_std);
    out.push_back(p);
  }
  return out;
}

std::string run_json(const TrialRecord& trial, const trainer::MethodVariant& variant) {
  json refs = json::array();
  if (variant.references.previous) refs.push_back("P");
  if (variant.references.current) refs.push_back("C");
  if (variant.references.ensemble) refs.push_back("Q");
  json doc = {{"schema", kRunSchema},
              {"variant",
               {{"label", variant.label},
                {"method", trainer::to_string(variant.method)},
                {"references", refs},
                {"balancing", trainer::to_string(variant.balancing)},
                {"sampling", trainer::to_string(variant.sampling)},
                {"teacher_cnf", variant.teacher_cnf}}},
              {"seed", trial.seed},
              {"status", trial.ok ? "ok" : "failed"},
              {"task_sizes", trial.task_sizes}};
  if (!trial.ok) doc["error"] = trial.error;
  if (trial.ok) {
    doc["ACC"] = trial.acc;
    doc["FGT"] = trial.fgt;
  }
  json entries = json::array();
  if (trial.accuracy)
    for (std::size_t s = 1; s <= trial.accuracy->num_tasks(); ++s)
      for (std::size_t r = 1; r <= s; ++r)
        if (trial.accuracy->has(r, s)) entries.push_back({{"r", r}, {"s", s}, {"accuracy", trial.accuracy->at(r, s)}});
  doc["accuracy"] = entries;
  json stages = json::array();
  for (const auto& st : trial.stages) {
    const auto& d = st.diagnostics;
    json traces = json::object();
    for (const auto& [name, trace] : st.loss_traces) traces[name] = trace;
    stages.push_back({{"stage", st.stage},
                      {"accuracy", st.accuracy},
                      {"labeled_size", d.labeled_size},
                      {"external_size", d.external_size},
                      {"external_ood", d.external_ood},
                      {"external_prev", d.external_prev},
                      {"retrieved", d.retrieved},
                      {"bias_before_finetune", d.bias_before_finetune},
                      {"bias_after_finetune", d.bias_after_finetune},
                      {"loss_traces", traces}});
  }
  doc["stages"] = stages;
  return doc.dump(2) + "\n";
}

TrialRecord parse_run_json(const std::string& text) {
  TrialRecord t;
  try {
    const json doc = json::parse(text);
    if (doc.at("schema") != kRunSchema) throw InvalidInput("unsupported run record schema");
    t.variant = doc.at("variant").at("label").get<std::string>();
    t.seed = doc.at("seed").get<std::uint64_t>();
    t.ok = doc.at("status") == "ok";
    if (doc.contains("error")) t.error = doc.at("error").get<std::string>();
    t.task_sizes = doc.at("task_sizes").get<std::vector<std::size_t>>();
    if (t.ok) {
      t.acc = doc.at("ACC").get<double>();
      t.fgt = doc.at("FGT").get<double>();
      metrics::AccuracyMatrix m(t.task_sizes);
      for (const auto& e : doc.at("accuracy"))
        m.set(e.at("r").get<std::size_t>(), e.at("s").get<std::size_t>(), e.at("accuracy").get<double>());
      t.accuracy = m;
    }
    for (const auto& st : doc.at("stages")) {
      StageRecord rec;
      rec.stage = st.at("stage").get<std::size_t>();
      rec.accuracy = st.at("accuracy").get<std::vector<double>>();
      t.stages.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed run record: ") + e.what());
  }
  return t;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "schema,variant,seeds,ACC_mean,ACC_std,FGT_mean,FGT_std\n";
  for (const auto& r : rows)
    out << kAggregateSchema << ',' << r.variant << ',' << r.seeds << ',' << fmt(r.acc_mean) << ','
        << fmt(r.acc_std) << ',' << fmt(r.fgt_mean) << ',' << fmt(r.fgt_std) << '\n';
}

void write_series_csv(std::ostream& out, const std::string& variant, const std::vector<SeriesPoint>& points) {
  out << "schema,variant,stage,classes_seen,seeds,ACC_mean,ACC_std,FGT_mean,FGT_std\n";
  for (const auto& p : points)
    out << kSeriesSchema << ',' << variant << ',' << p.stage << ',' << p.classes_seen << ',' << p.seeds << ','
        << fmt(p.acc_mean) << ',' << fmt(p.acc_std) << ',' << fmt(p.fgt_mean) << ',' << fmt(p.fgt_std) << '\n';
}

std::string file_stem(const std::string& label) {
  std::string out;
  for (char ch : label) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '+' || ch == '.';
    out += keep ? ch : '_';
  }
  return out;
}

ExperimentSummary run_experiment(const config::ExperimentConfig& config, const fs::path& out_dir, std::ostream* log) {
  config::validate(config);
  std::set<std::string> stems;
  for (const auto& v : config.variants)
    if (!stems.insert(file_stem(v.label)).second)
      throw config::ConfigError("variants", "labels '" + v.label + "' collide after file-name sanitizing");

  std::error_code ec;
  fs::create_directories(out_dir / "runs", ec);
  if (ec) throw Error("cannot create " + (out_dir / "runs").string() + ": " + ec.message());
  write_file(out_dir / "config.json", config::serialize(config));

  const auto trials = run_trials(config);
  ExperimentSummary summary;
  summary.trials = trials.size();
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    const auto& variant = config.variants[i / config.seeds.size()];
    const auto stem = file_stem(t.variant) + "_seed" + std::to_string(t.seed);
    write_file(out_dir / "runs" / (stem + ".json"), run_json(t, variant));
    if (t.accuracy) {
      std::ostringstream csv;
      metrics::write_csv(csv, *t.accuracy);
      write_file(out_dir / "runs" / (stem + "_accuracy.csv"), csv.str());
    }
    if (!t.ok) {
      ++summary.failed;
      if (log) *log << "trial " << t.variant << " seed " << t.seed << " failed: " << t.error << '\n';
    }
  }
  summary.rows = aggregate(config, trials);
  std::ostringstream agg;
  write_aggregate_csv(agg, summary.rows);
  write_file(out_dir / "aggregate.csv", agg.str());
  emit_plots(out_dir);
  return summary;
}

std::size_t emit_plots(const fs::path& results_dir) {
  const fs::path runs = results_dir / "runs";
  if (!fs::is_directory(runs)) throw Error("no run records under " + runs.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(runs))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::vector<TrialRecord> trials;
  std::vector<std::string> variants;
  for (const auto& f : files) {
    trials.push_back(parse_run_json(slurp(f)));
    if (std::find(variants.begin(), variants.end(), trials.back().variant) == variants.end())
      variants.push_back(trials.back().variant);
  }
  std::sort(trials.begin(), trials.end(), [](const TrialRecord& a, const TrialRecord& b) { return a.seed < b.seed; });

  std::error_code ec;
  fs::create_directories(results_dir / "plots", ec);
  if (ec) throw Error("cannot create " + (results_dir / "plots").string() + ": " + ec.message());
  for (const auto& v : variants) {
    std::ostringstream csv;
    write_series_csv(csv, v, series(trials, v));
    write_file(results_dir / "plots" / (file_stem(v) + ".csv"), csv.str());
  }
  return variants.size();
}

}  // namespace gdcl::runner

#include "gdcl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <map>
#include <numeric>

#include "gdcl/ensemble.hpp"
#include "gdcl/losses.hpp"
#include "gdcl/sampler.hpp"

namespace gdcl::trainer {

namespace {

// Sub-seed tags within one stage.
enum SeedTag : std::uint64_t {
  kTeacherInit = 1,
  kTeacherFit,
  kHeadInit,
  kMainFit,
  kFinetuneFit,
  kCoreset,
  kUndersample,
};

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const std::pair<const char*, E> (&table)[N], const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  std::string allowed;
  for (const auto& [name, value] : table) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  throw InvalidConfig(std::string("unknown ") + what + " '" + s + "' (expected one of " + allowed + ")");
}

template <typename E, std::size_t N>
const char* enum_name(E value, const std::pair<const char*, E> (&table)[N]) {
  for (const auto& [name, v] : table)
    if (v == value) return name;
  return "?";
}

constexpr std::pair<const char*, Method> kMethods[] = {
    {"Oracle", Method::oracle}, {"Baseline", Method::baseline}, {"LwF", Method::lwf},
    {"DR", Method::dr},         {"GD", Method::gd}};
constexpr std::pair<const char*, Balancing> kBalancing[] = {
    {"none", Balancing::none}, {"DW", Balancing::dw}, {"FT-DSet", Balancing::ft_dset}, {"FT-DW", Balancing::ft_dw}};
constexpr std::pair<const char*, Sampling> kSampling[] = {{"none", Sampling::none},
                                                           {"random-only", Sampling::random_only},
                                                           {"pred-only", Sampling::pred_only},
                                                           {"combined", Sampling::combined}};
constexpr std::pair<const char*, LossWeighting> kWeighting[] = {{"task-size", LossWeighting::task_size},
                                                                 {"uniform", LossWeighting::uniform}};

std::vector<std::size_t> column_argmax(const Matrix& m) {
  std::vector<std::size_t> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index arg = 0;
    m.col(j).maxCoeff(&arg);
    out[static_cast<std::size_t>(j)] = static_cast<std::size_t>(arg);
  }
  return out;
}

Term dst_term(std::string name, Role role, nnet::HeadRange heads, double gamma, double weight, Matrix targets) {
  Term t;
  t.name = std::move(name);
  t.kind = TermKind::dst;
  t.role = role;
  t.heads = heads;
  t.gamma = gamma;
  t.weight = weight;
  t.labels = column_argmax(targets);
  t.targets = std::move(targets);
  return t;
}

double term_weight(const TrainConfig& config, std::size_t classes, std::size_t total) {
  return config.loss_weighting == LossWeighting::task_size ? losses::loss_weight(classes, total) : 1.0;
}

void merge_traces(LossTraces* into, const LossTraces& from, const std::string& prefix) {
  if (!into) return;
  for (const auto& [name, trace] : from) (*into)[prefix + name] = trace;
}

}  // namespace

bool MethodVariant::needs_current_teacher() const noexcept {
  switch (method) {
    case Method::dr: return true;
    case Method::gd: return references.current || references.ensemble;
    default: return false;
  }
}

const char* to_string(Method m) { return enum_name(m, kMethods); }
const char* to_string(Balancing b) { return enum_name(b, kBalancing); }
const char* to_string(Sampling s) { return enum_name(s, kSampling); }
const char* to_string(LossWeighting w) { return enum_name(w, kWeighting); }
Method method_from_string(const std::string& s) { return parse_enum(s, kMethods, "method"); }
Balancing balancing_from_string(const std::string& s) { return parse_enum(s, kBalancing, "balancing"); }
Sampling sampling_from_string(const std::string& s) { return parse_enum(s, kSampling, "sampling"); }
LossWeighting loss_weighting_from_string(const std::string& s) {
  return parse_enum(s, kWeighting, "loss weighting");
}

nnet::Model train_current_teacher(const LabeledSet& d_t, std::size_t first_label, std::size_t num_classes,
                                  const Matrix& cnf_pool, bool use_cnf, const TrainConfig& config,
                                  std::uint64_t seed, LossTraces* traces) {
  if (d_t.empty()) throw InvalidInput("train_current_teacher: empty task data");
  if (num_classes == 0) throw InvalidInput("train_current_teacher: no classes");
  Rng init = make_rng(seed, kTeacherInit);
  nnet::Model model(d_t.dim(), config.hidden, init);
  model.add_head(num_classes, init);

  Objective obj;
  obj.data[static_cast<std::size_t>(Role::labeled)] = d_t.inputs;
  Term cls;
  cls.name = "cls";
  cls.kind = TermKind::cls;
  cls.role = Role::labeled;
  cls.heads = model.all_heads();
  for (auto y : d_t.labels) {
    if (y < first_label || y >= first_label + num_classes)
      throw InvalidInput("train_current_teacher: label " + std::to_string(y) + " is not in the current task");
    cls.labels.push_back(y - first_label);
  }
  obj.terms.push_back(std::move(cls));
  if (use_cnf) {
    obj.data[static_cast<std::size_t>(Role::external)] = cnf_pool;
    Term cnf;
    cnf.name = "cnf";
    cnf.kind = TermKind::cnf;
    cnf.role = Role::external;
    cnf.heads = model.all_heads();
    obj.terms.push_back(std::move(cnf));
  }

  Rng fit_rng = make_rng(seed, kTeacherFit);
  const auto tr = fit(model, obj, FitOptions{config.teacher, config.sgd, config.batch_size}, fit_rng);
  merge_traces(traces, tr, "teacher/");
  return model;
}

Objective build_main_objective(const nnet::Model& prev, const nnet::Model* current,
                               const nnet::Model& student, const LabeledSet& d_trn,
                               const Matrix& external, const MethodVariant& variant,
                               const TrainConfig& config) {
  const std::size_t t = student.num_heads();
  if (t < 2) throw InvalidConfig("main objective: the student needs a previous and a current head");
  if (prev.num_heads() != t - 1 ||
      !std::equal(prev.head_sizes().begin(), prev.head_sizes().end(), student.head_sizes().begin()))
    throw InvalidConfig("main objective: previous model heads do not match the student's previous heads");
  const std::size_t total = student.total_classes();
  const std::size_t old_classes = prev.total_classes();
  const std::size_t new_classes = student.head_sizes().back();
  const nnet::HeadRange prev_heads{0, t - 1};
  const nnet::HeadRange cur_head{t - 1, t};
  if (variant.needs_current_teacher()) {
    if (!current) throw InvalidConfig("main objective: variant needs a current-task teacher");
    if (current->num_heads() != 1 || current->total_classes() != new_classes)
      throw InvalidConfig("main objective: current-task teacher does not match the new head");
  }
  const Matrix ext = variant.use_external() ? external : Matrix(student.input_dim(), 0);

  Objective obj;
  obj.data[static_cast<std::size_t>(Role::labeled)] = d_trn.inputs;
  obj.data[static_cast<std::size_t>(Role::combined)] = hstack(d_trn.inputs, ext);
  obj.data[static_cast<std::size_t>(Role::external)] = ext;
  const Matrix& combined = obj.inputs(Role::combined);

  Term cls;
  cls.name = "cls";
  cls.kind = TermKind::cls;
  cls.role = Role::labeled;
  cls.heads = student.all_heads();
  cls.labels = d_trn.labels;
  obj.terms.push_back(std::move(cls));

  auto current_term = [&] {
    obj.terms.push_back(dst_term("dst_current", Role::combined, cur_head, config.gamma_current,
                                 term_weight(config, new_classes, total),
                                 nnet::softmax_columns(nnet::forward(*current, combined, current->all_heads()),
                                                       config.gamma_current)));
  };

  switch (variant.method) {
    case Method::oracle:
    case Method::baseline:
      break;
    case Method::lwf:
    case Method::dr:
      for (std::size_t s = 0; s + 1 < t; ++s) {
        const nnet::HeadRange head{s, s + 1};
        obj.terms.push_back(dst_term("dst_local_" + std::to_string(s + 1), Role::combined, head,
                                     config.gamma_previous,
                                     term_weight(config, prev.head_sizes()[s], total),
                                     nnet::softmax_columns(nnet::forward(prev, combined, head),
                                                           config.gamma_previous)));
      }
      if (variant.method == Method::dr) current_term();
      break;
    case Method::gd:
      if (variant.references.previous)
        obj.terms.push_back(dst_term("dst_previous", Role::combined, prev_heads, config.gamma_previous,
                                     term_weight(config, old_classes, total),
                                     nnet::softmax_columns(nnet::forward(prev, combined, prev.all_heads()),
                                                           config.gamma_previous)));
      if (variant.references.current) current_term();
      if (variant.references.ensemble && ext.cols() > 0) {
        const Matrix p_prev =
            nnet::softmax_columns(nnet::forward(prev, ext, prev.all_heads()), config.gamma_ensemble);
        const Matrix p_cur =
            nnet::softmax_columns(nnet::forward(*current, ext, current->all_heads()), config.gamma_ensemble);
        obj.terms.push_back(dst_term("dst_ensemble", Role::external, student.all_heads(), config.gamma_ensemble,
                                     term_weight(config, total, total),
                                     ensemble::q_predict_columns(p_prev, p_cur)));
      }
      break;
  }
  obj.validate(student);
  return obj;
}

namespace {

FitOptions main_options(const MethodVariant& variant, const TrainConfig& config) {
  return FitOptions{variant.fine_tunes() ? config.main_before_finetune : config.main, config.sgd, config.batch_size};
}

nnet::Model warm_start(const nnet::Model& prev, std::size_t new_classes, std::uint64_t seed) {
  nnet::Model student = prev;
  Rng rng = make_rng(seed, kHeadInit);
  student.add_head(new_classes, rng);
  return student;
}

nnet::Model train_student(nnet::Model student, const Objective& obj, const MethodVariant& variant,
                          const TrainConfig& config, std::uint64_t seed, LossTraces* traces) {
  Objective weighted;
  const Objective* use = &obj;
  if (variant.balancing == Balancing::dw) {
    weighted = obj;
    apply_data_weighting(weighted, student);
    use = &weighted;
  }
  Rng rng = make_rng(seed, kMainFit);
  merge_traces(traces, fit(student, *use, main_options(variant, config), rng), "main/");
  return student;
}

}  // namespace

nnet::Model train_main(const nnet::Model& prev, const nnet::Model* current, const LabeledSet& d_trn,
                       const Matrix& external, std::size_t new_classes, const MethodVariant& variant,
                       const TrainConfig& config, std::uint64_t seed, LossTraces* traces) {
  nnet::Model student = warm_start(prev, new_classes, seed);
  const Objective obj = build_main_objective(prev, current, student, d_trn, external, variant, config);
  return train_student(std::move(student), obj, variant, config, seed, traces);
}

Objective restrict_labeled(const Objective& objective, std::span<const std::size_t> keep, std::size_t num_labeled) {
  if (static_cast<std::size_t>(objective.inputs(Role::labeled).cols()) != num_labeled)
    throw InvalidInput("restrict_labeled: labeled role size mismatch");
  const auto combined_n = static_cast<std::size_t>(objective.inputs(Role::combined).cols());
  for (auto k : keep)
    if (k >= num_labeled) throw InvalidInput("restrict_labeled: index out of range");

  std::vector<std::size_t> combined_keep(keep.begin(), keep.end());
  if (combined_n > 0) {
    if (combined_n < num_labeled) throw InvalidInput("restrict_labeled: combined role lacks the labeled prefix");
    for (std::size_t j = num_labeled; j < combined_n; ++j) combined_keep.push_back(j);
  }

  auto cols = [](const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(idx[j]));
    return out;
  };
  const std::vector<std::size_t> labeled_keep(keep.begin(), keep.end());

  Objective out = objective;
  out.data[static_cast<std::size_t>(Role::labeled)] = cols(objective.inputs(Role::labeled), labeled_keep);
  if (combined_n > 0)
    out.data[static_cast<std::size_t>(Role::combined)] = cols(objective.inputs(Role::combined), combined_keep);
  for (auto& t : out.terms) {
    if (t.role == Role::external) continue;
    const auto& idx = t.role == Role::labeled ? labeled_keep : combined_keep;
    std::vector<std::size_t> labels;
    for (auto i : idx) labels.push_back(t.labels[i]);
    t.labels = std::move(labels);
    if (t.kind == TermKind::dst) t.targets = cols(t.targets, idx);
    if (!t.example_weights.empty()) {
      std::vector<double> w;
      for (auto i : idx) w.push_back(t.example_weights[i]);
      t.example_weights = std::move(w);
    }
  }
  return out;
}

namespace {

// Random subset with every class cut down to the rarest class count, in original order.
std::vector<std::size_t> undersample(const std::vector<std::size_t>& labels, Rng& rng) {
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::size_t quota = std::numeric_limits<std::size_t>::max();
  for (const auto& [cls, idx] : by_class) quota = std::min(quota, idx.size());
  std::vector<std::size_t> keep;
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota));
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace

nnet::Model balanced_finetune(const nnet::Model& m, const Objective& objective, Balancing mode,
                              std::size_t num_labeled, const TrainConfig& config, std::uint64_t seed,
                              LossTraces* traces) {
  if (mode == Balancing::none || mode == Balancing::dw) return m;
  nnet::Model out = m;
  Rng rng = make_rng(seed, kFinetuneFit);
  FitOptions options{config.finetune, config.sgd, config.batch_size};
  if (mode == Balancing::ft_dw) {
    Objective weighted = objective;
    apply_data_weighting(weighted, out);
    options.scope = nnet::UpdateScope::heads_only;
    merge_traces(traces, fit(out, weighted, options, rng), "finetune/");
  } else {
    if (objective.terms.empty() || objective.terms.front().kind != TermKind::cls ||
        objective.terms.front().labels.size() != num_labeled)
      throw InvalidConfig("balanced_finetune: FT-DSet needs the labeled cls term first");
    Rng pick = make_rng(seed, kUndersample);
    const auto keep = undersample(objective.terms.front().labels, pick);
    merge_traces(traces, fit(out, restrict_labeled(objective, keep, num_labeled), options, rng), "finetune/");
  }
  return out;
}

double prediction_bias(const nnet::Model& model, const Matrix& inputs) {
  if (inputs.cols() == 0) throw InvalidInput("prediction_bias: empty input");
  const std::size_t k = model.total_classes();
  std::vector<double> hist(k, 0.0);
  for (auto y : column_argmax(nnet::forward(model, inputs, model.all_heads()))) hist[y] += 1.0;
  double l1 = 0.0;
  for (double h : hist) l1 += std::abs(h / static_cast<double>(inputs.cols()) - 1.0 / static_cast<double>(k));
  return l1;
}

StageResult run_stage(const StageResult* prev, const StageInput& input, const MethodVariant& variant,
                      const TrainConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  if (!input.train || input.train->empty()) throw InvalidInput("run_stage: empty task data");
  const std::size_t stage = prev ? prev->stage + 1 : 1;
  if (input.tests.size() != stage) throw InvalidInput("run_stage: need one test set per stage so far");
  if (prev && prev->model.total_classes() != input.first_label)
    throw InvalidConfig("run_stage: task labels do not continue the previous model's classes");
  if (!prev && input.first_label != 0) throw InvalidConfig("run_stage: the first task must start at label 0");
  if (variant.use_external() && !input.stream) throw InvalidConfig("run_stage: variant needs an unlabeled stream");

  const std::size_t dim = input.train->dim();
  const LabeledSet d_trn = prev ? concat(*input.train, prev->coreset.examples) : *input.train;
  StageDiagnostics diag;
  diag.labeled_size = d_trn.size();
  LossTraces traces;

  // External data. Without a previous model nothing can be scored, so the
  // first stage draws it at random.
  Matrix ext(static_cast<Eigen::Index>(dim), 0);
  if (variant.use_external()) {
    double ratio = config.ood_ratio;
    if (!prev || variant.sampling == Sampling::random_only) ratio = 1.0;
    else if (variant.sampling == Sampling::pred_only) ratio = 0.0;
    sampler::SampleRequest req{config.external_size ? config.external_size : d_trn.size(), config.n_max, ratio,
                               config.score_batch};
    const auto set = sampler::sample_external(prev ? &prev->model : nullptr, *input.stream, req);
    ext = sampler::flatten(set, dim);
    diag.external_ood = set.ood_bucket.size();
    diag.external_prev = set.prev_size();
    diag.retrieved = set.retrieved_count;
  }
  diag.external_size = static_cast<std::size_t>(ext.cols());

  std::optional<nnet::Model> teacher;
  if (!prev || variant.needs_current_teacher()) {
    const Matrix pool = prev ? hstack(prev->coreset.examples.inputs, ext) : ext;
    const bool use_cnf = variant.teacher_cnf && pool.cols() > 0;
    teacher = train_current_teacher(*input.train, input.first_label, input.num_classes, pool, use_cnf, config,
                                    input.seed, &traces);
  }

  Matrix test_pool(static_cast<Eigen::Index>(dim), 0);
  for (const auto* t : input.tests) test_pool = hstack(test_pool, t->inputs);

  std::optional<nnet::Model> model;
  if (!prev) {
    model = std::move(teacher);
    diag.bias_before_finetune = diag.bias_after_finetune = prediction_bias(*model, test_pool);
  } else {
    nnet::Model student = warm_start(prev->model, input.num_classes, input.seed);
    const Objective obj = build_main_objective(prev->model, teacher ? &*teacher : nullptr, student, d_trn, ext,
                                               variant, config);
    student = train_student(std::move(student), obj, variant, config, input.seed, &traces);
    diag.bias_before_finetune = prediction_bias(student, test_pool);
    model = balanced_finetune(student, obj, variant.balancing, d_trn.size(), config, input.seed, &traces);
    diag.bias_after_finetune = prediction_bias(*model, test_pool);
  }

  std::vector<std::size_t> classes(model->total_classes());
  std::iota(classes.begin(), classes.end(), 0);
  const std::size_t capacity =
      variant.method == Method::oracle ? std::numeric_limits<std::size_t>::max() : config.coreset_size;
  Rng coreset_rng = make_rng(input.seed, kCoreset);
  Coreset coreset = update_coreset(d_trn, capacity, classes, coreset_rng);

  std::vector<double> accuracy;
  for (const auto* t : input.tests) accuracy.push_back(metrics::task_accuracy(*model, *t));

  diag.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return StageResult{stage, std::move(*model), std::move(coreset), std::move(accuracy), std::move(traces), diag};
}

SequenceResult run_sequence(const std::vector<taskgen::TaskData>& tasks, const StreamFactory& streams,
                            const MethodVariant& variant, const TrainConfig& config, std::uint64_t seed) {
  if (tasks.empty()) throw InvalidInput("run_sequence: no tasks");
  std::vector<std::size_t> sizes;
  for (const auto& t : tasks) sizes.push_back(t.num_classes);
  SequenceResult out{metrics::AccuracyMatrix(sizes), {}};
  for (std::size_t s = 0; s < tasks.size(); ++s) {
    StageInput in;
    in.train = &tasks[s].train;
    for (std::size_t r = 0; r <= s; ++r) in.tests.push_back(&tasks[r].test);
    in.first_label = tasks[s].first_label;
    in.num_classes = tasks[s].num_classes;
    std::unique_ptr<UnlabeledStream> stream;
    if (variant.use_external()) {
      stream = streams(s + 1);
      in.stream = stream.get();
    }
    in.seed = mix_seed(seed, s + 1);
    StageResult res = run_stage(out.stages.empty() ? nullptr : &out.stages.back(), in, variant, config);
    for (std::size_t r = 0; r <= s; ++r) out.accuracy.set(r + 1, s + 1, res.accuracy[r]);
    // Earlier stages keep their metrics but not their training state.
    if (!out.stages.empty()) out.stages.back().coreset = Coreset{};
    out.stages.push_back(std::move(res));
  }
  return out;
}

}  // namespace gdcl::trainer

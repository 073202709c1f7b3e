#include "gdcl/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace gdcl::nnet {

namespace {

Layer init_layer(std::size_t out, std::size_t in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Layer layer{Matrix(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
              Vector(static_cast<Eigen::Index>(out))};
  // Row-major fill order so the draw sequence does not depend on storage order.
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = dist(rng);
  return layer;
}

// Scalar libm calls, so a column's values do not depend on its position in the batch.
Matrix softplus(const Matrix& z) {
  return z.unaryExpr([](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
}

Matrix sigmoid(const Matrix& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

double column_sum(const Matrix& m, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) s += m(i, j);
  return s;
}

bool same_layer_shape(const Layer& a, const Layer& b) {
  return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
         a.bias.size() == b.bias.size();
}

}  // namespace

bool Layer::operator==(const Layer& other) const {
  return same_layer_shape(*this, other) && weight == other.weight && bias == other.bias;
}

bool ParamSet::same_shape(const ParamSet& other) const {
  if (trunk.size() != other.trunk.size() || heads.size() != other.heads.size()) return false;
  for (std::size_t i = 0; i < trunk.size(); ++i)
    if (!same_layer_shape(trunk[i], other.trunk[i])) return false;
  for (std::size_t i = 0; i < heads.size(); ++i)
    if (!same_layer_shape(heads[i], other.heads[i])) return false;
  return true;
}

void ParamSet::set_zero() {
  for (auto* group : {&trunk, &heads})
    for (auto& l : *group) {
      l.weight.setZero();
      l.bias.setZero();
    }
}

ParamSet& ParamSet::operator+=(const ParamSet& other) {
  if (!same_shape(other)) throw ContractViolation("ParamSet::operator+=: shape mismatch");
  for (std::size_t i = 0; i < trunk.size(); ++i) {
    trunk[i].weight += other.trunk[i].weight;
    trunk[i].bias += other.trunk[i].bias;
  }
  for (std::size_t i = 0; i < heads.size(); ++i) {
    heads[i].weight += other.heads[i].weight;
    heads[i].bias += other.heads[i].bias;
  }
  return *this;
}

void ParamSet::for_each(const std::function<void(const std::string&, Eigen::Ref<Matrix>)>& fn) {
  for (std::size_t i = 0; i < trunk.size(); ++i) {
    fn("trunk[" + std::to_string(i) + "].weight", trunk[i].weight);
    fn("trunk[" + std::to_string(i) + "].bias", trunk[i].bias);
  }
  for (std::size_t i = 0; i < heads.size(); ++i) {
    fn("heads[" + std::to_string(i) + "].weight", heads[i].weight);
    fn("heads[" + std::to_string(i) + "].bias", heads[i].bias);
  }
}

void ParamSet::for_each(
    const std::function<void(const std::string&, const Eigen::Ref<const Matrix>&)>& fn) const {
  for (std::size_t i = 0; i < trunk.size(); ++i) {
    fn("trunk[" + std::to_string(i) + "].weight", trunk[i].weight);
    fn("trunk[" + std::to_string(i) + "].bias", trunk[i].bias);
  }
  for (std::size_t i = 0; i < heads.size(); ++i) {
    fn("heads[" + std::to_string(i) + "].weight", heads[i].weight);
    fn("heads[" + std::to_string(i) + "].bias", heads[i].bias);
  }
}

std::size_t ParamSet::num_values() const {
  std::size_t n = 0;
  for (const auto* group : {&trunk, &heads})
    for (const auto& l : *group) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Model::Model(std::size_t input_dim, std::span<const std::size_t> hidden, Rng& rng)
    : input_dim_(input_dim) {
  if (input_dim == 0) throw InvalidInput("Model: input_dim must be positive");
  std::size_t in = input_dim;
  for (auto width : hidden) {
    if (width == 0) throw InvalidInput("Model: hidden width must be positive");
    params_.trunk.push_back(init_layer(width, in, rng));
    in = width;
  }
}

Model::Model(std::size_t input_dim, ParamSet params, std::vector<std::size_t> head_sizes)
    : input_dim_(input_dim), params_(std::move(params)), head_sizes_(std::move(head_sizes)) {
  validate();
}

void Model::validate() const {
  if (input_dim_ == 0) throw InvalidInput("Model: input_dim must be positive");
  if (head_sizes_.size() != params_.heads.size())
    throw InvalidInput("Model: head_sizes does not match number of heads");
  std::size_t in = input_dim_;
  for (const auto& l : params_.trunk) {
    if (static_cast<std::size_t>(l.weight.cols()) != in || l.bias.size() != l.weight.rows())
      throw InvalidInput("Model: inconsistent trunk layer shapes");
    in = static_cast<std::size_t>(l.weight.rows());
  }
  for (std::size_t h = 0; h < params_.heads.size(); ++h) {
    const auto& l = params_.heads[h];
    if (static_cast<std::size_t>(l.weight.cols()) != in ||
        static_cast<std::size_t>(l.weight.rows()) != head_sizes_[h] || l.bias.size() != l.weight.rows())
      throw InvalidInput("Model: inconsistent head shapes");
  }
  params_.for_each([](const std::string& path, const Eigen::Ref<const Matrix>& m) {
    if (!m.allFinite()) throw NumericError(path, "non-finite parameter");
  });
}

void Model::add_head(std::size_t num_classes, Rng& rng) {
  if (num_classes == 0) throw InvalidInput("add_head: num_classes must be positive");
  params_.heads.push_back(init_layer(num_classes, feature_dim(), rng));
  head_sizes_.push_back(num_classes);
  ++revision_;
}

std::size_t Model::feature_dim() const noexcept {
  return params_.trunk.empty() ? input_dim_
                               : static_cast<std::size_t>(params_.trunk.back().weight.rows());
}

std::size_t Model::total_classes() const noexcept {
  std::size_t n = 0;
  for (auto s : head_sizes_) n += s;
  return n;
}

std::size_t Model::class_offset(std::size_t head) const {
  if (head > head_sizes_.size()) throw InvalidInput("class_offset: head out of range");
  std::size_t n = 0;
  for (std::size_t h = 0; h < head; ++h) n += head_sizes_[h];
  return n;
}

std::size_t Model::classes_in(HeadRange range) const {
  if (range.first > range.last || range.last > num_heads())
    throw InvalidInput("head range outside existing heads");
  return class_offset(range.last) - class_offset(range.first);
}

ParamSet& Model::mutable_params() noexcept {
  ++revision_;
  return params_;
}

ParamSet Model::zeros_like() const {
  ParamSet z = params_;
  z.set_zero();
  return z;
}

namespace {

Matrix forward_impl(const Model& model, const Matrix& inputs, HeadRange range, Tape* tape) {
  if (inputs.cols() == 0) throw InvalidInput("forward: empty batch");
  if (static_cast<std::size_t>(inputs.rows()) != model.input_dim())
    throw InvalidInput("forward: input dimension " + std::to_string(inputs.rows()) +
                       " does not match model input " + std::to_string(model.input_dim()));
  if (range.first >= range.last || range.last > model.num_heads())
    throw InvalidInput("forward: head range outside existing heads");

  const auto& p = model.params();
  Matrix act = inputs;
  if (tape) {
    tape->model = &model;
    tape->revision = model.revision();
    tape->range = range;
    tape->pre.clear();
    tape->act.clear();
    tape->act.push_back(inputs);
  }
  for (const auto& layer : p.trunk) {
    Matrix pre = layer.weight * act;
    pre.colwise() += layer.bias;
    act = softplus(pre);
    if (tape) {
      tape->pre.push_back(std::move(pre));
      tape->act.push_back(act);
    }
  }

  Matrix logits(static_cast<Eigen::Index>(model.classes_in(range)), inputs.cols());
  Eigen::Index row = 0;
  for (std::size_t h = range.first; h < range.last; ++h) {
    const auto& head = p.heads[h];
    auto block = logits.middleRows(row, head.weight.rows());
    block.noalias() = head.weight * act;
    block.colwise() += head.bias;
    row += head.weight.rows();
  }
  return logits;
}

}  // namespace

Matrix forward(const Model& model, const Matrix& inputs, HeadRange range) {
  return forward_impl(model, inputs, range, nullptr);
}

Matrix forward(const Model& model, const Matrix& inputs, HeadRange range, Tape& tape) {
  return forward_impl(model, inputs, range, &tape);
}

void backward(const Model& model, const Tape& tape, const Matrix& logit_grad, ParamSet& grads) {
  if (tape.model != &model || tape.revision != model.revision())
    throw ContractViolation("backward: tape does not belong to the current model state");
  if (tape.act.empty())
    throw ContractViolation("backward: tape was not produced by a forward pass");
  const Eigen::Index batch = tape.act.front().cols();
  if (logit_grad.cols() != batch ||
      static_cast<std::size_t>(logit_grad.rows()) != model.classes_in(tape.range))
    throw ContractViolation("backward: logit gradient shape does not match forward output");
  if (!grads.same_shape(model.params()))
    throw ContractViolation("backward: gradient set shape does not match model");

  const auto& p = model.params();
  const Matrix& features = tape.act.back();
  Matrix d_act = Matrix::Zero(features.rows(), batch);
  Eigen::Index row = 0;
  for (std::size_t h = tape.range.first; h < tape.range.last; ++h) {
    const auto& head = p.heads[h];
    const auto g = logit_grad.middleRows(row, head.weight.rows());
    grads.heads[h].weight.noalias() += g * features.transpose();
    grads.heads[h].bias += g.rowwise().sum();
    d_act.noalias() += head.weight.transpose() * g;
    row += head.weight.rows();
  }

  for (std::size_t i = p.trunk.size(); i-- > 0;) {
    Matrix d_pre = d_act.array() * sigmoid(tape.pre[i]).array();
    grads.trunk[i].weight.noalias() += d_pre * tape.act[i].transpose();
    grads.trunk[i].bias += d_pre.rowwise().sum();
    if (i > 0) d_act.noalias() = p.trunk[i].weight.transpose() * d_pre;
  }
}

ParamSet backward(const Model& model, const Tape& tape, const Matrix& logit_grad) {
  ParamSet grads = model.zeros_like();
  backward(model, tape, logit_grad, grads);
  return grads;
}

Vector softmax_temperature(const Vector& logits, double gamma) {
  if (!(gamma > 0.0)) throw InvalidInput("softmax_temperature: gamma must be positive");
  if (logits.size() == 0) throw InvalidInput("softmax_temperature: empty logits");
  Vector z = logits / gamma;
  z.array() -= z.maxCoeff();
  Vector e = z.unaryExpr([](double v) { return std::exp(v); });
  return e / column_sum(e, 0);
}

Matrix softmax_columns(const Matrix& logits, double gamma) {
  if (!(gamma > 0.0)) throw InvalidInput("softmax_columns: gamma must be positive");
  Matrix z = logits / gamma;
  z.rowwise() -= z.colwise().maxCoeff();
  Matrix e = z.unaryExpr([](double v) { return std::exp(v); });
  for (Eigen::Index j = 0; j < e.cols(); ++j) e.col(j) /= column_sum(e, j);
  return e;
}

Matrix log_softmax_columns(const Matrix& logits) {
  Matrix z = logits;
  z.rowwise() -= logits.colwise().maxCoeff();
  const Matrix e = z.unaryExpr([](double v) { return std::exp(v); });
  for (Eigen::Index j = 0; j < z.cols(); ++j) z.col(j).array() -= std::log(column_sum(e, j));
  return z;
}

OptimizerState::OptimizerState(const Model& model, SgdSettings s)
    : velocity(model.zeros_like()), settings(s) {
  if (!(s.lr > 0.0)) throw InvalidConfig("sgd: learning rate must be positive");
  if (s.momentum < 0.0 || s.momentum >= 1.0) throw InvalidConfig("sgd: momentum must be in [0,1)");
  if (s.weight_decay < 0.0) throw InvalidConfig("sgd: weight decay must be nonnegative");
}

void sgd_step(OptimizerState& state, Model& model, const ParamSet& grads, UpdateScope scope) {
  if (!grads.same_shape(model.params()) || !state.velocity.same_shape(model.params()))
    throw ContractViolation("sgd_step: gradient/velocity shapes do not match model");
  grads.for_each([](const std::string& path, const Eigen::Ref<const Matrix>& g) {
    if (!g.allFinite()) throw NumericError(path, "non-finite gradient");
  });

  const auto [lr, mu, wd] = state.settings;
  auto update = [&](Layer& param, Layer& vel, const Layer& g) {
    vel.weight = mu * vel.weight + g.weight + wd * param.weight;
    vel.bias = mu * vel.bias + g.bias + wd * param.bias;
    param.weight -= lr * vel.weight;
    param.bias -= lr * vel.bias;
  };

  auto& p = model.mutable_params();
  if (scope == UpdateScope::all)
    for (std::size_t i = 0; i < p.trunk.size(); ++i) update(p.trunk[i], state.velocity.trunk[i], grads.trunk[i]);
  for (std::size_t i = 0; i < p.heads.size(); ++i) update(p.heads[i], state.velocity.heads[i], grads.heads[i]);

  p.for_each([](const std::string& path, Eigen::Ref<Matrix> m) {
    if (!m.allFinite()) throw NumericError(path, "parameter became non-finite");
  });
}

std::uint64_t fingerprint(const Model& model) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (auto s : model.head_sizes()) mix(&s, sizeof s);
  model.params().for_each([&](const std::string&, const Eigen::Ref<const Matrix>& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double v = m(r, c);
        mix(&v, sizeof v);
      }
  });
  return h;
}

}  // namespace gdcl::nnet

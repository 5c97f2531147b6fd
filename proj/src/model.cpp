#include "exitnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace exitnet {

std::string to_string(Nonlinearity n) { return n == Nonlinearity::relu ? "relu" : "tanh"; }

Nonlinearity parse_nonlinearity(const std::string& s) {
  if (s == "relu") return Nonlinearity::relu;
  if (s == "tanh") return Nonlinearity::tanh;
  throw std::invalid_argument("unknown nonlinearity '" + s + "' (expected relu or tanh)");
}

void ModelConfig::validate() const {
  if (num_layers < 2) throw std::invalid_argument("need at least one internal and one final classifier");
  if (width <= 0) throw std::invalid_argument("model width must be positive");
  if (input_dim <= 0) throw std::invalid_argument("model input dim must be positive");
  if (num_classes < 2) throw std::invalid_argument("model needs at least two classes");
}

namespace {

Tensor xavier(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor t(Shape{fan_in, fan_out});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

MultiExitModel::MultiExitModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const auto d = static_cast<std::size_t>(config_.input_dim);
  const auto h = static_cast<std::size_t>(config_.width);
  const auto c = static_cast<std::size_t>(config_.num_classes);
  params_.reserve(2 + 6 * static_cast<std::size_t>(config_.num_layers));
  params_.emplace_back("input.weight", xavier(d, h, rng));
  params_.emplace_back("input.bias", Tensor(Shape{h}));
  for (int m = 1; m <= config_.num_layers; ++m) {
    const std::string block = "block" + std::to_string(m);
    const std::string head = "exit" + std::to_string(m);
    params_.emplace_back(block + ".w1", xavier(h, h, rng));
    params_.emplace_back(block + ".b1", Tensor(Shape{h}));
    params_.emplace_back(block + ".w2", xavier(h, h, rng));
    params_.emplace_back(block + ".b2", Tensor(Shape{h}));
    params_.emplace_back(head + ".weight", xavier(h, c, rng));
    params_.emplace_back(head + ".bias", Tensor(Shape{c}));
  }
}

std::size_t MultiExitModel::block_offset(int layer) const {
  if (layer < 1 || layer > config_.num_layers) {
    throw std::out_of_range("layer " + std::to_string(layer) + " outside [1, " + std::to_string(config_.num_layers) + "]");
  }
  return 2 + 6 * static_cast<std::size_t>(layer - 1);
}

void MultiExitModel::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

MultiExitModel init_model(const ModelConfig& config) { return MultiExitModel(config); }

int argmax(std::span<const double> v) {
  return static_cast<int>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

int LayerOutputs::predicted(std::size_t n, int layer) const { return argmax(prob(n, layer)); }

std::vector<Var> bind_parameters(Graph& g, MultiExitModel& model) {
  std::vector<Var> vars;
  vars.reserve(model.parameters().size());
  for (auto& p : model.parameters()) vars.push_back(g.param(p));
  return vars;
}

GraphOutputs forward_graph(std::span<const Var> params, Var batch, const ModelConfig& config) {
  if (batch.value().rank() != 2 || batch.value().cols() != static_cast<std::size_t>(config.input_dim)) {
    throw std::invalid_argument("forward: batch must be N x " + std::to_string(config.input_dim));
  }
  const auto act = [&](Var v) { return config.nonlinearity == Nonlinearity::relu ? relu(v) : tanh(v); };
  GraphOutputs out;
  Var h = matmul(batch, params[0]) + params[1];
  for (int m = 0; m < config.num_layers; ++m) {
    const std::size_t o = 2 + 6 * static_cast<std::size_t>(m);
    Var inner = act(matmul(h, params[o]) + params[o + 1]);
    h = h + (matmul(inner, params[o + 2]) + params[o + 3]);
    out.hidden.push_back(h);
    out.logits.push_back(matmul(h, params[o + 4]) + params[o + 5]);
  }
  return out;
}

namespace {

Tensor activate(const Tensor& t, Nonlinearity n) {
  return n == Nonlinearity::relu ? kernels::relu(t) : kernels::tanh(t);
}

}  // namespace

LayerOutputs forward_all(const MultiExitModel& model, const Tensor& batch) {
  const ModelConfig& cfg = model.config();
  if (batch.rank() != 2 || batch.cols() != static_cast<std::size_t>(cfg.input_dim)) {
    throw std::invalid_argument("forward: batch must be N x " + std::to_string(cfg.input_dim));
  }
  if (!batch.all_finite()) throw std::invalid_argument("forward: batch contains non-finite values");
  LayerOutputs out;
  Tensor h = kernels::add(kernels::matmul(batch, model.input_weight().value), model.input_bias().value);
  for (int m = 1; m <= cfg.num_layers; ++m) {
    Tensor inner = activate(kernels::add(kernels::matmul(h, model.block_w1(m).value), model.block_b1(m).value),
                            cfg.nonlinearity);
    h = kernels::add(h, kernels::add(kernels::matmul(inner, model.block_w2(m).value), model.block_b2(m).value));
    Tensor logits = kernels::add(kernels::matmul(h, model.exit_weight(m).value), model.exit_bias(m).value);
    out.probs.push_back(kernels::softmax_rows(logits));
    out.logits.push_back(std::move(logits));
    out.hidden.push_back(h);
  }
  return out;
}

IncrementalForward::IncrementalForward(const MultiExitModel& model, std::span<const double> x) : model_(model) {
  const ModelConfig& cfg = model.config();
  if (x.size() != static_cast<std::size_t>(cfg.input_dim)) {
    throw std::invalid_argument("forward: sample has " + std::to_string(x.size()) + " features, model expects " +
                                std::to_string(cfg.input_dim));
  }
  Tensor row(Shape{1, x.size()}, std::vector<double>(x.begin(), x.end()));
  hidden_ = kernels::add(kernels::matmul(row, model.input_weight().value), model.input_bias().value);
  flops_ += static_cast<std::uint64_t>(cfg.input_dim) * static_cast<std::uint64_t>(cfg.width);
}

const std::vector<double>& IncrementalForward::advance() {
  const ModelConfig& cfg = model_.config();
  if (layer_ >= cfg.num_layers) throw std::out_of_range("advance: all layers already evaluated");
  const int m = ++layer_;
  const auto w = static_cast<std::uint64_t>(cfg.width);
  Tensor inner = activate(kernels::add(kernels::matmul(hidden_, model_.block_w1(m).value), model_.block_b1(m).value),
                          cfg.nonlinearity);
  hidden_ = kernels::add(hidden_, kernels::add(kernels::matmul(inner, model_.block_w2(m).value), model_.block_b2(m).value));
  Tensor logits = kernels::add(kernels::matmul(hidden_, model_.exit_weight(m).value), model_.exit_bias(m).value);
  flops_ += 2 * w * w + w * static_cast<std::uint64_t>(cfg.num_classes);
  Tensor probs = kernels::softmax_rows(logits);
  logits_.assign(logits.data().begin(), logits.data().end());
  probs_.assign(probs.data().begin(), probs.data().end());
  return probs_;
}

std::vector<double> predict_at(const MultiExitModel& model, std::span<const double> x, int layer) {
  if (layer < 1 || layer > model.num_layers()) {
    throw std::out_of_range("predict_at: layer " + std::to_string(layer) + " outside [1, " +
                            std::to_string(model.num_layers()) + "]");
  }
  IncrementalForward fwd(model, x);
  while (fwd.layers_evaluated() < layer) fwd.advance();
  return fwd.probs();
}

}  // namespace exitnet

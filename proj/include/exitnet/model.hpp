#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "exitnet/autodiff.hpp"
#include "exitnet/tensor.hpp"

namespace exitnet {

enum class Nonlinearity { relu, tanh };

std::string to_string(Nonlinearity n);
Nonlinearity parse_nonlinearity(const std::string& s);

struct ModelConfig {
  int num_layers = 6;
  int width = 32;
  int input_dim = 16;
  int num_classes = 2;
  Nonlinearity nonlinearity = Nonlinearity::relu;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Residual feed-forward stack with one unshared linear classifier per layer:
//   h0 = x Win + bin
//   hm = h(m-1) + act(h(m-1) W1m + b1m) W2m + b2m
//   logits_m = hm Wcm + bcm
class MultiExitModel {
 public:
  explicit MultiExitModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  int num_layers() const { return config_.num_layers; }
  int num_classes() const { return config_.num_classes; }

  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  void zero_grad();

  Parameter& input_weight() { return params_[0]; }
  Parameter& input_bias() { return params_[1]; }
  const Parameter& input_weight() const { return params_[0]; }
  const Parameter& input_bias() const { return params_[1]; }
  // layer is 1-based throughout the public API.
  Parameter& block_w1(int layer) { return params_[block_offset(layer)]; }
  Parameter& block_b1(int layer) { return params_[block_offset(layer) + 1]; }
  Parameter& block_w2(int layer) { return params_[block_offset(layer) + 2]; }
  Parameter& block_b2(int layer) { return params_[block_offset(layer) + 3]; }
  Parameter& exit_weight(int layer) { return params_[block_offset(layer) + 4]; }
  Parameter& exit_bias(int layer) { return params_[block_offset(layer) + 5]; }
  const Parameter& block_w1(int layer) const { return params_[block_offset(layer)]; }
  const Parameter& block_b1(int layer) const { return params_[block_offset(layer) + 1]; }
  const Parameter& block_w2(int layer) const { return params_[block_offset(layer) + 2]; }
  const Parameter& block_b2(int layer) const { return params_[block_offset(layer) + 3]; }
  const Parameter& exit_weight(int layer) const { return params_[block_offset(layer) + 4]; }
  const Parameter& exit_bias(int layer) const { return params_[block_offset(layer) + 5]; }

 private:
  std::size_t block_offset(int layer) const;

  ModelConfig config_;
  std::vector<Parameter> params_;
};

MultiExitModel init_model(const ModelConfig& config);

// Per-layer outputs for a batch, stored layer-major: hidden[m-1] is N×width,
// logits[m-1] and probs[m-1] are N×C.
struct LayerOutputs {
  std::vector<Tensor> hidden;
  std::vector<Tensor> logits;
  std::vector<Tensor> probs;

  std::size_t num_samples() const { return logits.empty() ? 0 : logits.front().rows(); }
  int num_layers() const { return static_cast<int>(logits.size()); }
  int num_classes() const { return logits.empty() ? 0 : static_cast<int>(logits.front().cols()); }
  std::span<const double> prob(std::size_t n, int layer) const { return probs[layer - 1].row(n); }
  std::span<const double> logit(std::size_t n, int layer) const { return logits[layer - 1].row(n); }
  // argmax of the layer's probability row.
  int predicted(std::size_t n, int layer) const;
};

// Graph-attached forward pass used for training.
struct GraphOutputs {
  std::vector<Var> hidden;
  std::vector<Var> logits;
};

GraphOutputs forward_graph(std::span<const Var> params, Var batch, const ModelConfig& config);
// Binds every model parameter into the graph, in parameters() order.
std::vector<Var> bind_parameters(Graph& g, MultiExitModel& model);

LayerOutputs forward_all(const MultiExitModel& model, const Tensor& batch);

// Layer-by-layer evaluation of a single sample. Each advance() runs exactly one
// block and one classifier head, with kernels shared with forward_all.
class IncrementalForward {
 public:
  IncrementalForward(const MultiExitModel& model, std::span<const double> x);

  // Evaluates the next layer and returns its probability row.
  const std::vector<double>& advance();
  int layers_evaluated() const { return layer_; }
  std::uint64_t flops() const { return flops_; }
  const std::vector<double>& logits() const { return logits_; }
  const std::vector<double>& probs() const { return probs_; }

 private:
  const MultiExitModel& model_;
  Tensor hidden_;
  int layer_ = 0;
  std::uint64_t flops_ = 0;
  std::vector<double> logits_;
  std::vector<double> probs_;
};

// Probabilities of classifier `layer` (1-based) for one sample; evaluates
// layers 1..layer only.
std::vector<double> predict_at(const MultiExitModel& model, std::span<const double> x, int layer);

int argmax(std::span<const double> v);

}  // namespace exitnet

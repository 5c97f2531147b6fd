#pragma once

#include <span>
#include <string>
#include <vector>

#include "exitnet/autodiff.hpp"
#include "exitnet/model.hpp"

namespace exitnet {

enum class SignalKind { entropy, softmax_score, energy_normalized };

// difficulty_positive: the signal grows with sample difficulty, exit when it
// falls below the threshold. difficulty_negative: exit when it rises above.
enum class Direction { difficulty_positive, difficulty_negative };

Direction direction_of(SignalKind kind);
std::string to_string(SignalKind kind);
SignalKind parse_signal_kind(const std::string& s);

double entropy_signal(std::span<const double> p);
double softmax_signal(std::span<const double> p);
double energy_signal(std::span<const double> logits);
double normalized_energy(std::span<const double> logits);

// Per-sample, per-layer signal values, row-major N×M with 1-based layer access.
class SignalMatrix {
 public:
  SignalMatrix(std::size_t samples, int layers, SignalKind kind);

  std::size_t num_samples() const { return samples_; }
  int num_layers() const { return layers_; }
  SignalKind kind() const { return kind_; }
  Direction direction() const { return direction_of(kind_); }

  double& at(std::size_t n, int layer) { return values_[n * static_cast<std::size_t>(layers_) + layer - 1]; }
  double at(std::size_t n, int layer) const { return values_[n * static_cast<std::size_t>(layers_) + layer - 1]; }
  std::span<const double> row(std::size_t n) const {
    return std::span<const double>(values_).subspan(n * static_cast<std::size_t>(layers_), static_cast<std::size_t>(layers_));
  }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t samples_;
  int layers_;
  SignalKind kind_;
  std::vector<double> values_;
};

SignalMatrix signals_for_batch(const LayerOutputs& outputs, SignalKind kind);
// Signal value computed from a logit row (probabilities derived internally).
double signal_from_logits(std::span<const double> logits, SignalKind kind);

// Differentiable signal over an N×C logits node; returns an N vector.
Var signal_var(Var logits, SignalKind kind);

}  // namespace exitnet

#include "exitnet/signals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace exitnet {

Direction direction_of(SignalKind kind) {
  return kind == SignalKind::softmax_score ? Direction::difficulty_negative : Direction::difficulty_positive;
}

std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::entropy: return "entropy";
    case SignalKind::softmax_score: return "softmax_score";
    case SignalKind::energy_normalized: return "energy_normalized";
  }
  return "?";
}

SignalKind parse_signal_kind(const std::string& s) {
  if (s == "entropy") return SignalKind::entropy;
  if (s == "softmax_score" || s == "softmax") return SignalKind::softmax_score;
  if (s == "energy_normalized" || s == "energy") return SignalKind::energy_normalized;
  throw std::invalid_argument("unknown signal kind '" + s + "' (expected entropy, softmax_score or energy_normalized)");
}

namespace {

void require_distribution(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("probability vector is empty");
  double total = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("probability vector has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("probability vector does not sum to 1");
}

}  // namespace

double entropy_signal(std::span<const double> p) {
  require_distribution(p);
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double softmax_signal(std::span<const double> p) {
  require_distribution(p);
  return *std::max_element(p.begin(), p.end());
}

double energy_signal(std::span<const double> logits) { return -logsumexp(logits); }

double normalized_energy(std::span<const double> logits) {
  // (1 + exp(-E))^-1 with exp(-E) = sum(exp(f)); evaluated in sigmoid form.
  const double e = energy_signal(logits);
  return kernels::sigmoid(Tensor::scalar(e))[0];
}

SignalMatrix::SignalMatrix(std::size_t samples, int layers, SignalKind kind)
    : samples_(samples), layers_(layers), kind_(kind), values_(samples * static_cast<std::size_t>(layers), 0.0) {}

double signal_from_logits(std::span<const double> logits, SignalKind kind) {
  if (kind == SignalKind::energy_normalized) return normalized_energy(logits);
  Tensor row(Shape{1, logits.size()}, std::vector<double>(logits.begin(), logits.end()));
  const Tensor p = kernels::softmax_rows(row);
  return kind == SignalKind::entropy ? entropy_signal(p.data()) : softmax_signal(p.data());
}

SignalMatrix signals_for_batch(const LayerOutputs& outputs, SignalKind kind) {
  const std::size_t n = outputs.num_samples();
  const int layers = outputs.num_layers();
  SignalMatrix s(n, layers, kind);
  for (int m = 1; m <= layers; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      switch (kind) {
        case SignalKind::entropy: s.at(i, m) = entropy_signal(outputs.prob(i, m)); break;
        case SignalKind::softmax_score: s.at(i, m) = softmax_signal(outputs.prob(i, m)); break;
        case SignalKind::energy_normalized: s.at(i, m) = normalized_energy(outputs.logit(i, m)); break;
      }
    }
  }
  return s;
}

Var signal_var(Var logits, SignalKind kind) {
  switch (kind) {
    case SignalKind::energy_normalized:
      // E = -lse(f); E_norm = sigmoid(E)
      return sigmoid(scale(logsumexp_rows(logits), -1.0));
    case SignalKind::entropy: {
      // H = lse(f) - sum_i p_i f_i
      Var p = softmax_rows(logits);
      return logsumexp_rows(logits) - sum_rows(p * logits);
    }
    case SignalKind::softmax_score: {
      Var p = softmax_rows(logits);
      const Tensor& pv = p.value();
      std::vector<std::size_t> idx(pv.rows());
      for (std::size_t r = 0; r < pv.rows(); ++r) idx[r] = static_cast<std::size_t>(argmax(pv.row(r)));
      return gather_cols(p, idx);
    }
  }
  throw std::invalid_argument("signal_var: unknown kind");
}

}  // namespace exitnet

#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "exitnet/dataset.hpp"
#include "exitnet/model.hpp"
#include "exitnet/signals.hpp"
#include "exitnet/tensor.hpp"
#include "exitnet/training.hpp"

namespace exitnet::testing {

inline Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Tensor t(Shape{rows, cols});
  for (double& v : t.data()) v = nd(rng);
  return t;
}

inline Dataset random_dataset(std::size_t n, int dim, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.features = random_matrix(n, static_cast<std::size_t>(dim), rng);
  std::uniform_int_distribution<int> lab(0, classes - 1);
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(lab(rng));
  d.num_classes = classes;
  return d;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Discrete state a loss depends on piecewise: exit layers per threshold and
// the correct/incorrect partition per layer. A finite-difference probe is only
// meaningful when this stays fixed across the stencil.
struct PiecewiseState {
  std::vector<std::vector<int>> exits;
  std::vector<std::vector<bool>> correct;
  friend bool operator==(const PiecewiseState&, const PiecewiseState&) = default;
};

struct TotalLossSetup {
  std::vector<double> thresholds;
  double beta = 1.0;
  double alpha = 0.1;
  double epsilon = 0.3;
  SignalKind kind = SignalKind::energy_normalized;
};

// total_loss on one batch; leaves gradients in model parameters when
// with_grad is set.
inline double eval_total_loss(MultiExitModel& model, const Dataset& d, const TotalLossSetup& s, bool with_grad,
                              PiecewiseState* state = nullptr) {
  const int layers = model.num_layers();
  Graph g;
  const auto params = bind_parameters(g, model);
  const GraphOutputs out = forward_graph(params, g.constant(d.features), model.config());
  const auto ce = per_layer_ce(out.logits, d.labels);
  std::vector<Var> sig;
  SignalMatrix detached(d.size(), layers, s.kind);
  std::vector<std::vector<bool>> correct(static_cast<std::size_t>(layers), std::vector<bool>(d.size()));
  for (int m = 1; m <= layers; ++m) {
    sig.push_back(signal_var(out.logits[static_cast<std::size_t>(m - 1)], s.kind));
    const Tensor& logits = out.logits[static_cast<std::size_t>(m - 1)].value();
    for (std::size_t n = 0; n < d.size(); ++n) {
      detached.at(n, m) = sig.back().value()[n];
      correct[static_cast<std::size_t>(m - 1)][n] = argmax(logits.row(n)) == d.labels[n];
    }
  }
  Var lce = classification_loss(ce, detached, s.thresholds, s.beta);
  Var losc = osc_loss(sig, correct, s.epsilon, direction_of(s.kind));
  Var total = total_loss(lce, losc, s.alpha);
  if (state) {
    state->exits.clear();
    for (double tau : s.thresholds) state->exits.push_back(simulate_batch(detached, tau).exit_layer);
    state->correct = correct;
  }
  if (with_grad) {
    model.zero_grad();
    g.backward(total);
  }
  return total.value().item();
}

// Smallest distance between any detached signal and any threshold.
inline double threshold_clearance(const MultiExitModel& model, const Dataset& d, const TotalLossSetup& s) {
  const auto outs = forward_all(model, d.features);
  const auto sig = signals_for_batch(outs, s.kind);
  double best = INFINITY;
  for (double v : sig.values()) {
    for (double t : s.thresholds) best = std::min(best, std::abs(v - t));
  }
  return best;
}

struct GradCheck {
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double worst = 0.0;
};

// Central differences over every parameter entry; entries whose stencil moves
// the piecewise state are skipped.
inline GradCheck check_total_loss_gradient(MultiExitModel& model, const Dataset& d, const TotalLossSetup& s,
                                           double h = 1e-5) {
  PiecewiseState base;
  eval_total_loss(model, d, s, true, &base);
  std::vector<Tensor> analytic;
  for (const auto& p : model.parameters()) analytic.push_back(p.grad);
  GradCheck out;
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].value.size(); ++j) {
      const double orig = params[i].value[j];
      PiecewiseState sp, sm;
      params[i].value[j] = orig + h;
      const double lp = eval_total_loss(model, d, s, false, &sp);
      params[i].value[j] = orig - h;
      const double lm = eval_total_loss(model, d, s, false, &sm);
      params[i].value[j] = orig;
      if (!(sp == base) || !(sm == base)) {
        ++out.skipped;
        continue;
      }
      const double numeric = (lp - lm) / (2 * h);
      out.worst = std::max(out.worst, rel_err(analytic[i][j], numeric));
      ++out.checked;
    }
  }
  return out;
}

}  // namespace exitnet::testing

#include "exitnet/exit_policy.hpp"

#include <stdexcept>
#include <string>

namespace exitnet {

namespace {

bool passes(double signal, double tau, Direction direction) {
  return direction == Direction::difficulty_positive ? signal < tau : signal > tau;
}

}  // namespace

int exit_layer(std::span<const double> signal_row, double tau, Direction direction) {
  const int layers = static_cast<int>(signal_row.size());
  if (layers < 2) throw std::invalid_argument("exit_layer: need at least two layers");
  for (int m = 1; m < layers; ++m)
    if (passes(signal_row[static_cast<std::size_t>(m - 1)], tau, direction)) return m;
  return layers;
}

ExitAssignment simulate_batch(const SignalMatrix& signals, double tau) {
  ExitAssignment out;
  out.exit_layer.resize(signals.num_samples());
  out.counts.assign(static_cast<std::size_t>(signals.num_layers()), 0);
  const Direction dir = signals.direction();
  for (std::size_t n = 0; n < signals.num_samples(); ++n) {
    const int m = exit_layer(signals.row(n), tau, dir);
    out.exit_layer[n] = m;
    ++out.counts[static_cast<std::size_t>(m - 1)];
  }
  return out;
}

double speedup_ratio(std::span<const std::size_t> counts) {
  const double layers = static_cast<double>(counts.size());
  double executed = 0.0, full = 0.0;
  for (std::size_t m = 0; m < counts.size(); ++m) {
    full += layers * static_cast<double>(counts[m]);
    executed += static_cast<double>(m + 1) * static_cast<double>(counts[m]);
  }
  if (executed == 0.0) throw std::invalid_argument("empty evaluation set");
  return full / executed;
}

double speedup_ratio(const ExitAssignment& assignment) { return speedup_ratio(assignment.counts); }

EarlyExitResult infer_early_exit(const MultiExitModel& model, std::span<const double> x, SignalKind kind, double tau) {
  const int layers = model.num_layers();
  const Direction dir = direction_of(kind);
  IncrementalForward fwd(model, x);
  EarlyExitResult result;
  while (true) {
    const auto& probs = fwd.advance();
    const int m = fwd.layers_evaluated();
    if (m == layers || passes(signal_from_logits(fwd.logits(), kind), tau, dir)) {
      result.exit_layer = m;
      result.label = argmax(probs);
      result.probs = probs;
      break;
    }
  }
  result.flops = fwd.flops();
  return result;
}

}  // namespace exitnet

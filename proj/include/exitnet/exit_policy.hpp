#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "exitnet/model.hpp"
#include "exitnet/signals.hpp"

namespace exitnet {

// Exit layers (1-based) per sample and the per-layer tallies N^m.
struct ExitAssignment {
  std::vector<int> exit_layer;
  std::vector<std::size_t> counts;  // counts[m-1] = samples exiting at layer m

  int num_layers() const { return static_cast<int>(counts.size()); }
  std::size_t num_samples() const { return exit_layer.size(); }
};

// First layer in [1, M-1] whose signal strictly passes tau; M otherwise.
int exit_layer(std::span<const double> signal_row, double tau, Direction direction);

ExitAssignment simulate_batch(const SignalMatrix& signals, double tau);

// sum(M * N^m) / sum(m * N^m) == M / mean exit layer.
double speedup_ratio(const ExitAssignment& assignment);
double speedup_ratio(std::span<const std::size_t> counts);

struct EarlyExitResult {
  int label = 0;
  int exit_layer = 0;
  std::uint64_t flops = 0;
  std::vector<double> probs;
};

// Batch-size-1 inference: evaluates layers one at a time and stops at the
// first layer meeting the exit condition.
EarlyExitResult infer_early_exit(const MultiExitModel& model, std::span<const double> x, SignalKind kind, double tau);

}  // namespace exitnet

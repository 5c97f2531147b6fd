#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "exitnet/autodiff.hpp"
#include "exitnet/dataset.hpp"
#include "exitnet/exit_policy.hpp"
#include "exitnet/model.hpp"
#include "exitnet/optim.hpp"
#include "exitnet/signals.hpp"

namespace exitnet {

using Rng = std::mt19937_64;

enum class Objective { cosee, conventional_uniform };

std::string to_string(Objective o);
Objective parse_objective(const std::string& s);

struct TrainConfig {
  double alpha = 0.1;    // weight of the calibration term
  double beta0 = 1.0;    // final decay factor of the sample weights
  double epsilon = 0.3;  // calibration margin
  int num_thresholds = 5;
  int epochs = 10;
  int batch_size = 32;
  double lr = 3e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  SignalKind signal = SignalKind::energy_normalized;
  Objective objective = Objective::cosee;

  void validate() const;
};

struct ThresholdRange {
  double lo = 0.0;
  double hi = 1.0;
  int epoch = 0;
};

// Initial sampling range for a signal kind: (0, 1), widened to [0, ln C] for
// entropy when ln C exceeds 1.
ThresholdRange initial_range(SignalKind kind, int num_classes);

// Running extrema of observed signals within an epoch; roll_epoch() turns
// them into the next epoch's sampling range.
class ThresholdRangeTracker {
 public:
  explicit ThresholdRangeTracker(ThresholdRange initial = {});

  const ThresholdRange& current() const { return current_; }
  void observe(std::span<const double> values);
  void observe(const SignalMatrix& signals) { observe(signals.values()); }
  void roll_epoch();

  bool observed_any() const { return observed_; }
  double running_min() const { return min_; }
  double running_max() const { return max_; }
  // Restores a saved tracker exactly.
  void restore(ThresholdRange current, bool observed, double running_min, double running_max);

 private:
  ThresholdRange current_;
  bool observed_ = false;
  double min_;
  double max_;
};

// beta_t = (t / total) * beta0
double decay_factor(std::uint64_t step, std::uint64_t total, double beta0);

// w_m = exp(-beta |m - m*|) / sum_k exp(-beta |k - m*|), m in [1, M].
std::vector<double> swm_weights(int m_star, int num_layers, double beta);

// Row-major N×M weights, one row per sample.
struct WeightMatrix {
  std::size_t samples = 0;
  int layers = 0;
  std::vector<double> w;

  double at(std::size_t n, int layer) const { return w[n * static_cast<std::size_t>(layers) + layer - 1]; }
  std::span<const double> row(std::size_t n) const {
    return std::span<const double>(w).subspan(n * static_cast<std::size_t>(layers), static_cast<std::size_t>(layers));
  }
};

WeightMatrix swm_weight_matrix(const ExitAssignment& exits, double beta);
// Every row equal to layer_weights.
WeightMatrix broadcast_weights(std::size_t samples, std::span<const double> layer_weights);

std::vector<double> sample_thresholds(const ThresholdRange& range, int k, Rng& rng);

// Per-layer cross-entropy vectors (N each), one per classifier.
std::vector<Var> per_layer_ce(std::span<const Var> logits, std::span<const int> labels);

// (1/N) sum_n sum_m w[n,m] ce_m[n]; weights are graph constants.
Var weighted_ce(std::span<const Var> ce, const WeightMatrix& weights);

// Classification loss at one threshold: exits simulated on the detached
// signals, then weighted by swm_weights around each exit layer.
Var classification_loss_at_threshold(std::span<const Var> ce, const SignalMatrix& signals, double tau, double beta);

// Mean of the per-threshold losses. Computed as a single weighted sum with the
// mean weight matrix, which is the same quantity by linearity.
Var classification_loss(std::span<const Var> ce, const SignalMatrix& signals, std::span<const double> thresholds,
                        double beta);

// Hinge on the gap between mean signals of correctly (easy) and incorrectly
// (hard) predicted samples at one layer. Constant zero when either group is
// empty.
Var osc_layer_loss(Var signal, const std::vector<bool>& correct, double epsilon, Direction direction);

// Mean of osc_layer_loss over layers 1..M-1; correct[m-1][n] says whether
// classifier m predicts sample n correctly.
Var osc_loss(std::span<const Var> signals, const std::vector<std::vector<bool>>& correct, double epsilon,
             Direction direction);

Var total_loss(Var ce, Var osc, double alpha);

// sum_m w_m * mean_n ce_m[n]; uniform 1/M weights when layer_weights is empty.
Var baseline_loss(std::span<const Var> ce, std::span<const double> layer_weights = {});

struct StepRecord {
  std::uint64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  double beta_t = 0.0;
  double loss_total = 0.0;
  double loss_ce = 0.0;
  std::optional<double> loss_osc;
  double range_lo = 0.0;
  double range_hi = 0.0;

  std::string to_json() const;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<double> epoch_mean_loss;
};

// Everything needed to continue a run exactly where it stopped.
struct TrainerState {
  AdamWState optimizer;
  std::uint64_t global_step = 0;
  int epoch = 0;
  Rng data_rng;
  Rng threshold_rng;
  ThresholdRangeTracker tracker;
};

class Trainer {
 public:
  Trainer(MultiExitModel& model, const Dataset& data, const TrainConfig& config);

  std::uint64_t steps_per_epoch() const { return steps_per_epoch_; }
  std::uint64_t total_steps() const { return total_steps_; }
  bool finished() const { return state_.epoch >= config_.epochs; }

  // Runs one epoch; on_step is invoked after every optimizer update.
  void run_epoch(const std::function<void(const StepRecord&)>& on_step = {});
  TrainLog run(const std::function<void(const StepRecord&)>& on_step = {});

  const TrainerState& state() const { return state_; }
  void restore(TrainerState state);
  const TrainLog& log() const { return log_; }

 private:
  StepRecord step(std::span<const std::size_t> batch);

  MultiExitModel& model_;
  const Dataset& data_;
  TrainConfig config_;
  AdamWHyper hyper_;
  std::uint64_t steps_per_epoch_;
  std::uint64_t total_steps_;
  TrainerState state_;
  TrainLog log_;
};

struct TrainResult {
  MultiExitModel model;
  TrainLog log;
};

TrainResult train(MultiExitModel model, const Dataset& data, const TrainConfig& config);

}  // namespace exitnet

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "exitnet/dataset.hpp"
#include "exitnet/exit_policy.hpp"
#include "exitnet/model.hpp"
#include "exitnet/signals.hpp"

namespace exitnet {

double accuracy(std::span<const int> preds, std::span<const int> labels);
// Binary F1 with class 1 as the positive class; 0 when precision + recall is 0.
double f1_score(std::span<const int> preds, std::span<const int> labels);

// Exit/continue decisions at reached internal classifiers (layers 1..M-1, up
// to and including the exit layer).
struct FailureRates {
  double premature = 0.0;  // exits taken on incorrect predictions / incorrect points
  double delayed = 0.0;    // continues taken on correct predictions / correct points
  std::size_t incorrect_points = 0;
  std::size_t correct_points = 0;
  std::size_t premature_exits = 0;
  std::size_t delayed_continues = 0;
  bool premature_undefined = false;  // no incorrect decision points
  bool delayed_undefined = false;    // no correct decision points
};

FailureRates failure_rates(const LayerOutputs& outputs, std::span<const int> labels, const SignalMatrix& signals,
                           double tau);

struct EvalReport {
  double threshold = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double speedup = 1.0;
  double premature_rate = 0.0;
  double delayed_rate = 0.0;
  std::vector<std::size_t> histogram;  // exits per layer

  // Mean of F1 and accuracy.
  double mean() const { return 0.5 * (accuracy + f1); }
};

using TradeoffCurve = std::vector<EvalReport>;

// Predictions taken from each sample's exiting classifier.
std::vector<int> exit_predictions(const LayerOutputs& outputs, const ExitAssignment& exits);

EvalReport evaluate_at(const LayerOutputs& outputs, std::span<const int> labels, const SignalMatrix& signals, double tau);

TradeoffCurve sweep_tradeoff(const MultiExitModel& model, const Dataset& data, SignalKind kind,
                             std::span<const double> thresholds);
TradeoffCurve sweep_tradeoff(const LayerOutputs& outputs, std::span<const int> labels, SignalKind kind,
                             std::span<const double> thresholds);

// Threshold whose speed-up is the smallest attainable value >= target, or the
// largest attainable speed-up when target is out of reach.
double threshold_for_speedup(const SignalMatrix& signals, double target);

struct ExitHistograms {
  std::vector<std::size_t> counts_a;
  std::vector<std::size_t> counts_b;
  std::vector<double> dist_a;
  std::vector<double> dist_b;
  double tv_distance = 0.0;
};

double total_variation(std::span<const double> p, std::span<const double> q);
ExitHistograms exit_histograms(const MultiExitModel& model, const Dataset& a, const Dataset& b, SignalKind kind,
                               double tau);

// CSV exports with fixed headers.
std::string curve_csv(const TradeoffCurve& curve);
std::string histogram_csv(const ExitHistograms& h);

}  // namespace exitnet

#include "exitnet/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace exitnet {

namespace {

void require_same_length(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw std::invalid_argument("metrics: predictions and labels differ in length");
  if (preds.empty()) throw std::invalid_argument("metrics: empty input");
}

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  require_same_length(preds, labels);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double f1_score(std::span<const int> preds, std::span<const int> labels) {
  require_same_length(preds, labels);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == 1, y = labels[i] == 1;
    if (p && y) ++tp;
    if (p && !y) ++fp;
    if (!p && y) ++fn;
  }
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

FailureRates failure_rates(const LayerOutputs& outputs, std::span<const int> labels, const SignalMatrix& signals,
                           double tau) {
  if (labels.size() != outputs.num_samples() || signals.num_samples() != outputs.num_samples()) {
    throw std::invalid_argument("failure_rates: inputs disagree on sample count");
  }
  const ExitAssignment exits = simulate_batch(signals, tau);
  const int layers = signals.num_layers();
  FailureRates r;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const int last = std::min(exits.exit_layer[n], layers - 1);
    for (int m = 1; m <= last; ++m) {
      const bool correct = outputs.predicted(n, m) == labels[n];
      const bool exits_here = m == exits.exit_layer[n];
      if (correct) {
        ++r.correct_points;
        if (!exits_here) ++r.delayed_continues;
      } else {
        ++r.incorrect_points;
        if (exits_here) ++r.premature_exits;
      }
    }
  }
  r.premature_undefined = r.incorrect_points == 0;
  r.delayed_undefined = r.correct_points == 0;
  r.premature = r.premature_undefined ? 0.0 : static_cast<double>(r.premature_exits) / static_cast<double>(r.incorrect_points);
  r.delayed = r.delayed_undefined ? 0.0 : static_cast<double>(r.delayed_continues) / static_cast<double>(r.correct_points);
  return r;
}

std::vector<int> exit_predictions(const LayerOutputs& outputs, const ExitAssignment& exits) {
  std::vector<int> preds(exits.num_samples());
  for (std::size_t n = 0; n < preds.size(); ++n) preds[n] = outputs.predicted(n, exits.exit_layer[n]);
  return preds;
}

EvalReport evaluate_at(const LayerOutputs& outputs, std::span<const int> labels, const SignalMatrix& signals, double tau) {
  const ExitAssignment exits = simulate_batch(signals, tau);
  const auto preds = exit_predictions(outputs, exits);
  const FailureRates fr = failure_rates(outputs, labels, signals, tau);
  EvalReport r;
  r.threshold = tau;
  r.accuracy = accuracy(preds, labels);
  r.f1 = f1_score(preds, labels);
  r.speedup = speedup_ratio(exits);
  r.premature_rate = fr.premature;
  r.delayed_rate = fr.delayed;
  r.histogram = exits.counts;
  return r;
}

TradeoffCurve sweep_tradeoff(const LayerOutputs& outputs, std::span<const int> labels, SignalKind kind,
                             std::span<const double> thresholds) {
  if (thresholds.empty()) throw std::invalid_argument("sweep: empty threshold grid");
  if (labels.empty()) throw std::invalid_argument("sweep: empty dataset");
  const SignalMatrix signals = signals_for_batch(outputs, kind);
  TradeoffCurve curve;
  curve.reserve(thresholds.size());
  for (double tau : thresholds) curve.push_back(evaluate_at(outputs, labels, signals, tau));
  return curve;
}

TradeoffCurve sweep_tradeoff(const MultiExitModel& model, const Dataset& data, SignalKind kind,
                             std::span<const double> thresholds) {
  if (data.size() == 0) throw std::invalid_argument("sweep: empty dataset");
  return sweep_tradeoff(forward_all(model, data.features), data.labels, kind, thresholds);
}

double threshold_for_speedup(const SignalMatrix& signals, double target) {
  const int layers = signals.num_layers();
  std::vector<double> values;
  values.reserve(signals.num_samples() * static_cast<std::size_t>(layers - 1));
  for (std::size_t n = 0; n < signals.num_samples(); ++n)
    for (int m = 1; m < layers; ++m) values.push_back(signals.at(n, m));
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (values.empty()) throw std::invalid_argument("threshold_for_speedup: no signals");

  // Candidates ordered so that speed-up is non-decreasing along the list.
  // difficulty_positive exits on signal < tau: thresholds between sorted values.
  std::vector<double> cand;
  cand.reserve(values.size() + 1);
  const bool positive = signals.direction() == Direction::difficulty_positive;
  if (positive) {
    cand.push_back(values.front());
    for (std::size_t i = 1; i < values.size(); ++i) cand.push_back(values[i - 1] + (values[i] - values[i - 1]) / 2.0);
    cand.push_back(values.back() + std::max(1.0, std::abs(values.back())));
  } else {
    cand.push_back(values.back());
    for (std::size_t i = values.size() - 1; i > 0; --i) cand.push_back(values[i - 1] + (values[i] - values[i - 1]) / 2.0);
    cand.push_back(values.front() - std::max(1.0, std::abs(values.front())));
  }
  const auto speed = [&](double tau) { return speedup_ratio(simulate_batch(signals, tau)); };
  std::size_t lo = 0, hi = cand.size() - 1;
  if (speed(cand[hi]) < target) return cand[hi];
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (speed(cand[mid]) >= target) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return cand[lo];
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("total_variation: distributions differ in length");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

namespace {

std::vector<double> normalise(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  std::vector<double> out(counts.size(), 0.0);
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  return out;
}

std::vector<std::size_t> histogram_for(const MultiExitModel& model, const Dataset& d, SignalKind kind, double tau) {
  if (d.size() == 0) throw std::invalid_argument("exit_histograms: empty dataset");
  return simulate_batch(signals_for_batch(forward_all(model, d.features), kind), tau).counts;
}

}  // namespace

ExitHistograms exit_histograms(const MultiExitModel& model, const Dataset& a, const Dataset& b, SignalKind kind,
                               double tau) {
  ExitHistograms h;
  h.counts_a = histogram_for(model, a, kind, tau);
  h.counts_b = histogram_for(model, b, kind, tau);
  h.dist_a = normalise(h.counts_a);
  h.dist_b = normalise(h.counts_b);
  h.tv_distance = total_variation(h.dist_a, h.dist_b);
  return h;
}

std::string curve_csv(const TradeoffCurve& curve) {
  std::ostringstream os;
  os << "threshold,speedup,accuracy,f1,premature_rate,delayed_rate\n";
  for (const auto& r : curve) {
    os << fmt(r.threshold) << ',' << fmt(r.speedup) << ',' << fmt(r.accuracy) << ',' << fmt(r.f1) << ','
       << fmt(r.premature_rate) << ',' << fmt(r.delayed_rate) << '\n';
  }
  return os.str();
}

std::string histogram_csv(const ExitHistograms& h) {
  std::ostringstream os;
  os << "layer,count_a,count_b\n";
  for (std::size_t m = 0; m < h.counts_a.size(); ++m) os << m + 1 << ',' << h.counts_a[m] << ',' << h.counts_b[m] << '\n';
  return os.str();
}

}  // namespace exitnet

#include "exitnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace exitnet {

std::string to_string(Objective o) { return o == Objective::cosee ? "cosee" : "conventional_uniform"; }

Objective parse_objective(const std::string& s) {
  if (s == "cosee") return Objective::cosee;
  if (s == "conventional_uniform" || s == "conventional") return Objective::conventional_uniform;
  throw std::invalid_argument("unknown objective '" + s + "' (expected cosee or conventional_uniform)");
}

void TrainConfig::validate() const {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  if (!(beta0 >= 0.0)) throw std::invalid_argument("beta0 must be non-negative");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
  if (num_thresholds < 1) throw std::invalid_argument("K must be at least 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be non-negative");
}

ThresholdRange initial_range(SignalKind kind, int num_classes) {
  if (kind == SignalKind::entropy) {
    const double max_entropy = std::log(static_cast<double>(num_classes));
    if (max_entropy > 1.0) return {0.0, max_entropy, 0};
  }
  return {0.0, 1.0, 0};
}

ThresholdRangeTracker::ThresholdRangeTracker(ThresholdRange initial)
    : current_(initial),
      min_(std::numeric_limits<double>::infinity()),
      max_(-std::numeric_limits<double>::infinity()) {
  if (initial.lo > initial.hi) throw std::invalid_argument("threshold range has lo > hi");
}

void ThresholdRangeTracker::observe(std::span<const double> values) {
  for (double v : values) {
    min_ = std::min(min_, v);
    max_ = std::max(max_, v);
  }
  observed_ = observed_ || !values.empty();
}

void ThresholdRangeTracker::roll_epoch() {
  if (observed_) {
    current_.lo = min_;
    current_.hi = max_;
  }
  current_.epoch += 1;
  observed_ = false;
  min_ = std::numeric_limits<double>::infinity();
  max_ = -std::numeric_limits<double>::infinity();
}

void ThresholdRangeTracker::restore(ThresholdRange current, bool observed, double running_min, double running_max) {
  current_ = current;
  observed_ = observed;
  min_ = running_min;
  max_ = running_max;
}

double decay_factor(std::uint64_t step, std::uint64_t total, double beta0) {
  if (total == 0) throw std::invalid_argument("decay_factor: total steps must be positive");
  if (step > total) {
    throw std::invalid_argument("decay_factor: step " + std::to_string(step) + " exceeds total " + std::to_string(total));
  }
  const double gamma = static_cast<double>(step) / static_cast<double>(total);
  return gamma * beta0;
}

std::vector<double> swm_weights(int m_star, int num_layers, double beta) {
  if (m_star < 1 || m_star > num_layers) {
    throw std::out_of_range("swm_weights: exit layer " + std::to_string(m_star) + " outside [1, " +
                            std::to_string(num_layers) + "]");
  }
  if (!(beta >= 0.0)) throw std::invalid_argument("swm_weights: decay factor must be non-negative");
  std::vector<double> w(static_cast<std::size_t>(num_layers));
  double total = 0.0;
  for (int m = 1; m <= num_layers; ++m) {
    w[static_cast<std::size_t>(m - 1)] = std::exp(-beta * std::abs(m - m_star));
    total += w[static_cast<std::size_t>(m - 1)];
  }
  for (double& v : w) v /= total;
  return w;
}

WeightMatrix swm_weight_matrix(const ExitAssignment& exits, double beta) {
  const int layers = exits.num_layers();
  WeightMatrix out{exits.num_samples(), layers, {}};
  out.w.reserve(exits.num_samples() * static_cast<std::size_t>(layers));
  // Rows depend only on the exit layer; compute each distinct row once.
  std::vector<std::vector<double>> cache(static_cast<std::size_t>(layers));
  for (int m_star : exits.exit_layer) {
    auto& row = cache[static_cast<std::size_t>(m_star - 1)];
    if (row.empty()) row = swm_weights(m_star, layers, beta);
    out.w.insert(out.w.end(), row.begin(), row.end());
  }
  return out;
}

WeightMatrix broadcast_weights(std::size_t samples, std::span<const double> layer_weights) {
  WeightMatrix out{samples, static_cast<int>(layer_weights.size()), {}};
  out.w.reserve(samples * layer_weights.size());
  for (std::size_t n = 0; n < samples; ++n) out.w.insert(out.w.end(), layer_weights.begin(), layer_weights.end());
  return out;
}

std::vector<double> sample_thresholds(const ThresholdRange& range, int k, Rng& rng) {
  if (range.lo > range.hi) throw std::invalid_argument("sample_thresholds: lo > hi");
  if (k < 1) throw std::invalid_argument("sample_thresholds: K must be at least 1");
  std::vector<double> out(static_cast<std::size_t>(k), range.lo);
  if (range.lo == range.hi) return out;
  std::uniform_real_distribution<double> dist(range.lo, range.hi);
  for (double& t : out) t = dist(rng);
  return out;
}

std::vector<Var> per_layer_ce(std::span<const Var> logits, std::span<const int> labels) {
  std::vector<Var> out;
  out.reserve(logits.size());
  for (Var l : logits) out.push_back(cross_entropy_rows(l, labels));
  return out;
}

Var weighted_ce(std::span<const Var> ce, const WeightMatrix& weights) {
  if (ce.empty()) throw std::invalid_argument("weighted_ce: no classifiers");
  if (static_cast<int>(ce.size()) != weights.layers) throw std::invalid_argument("weighted_ce: layer count mismatch");
  Graph& g = ce.front().graph();
  const std::size_t n = weights.samples;
  if (n == 0) throw std::invalid_argument("weighted_ce: empty batch");
  Var total;
  for (int m = 1; m <= weights.layers; ++m) {
    if (ce[static_cast<std::size_t>(m - 1)].value().size() != n) throw std::invalid_argument("weighted_ce: batch size mismatch");
    Tensor column(Shape{n});
    for (std::size_t i = 0; i < n; ++i) column[i] = weights.at(i, m);
    Var term = sum(ce[static_cast<std::size_t>(m - 1)] * g.constant(std::move(column)));
    total = m == 1 ? term : total + term;
  }
  return scale(total, 1.0 / static_cast<double>(n));
}

Var classification_loss_at_threshold(std::span<const Var> ce, const SignalMatrix& signals, double tau, double beta) {
  return weighted_ce(ce, swm_weight_matrix(simulate_batch(signals, tau), beta));
}

Var classification_loss(std::span<const Var> ce, const SignalMatrix& signals, std::span<const double> thresholds,
                        double beta) {
  if (thresholds.empty()) throw std::invalid_argument("classification_loss: need at least one threshold");
  WeightMatrix first = swm_weight_matrix(simulate_batch(signals, thresholds[0]), beta);
  if (thresholds.size() == 1) return weighted_ce(ce, first);
  // Shifted mean: exact when every threshold yields the same weights.
  std::vector<double> acc(first.w.size(), 0.0);
  for (std::size_t k = 1; k < thresholds.size(); ++k) {
    const WeightMatrix wk = swm_weight_matrix(simulate_batch(signals, thresholds[k]), beta);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += wk.w[i] - first.w[i];
  }
  const double kk = static_cast<double>(thresholds.size());
  for (std::size_t i = 0; i < acc.size(); ++i) first.w[i] += acc[i] / kk;
  return weighted_ce(ce, first);
}

Var osc_layer_loss(Var signal, const std::vector<bool>& correct, double epsilon, Direction direction) {
  const std::size_t n = signal.value().size();
  if (correct.size() != n) throw std::invalid_argument("osc_layer_loss: mask length must equal batch size");
  Graph& g = signal.graph();
  const auto n_easy = static_cast<std::size_t>(std::count(correct.begin(), correct.end(), true));
  const std::size_t n_hard = n - n_easy;
  if (n_easy == 0 || n_hard == 0) return g.constant(Tensor::scalar(0.0));
  Tensor easy_w(Shape{n}), hard_w(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    if (correct[i]) {
      easy_w[i] = 1.0 / static_cast<double>(n_easy);
    } else {
      hard_w[i] = 1.0 / static_cast<double>(n_hard);
    }
  }
  Var mean_easy = sum(signal * g.constant(std::move(easy_w)));
  Var mean_hard = sum(signal * g.constant(std::move(hard_w)));
  Var eps = g.constant(Tensor::scalar(epsilon));
  Var gap = direction == Direction::difficulty_positive ? mean_easy - mean_hard : mean_hard - mean_easy;
  return relu(gap + eps);
}

Var osc_loss(std::span<const Var> signals, const std::vector<std::vector<bool>>& correct, double epsilon,
             Direction direction) {
  const std::size_t layers = signals.size();
  if (layers < 2) throw std::invalid_argument("osc_loss: need at least two layers");
  if (correct.size() < layers - 1) throw std::invalid_argument("osc_loss: missing correctness masks");
  Var total;
  for (std::size_t m = 0; m + 1 < layers; ++m) {
    Var term = osc_layer_loss(signals[m], correct[m], epsilon, direction);
    total = m == 0 ? term : total + term;
  }
  return scale(total, 1.0 / static_cast<double>(layers - 1));
}

Var total_loss(Var ce, Var osc, double alpha) {
  if (alpha == 0.0) return ce;
  return ce + scale(osc, alpha);
}

Var baseline_loss(std::span<const Var> ce, std::span<const double> layer_weights) {
  if (ce.empty()) throw std::invalid_argument("baseline_loss: no classifiers");
  std::vector<double> uniform;
  if (layer_weights.empty()) {
    uniform.assign(ce.size(), 1.0 / static_cast<double>(ce.size()));
    layer_weights = uniform;
  }
  if (layer_weights.size() != ce.size()) throw std::invalid_argument("baseline_loss: one weight per classifier required");
  for (double w : layer_weights)
    if (!(w >= 0.0)) throw std::invalid_argument("baseline_loss: weights must be non-negative");
  return weighted_ce(ce, broadcast_weights(ce.front().value().size(), layer_weights));
}

std::string StepRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["lr"] = lr;
  j["beta_t"] = beta_t;
  j["loss_total"] = loss_total;
  j["loss_ce"] = loss_ce;
  if (loss_osc) j["loss_osc"] = *loss_osc;
  j["range_lo"] = range_lo;
  j["range_hi"] = range_hi;
  return j.dump();
}

namespace {

constexpr std::uint64_t kThresholdStream = 0x9e3779b97f4a7c15ULL;

}  // namespace

Trainer::Trainer(MultiExitModel& model, const Dataset& data, const TrainConfig& config)
    : model_(model), data_(data), config_(config) {
  config_.validate();
  data_.validate();
  if (data_.dim() != model_.config().input_dim) {
    throw std::invalid_argument("dataset has " + std::to_string(data_.dim()) + " features, model expects " +
                                std::to_string(model_.config().input_dim));
  }
  if (data_.num_classes > model_.num_classes()) throw std::invalid_argument("dataset has more classes than the model");
  const auto n = static_cast<std::uint64_t>(data_.size());
  const auto bs = static_cast<std::uint64_t>(config_.batch_size);
  steps_per_epoch_ = (n + bs - 1) / bs;
  total_steps_ = steps_per_epoch_ * static_cast<std::uint64_t>(config_.epochs);
  hyper_.base_lr = config_.lr;
  hyper_.weight_decay = config_.weight_decay;
  hyper_.total_steps = total_steps_;
  hyper_.validate();
  state_.data_rng = Rng(config_.seed);
  state_.threshold_rng = Rng(config_.seed ^ kThresholdStream);
  state_.tracker = ThresholdRangeTracker(initial_range(config_.signal, model_.num_classes()));
}

void Trainer::restore(TrainerState state) { state_ = std::move(state); }

StepRecord Trainer::step(std::span<const std::size_t> batch) {
  const int layers = model_.num_layers();
  const Dataset sub = data_.subset(batch);
  Graph g;
  const auto params = bind_parameters(g, model_);
  const GraphOutputs out = forward_graph(params, g.constant(sub.features), model_.config());
  const auto ce = per_layer_ce(out.logits, sub.labels);

  std::vector<Var> signal_vars;
  SignalMatrix detached(sub.size(), layers, config_.signal);
  for (int m = 1; m <= layers; ++m) {
    signal_vars.push_back(signal_var(out.logits[static_cast<std::size_t>(m - 1)], config_.signal));
    const Tensor& v = signal_vars.back().value();
    for (std::size_t n = 0; n < sub.size(); ++n) detached.at(n, m) = v[n];
  }
  const ThresholdRange range = state_.tracker.current();
  state_.tracker.observe(detached);

  StepRecord rec;
  rec.step = state_.global_step;
  rec.epoch = state_.epoch;
  rec.beta_t = decay_factor(state_.global_step, total_steps_, config_.beta0);
  rec.range_lo = range.lo;
  rec.range_hi = range.hi;

  Var loss;
  if (config_.objective == Objective::cosee) {
    const auto thresholds = sample_thresholds(range, config_.num_thresholds, state_.threshold_rng);
    Var lce = classification_loss(ce, detached, thresholds, rec.beta_t);
    std::vector<std::vector<bool>> correct(static_cast<std::size_t>(layers), std::vector<bool>(sub.size()));
    for (int m = 1; m <= layers; ++m) {
      const Tensor& logits = out.logits[static_cast<std::size_t>(m - 1)].value();
      for (std::size_t n = 0; n < sub.size(); ++n) correct[static_cast<std::size_t>(m - 1)][n] = argmax(logits.row(n)) == sub.labels[n];
    }
    Var losc = osc_loss(signal_vars, correct, config_.epsilon, direction_of(config_.signal));
    loss = total_loss(lce, losc, config_.alpha);
    rec.loss_ce = lce.value().item();
    rec.loss_osc = losc.value().item();
  } else {
    loss = baseline_loss(ce);
    rec.loss_ce = loss.value().item();
  }
  rec.loss_total = loss.value().item();

  model_.zero_grad();
  g.backward(loss);
  rec.lr = lr_at(state_.global_step, total_steps_, config_.lr);
  adamw_step(model_.parameters(), state_.optimizer, hyper_, rec.lr);
  state_.global_step += 1;
  return rec;
}

void Trainer::run_epoch(const std::function<void(const StepRecord&)>& on_step) {
  if (finished()) throw std::logic_error("trainer: all epochs already completed");
  std::vector<std::size_t> order(data_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), state_.data_rng);
  const auto bs = static_cast<std::size_t>(config_.batch_size);
  double loss_sum = 0.0;
  std::size_t steps = 0;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    std::span<const std::size_t> batch(order.data() + start, end - start);
    StepRecord rec = step(batch);
    loss_sum += rec.loss_total;
    ++steps;
    if (on_step) on_step(rec);
    log_.steps.push_back(std::move(rec));
  }
  log_.epoch_mean_loss.push_back(loss_sum / static_cast<double>(steps));
  state_.tracker.roll_epoch();
  state_.epoch += 1;
}

TrainLog Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  while (!finished()) run_epoch(on_step);
  return log_;
}

TrainResult train(MultiExitModel model, const Dataset& data, const TrainConfig& config) {
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  Trainer trainer(model, data, config);
  TrainLog log = trainer.run();
  return TrainResult{std::move(model), std::move(log)};
}

}  // namespace exitnet

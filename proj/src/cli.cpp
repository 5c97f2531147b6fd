#include "exitnet/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "exitnet/checkpoint.hpp"
#include "exitnet/dataset.hpp"
#include "exitnet/metrics.hpp"
#include "exitnet/model.hpp"
#include "exitnet/plot.hpp"
#include "exitnet/training.hpp"

namespace exitnet::cli {

namespace fs = std::filesystem;

namespace {

struct KeyInfo {
  const char* name;
  const char* value;
  const char* help;
};

// Every setting, its default and its flag help. Flags are --name, with
// underscores also accepted as dashes.
constexpr KeyInfo kKeys[] = {
    // model
    {"num_layers", "6", "number of layers / classifiers M"},
    {"width", "32", "hidden width"},
    {"nonlinearity", "relu", "relu or tanh"},
    {"model_seed", "", "initialisation seed (defaults to seed)"},
    // training
    {"alpha", "0.1", "weight of the signal calibration term"},
    {"beta0", "1.0", "final decay factor of the sample weights"},
    {"epsilon", "0.3", "calibration margin"},
    {"num_thresholds", "5", "thresholds sampled per step (K)"},
    {"epochs", "10", "training epochs"},
    {"batch_size", "32", "mini-batch size"},
    {"lr", "0.003", "base learning rate (linear decay to 0)"},
    {"weight_decay", "0.01", "decoupled weight decay"},
    {"seed", "0", "training seed (shuffling, thresholds)"},
    {"signal", "energy_normalized", "entropy, softmax_score or energy_normalized"},
    {"objective", "cosee", "cosee or conventional_uniform"},
    // data
    {"data", "", "dataset file"},
    {"format", "csv_numeric", "csv_numeric or jsonl_text"},
    {"hash_dim", "256", "feature-hashing buckets for jsonl_text"},
    {"hash_seed", "0", "feature-hashing seed"},
    {"dev_fraction", "0.2", "share of the dataset held out as dev"},
    {"split_seed", "0", "seed of the train/dev split"},
    {"split", "dev", "evaluation split: dev, train or all"},
    // evaluation
    {"checkpoint", "", "model checkpoint"},
    {"tau", "0.5", "exit threshold"},
    {"thresholds", "", "comma-separated threshold grid (default: 21 points over the signal range)"},
    {"grid", "", "hyperparameter grid, e.g. beta0=0.05,0.2,1,10; a bare alpha or beta0 uses the default grid"},
    {"plot", "false", "also write an SVG plot"},
    // synthetic data
    {"generator", "gaussian_mixture", "gaussian_mixture or two_spirals"},
    {"n", "1000", "number of samples"},
    {"dim", "16", "feature dimension"},
    {"classes", "2", "number of classes"},
    {"noise", "0", "label flip probability"},
    {"boundary_fraction", "0.3", "share of samples near the class boundary"},
    {"margin", "0.5", "distance defining 'near the boundary'"},
    {"spread", "1", "within-component standard deviation"},
    {"separation", "3", "distance of component centres from the origin"},
    {"components", "2", "mixture components per class"},
    {"data_seed", "0", "generator seed"},
    // output
    {"out", "", "output directory (default: $EXITNET_OUT/<command>, or runs/<command>)"},
};

// Typed view over resolved settings; conversion failures are usage errors.
class Config {
 public:
  explicit Config(Settings s) : s_(std::move(s)) {}

  const Settings& settings() const { return s_; }
  const std::string& str(const std::string& key) const { return s_.at(key); }
  bool empty(const std::string& key) const { return s_.at(key).empty(); }

  long long integer(const std::string& key) const {
    const std::string& v = str(key);
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) bad(key, "an integer");
    return out;
  }
  int i32(const std::string& key) const {
    const long long v = integer(key);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) bad(key, "a 32-bit integer");
    return static_cast<int>(v);
  }
  std::uint64_t u64(const std::string& key) const {
    const std::string& v = str(key);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) bad(key, "a non-negative integer");
    return out;
  }
  double real(const std::string& key) const { return parse_real(str(key), key); }
  bool flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad(key, "true or false");
  }
  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(trim(item), key));
    return out;
  }

  template <typename F>
  auto parsed(const std::string& key, F parse) const {
    try {
      return parse(str(key));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("--" + key + ": " + e.what());
    }
  }

  static std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

 private:
  [[noreturn]] void bad(const std::string& key, const char* expected) const {
    throw ConfigError("invalid value for --" + key + ": '" + str(key) + "' (expected " + expected + ")");
  }
  double parse_real(const std::string& v, const std::string& key) const {
    double out = 0.0;
    std::string_view sv = v;
    if (!sv.empty() && sv.front() == '+') sv.remove_prefix(1);
    const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), out);
    if (sv.empty() || res.ec != std::errc() || res.ptr != sv.data() + sv.size() || std::isnan(out)) {
      throw ConfigError("invalid value for --" + key + ": '" + v + "' (expected a number)");
    }
    return out;
  }

  Settings s_;
};

ModelConfig model_config(const Config& c, int input_dim, int num_classes) {
  ModelConfig m;
  m.num_layers = c.i32("num_layers");
  m.width = c.i32("width");
  m.input_dim = input_dim;
  m.num_classes = num_classes;
  m.nonlinearity = c.parsed("nonlinearity", parse_nonlinearity);
  m.seed = c.empty("model_seed") ? c.u64("seed") : c.u64("model_seed");
  return m;
}

TrainConfig train_config(const Config& c) {
  TrainConfig t;
  t.alpha = c.real("alpha");
  t.beta0 = c.real("beta0");
  t.epsilon = c.real("epsilon");
  t.num_thresholds = c.i32("num_thresholds");
  t.epochs = c.i32("epochs");
  t.batch_size = c.i32("batch_size");
  t.lr = c.real("lr");
  t.weight_decay = c.real("weight_decay");
  t.seed = c.u64("seed");
  t.signal = c.parsed("signal", parse_signal_kind);
  t.objective = c.parsed("objective", parse_objective);
  return t;
}

SyntheticSpec synthetic_spec(const Config& c) {
  SyntheticSpec s;
  s.generator = c.parsed("generator", parse_generator);
  const long long n = c.integer("n");
  if (n < 1) throw ConfigError("--n must be positive");
  s.n = static_cast<std::size_t>(n);
  s.dim = c.i32("dim");
  s.classes = c.i32("classes");
  s.noise = c.real("noise");
  s.boundary_fraction = c.real("boundary_fraction");
  s.margin = c.real("margin");
  s.spread = c.real("spread");
  s.separation = c.real("separation");
  s.components = c.i32("components");
  return s;
}

struct HyperGrid {
  std::string key;
  std::vector<std::string> values;
};

HyperGrid parse_grid(const std::string& text) {
  const auto eq = text.find('=');
  HyperGrid g;
  g.key = Config::trim(text.substr(0, eq));
  if (eq == std::string::npos) {
    // A bare key selects the default grid where one exists.
    if (g.key == "alpha") g.values = {"0.001", "0.01", "0.1", "1.0"};
    if (g.key == "beta0") g.values = {"0.05", "0.2", "1.0", "10.0"};
    if (g.values.empty()) throw ConfigError("--grid must look like key=v1,v2,... (only alpha and beta0 have default grids)");
    return g;
  }
  static const std::vector<std::string> allowed{"alpha", "beta0", "epsilon", "num_thresholds"};
  if (std::find(allowed.begin(), allowed.end(), g.key) == allowed.end()) {
    throw ConfigError("--grid key must be one of alpha, beta0, epsilon, num_thresholds; got '" + g.key + "'");
  }
  std::stringstream ss(text.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Config::trim(item);
    if (!item.empty()) g.values.push_back(item);
  }
  if (g.values.empty()) throw ConfigError("--grid: empty grid for '" + g.key + "'");
  return g;
}

// Validation of everything that can be checked before any work starts.
void validate(const Config& c, const std::string& command) {
  auto checked = [&](auto&& f) {
    try {
      f();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  };
  if (command == "gen-data") {
    checked([&] { synthetic_spec(c).validate(); });
    c.u64("data_seed");
    return;
  }
  if (c.empty("data")) throw ConfigError("--data is required: path to the dataset file");
  if (!fs::is_regular_file(c.str("data"))) throw ConfigError("--data: no such file '" + c.str("data") + "'");
  c.parsed("format", parse_format);
  c.u64("hash_seed");
  if (c.integer("hash_dim") < 1) throw ConfigError("--hash_dim must be positive");
  const double dev = c.real("dev_fraction");
  if (!(dev >= 0.0 && dev <= 1.0)) throw ConfigError("--dev_fraction must lie in [0, 1]");
  c.u64("split_seed");
  const std::string& split = c.str("split");
  if (split != "dev" && split != "train" && split != "all") throw ConfigError("--split must be dev, train or all");
  checked([&] { train_config(c).validate(); });
  checked([&] {
    ModelConfig m = model_config(c, 1, 2);
    m.validate();
  });
  c.real("tau");
  c.flag("plot");
  c.reals("thresholds");
  const bool needs_checkpoint = command == "eval" || command == "stats";
  if (needs_checkpoint && c.empty("checkpoint")) throw ConfigError("--checkpoint is required for " + command);
  if (!c.empty("checkpoint") && !fs::is_regular_file(c.str("checkpoint"))) {
    throw ConfigError("--checkpoint: no such file '" + c.str("checkpoint") + "'");
  }
  if (command == "sweep" && !c.empty("grid")) {
    if (!c.empty("checkpoint")) {
      throw ConfigError("--grid trains one model per value and cannot be combined with --checkpoint");
    }
    const HyperGrid g = parse_grid(c.str("grid"));
    for (const auto& v : g.values) {
      Settings point = c.settings();
      point[g.key] = v;
      checked([&] { train_config(Config(point)).validate(); });
    }
  }
  if (command == "stats" && c.real("dev_fraction") <= 0.0) {
    throw ConfigError("stats compares train and dev exits; --dev_fraction must be positive");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

struct Splits {
  Dataset train;
  Dataset dev;
};

Splits load_splits(const Config& c) {
  const TextHashing hashing{static_cast<std::size_t>(c.integer("hash_dim")), c.u64("hash_seed")};
  Dataset all = load_dataset(c.str("data"), parse_format(c.str("format")), hashing);
  auto [tr, dv] = split_dataset(all, c.real("dev_fraction"), c.u64("split_seed"));
  // Both halves see every class so the model width matches the full dataset.
  tr.num_classes = dv.num_classes = all.num_classes;
  return {std::move(tr), std::move(dv)};
}

const Dataset& eval_split(const Config& c, const Splits& s, Dataset& all_holder) {
  const std::string& which = c.str("split");
  if (which == "train") return s.train;
  if (which == "dev") {
    if (s.dev.size() == 0) throw std::runtime_error("dev split is empty; raise --dev_fraction or use --split train");
    return s.dev;
  }
  all_holder = s.train;
  if (s.dev.size() > 0) {
    Tensor f(Shape{s.train.size() + s.dev.size(), static_cast<std::size_t>(s.train.dim())});
    std::copy(s.train.features.data().begin(), s.train.features.data().end(), f.data().begin());
    std::copy(s.dev.features.data().begin(), s.dev.features.data().end(),
              f.data().begin() + static_cast<std::ptrdiff_t>(s.train.features.size()));
    all_holder.features = std::move(f);
    all_holder.labels.insert(all_holder.labels.end(), s.dev.labels.begin(), s.dev.labels.end());
  }
  all_holder.split = "all";
  return all_holder;
}

MultiExitModel load_model_for(const Config& c, const Dataset& d) {
  LoadedCheckpoint ck = load_checkpoint(c.str("checkpoint"));
  if (ck.model.config().input_dim != d.dim()) {
    throw std::runtime_error("checkpoint expects " + std::to_string(ck.model.config().input_dim) +
                             " features, dataset has " + std::to_string(d.dim()));
  }
  if (d.num_classes > ck.model.num_classes()) throw std::runtime_error("dataset has more classes than the checkpoint");
  return std::move(ck.model);
}

// Trains on the train split, streaming the step log; returns the trainer's
// final model and writes the checkpoint.
MultiExitModel train_model(const Config& c, const Splits& s, const fs::path& ckpt, const fs::path& log_path,
                           std::ostream& out) {
  const TrainConfig tc = train_config(c);
  MultiExitModel model = init_model(model_config(c, s.train.dim(), s.train.num_classes));
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write '" + log_path.string() + "'");
  Trainer trainer(model, s.train, tc);
  trainer.run([&](const StepRecord& r) { log << r.to_json() << '\n'; });
  log.flush();
  if (!log) throw std::runtime_error("failed writing '" + log_path.string() + "'");
  CheckpointExtras ex = extras_from_trainer(trainer.state());
  save_checkpoint(ckpt.string(), model, ex);
  const auto& losses = trainer.log().epoch_mean_loss;
  out << "trained " << trainer.total_steps() << " steps over " << tc.epochs << " epochs; final epoch loss "
      << losses.back() << "\n";
  return model;
}

std::vector<double> threshold_grid(const Config& c, SignalKind kind, int num_classes) {
  std::vector<double> grid = c.reals("thresholds");
  if (!grid.empty()) return grid;
  ThresholdRange r = initial_range(kind, num_classes);
  if (kind == SignalKind::softmax_score) r.lo = 1.0 / num_classes;
  constexpr int kPoints = 21;
  for (int i = 0; i < kPoints; ++i) grid.push_back(r.lo + (r.hi - r.lo) * i / (kPoints - 1));
  // Order the grid so speed-up grows along it.
  if (direction_of(kind) == Direction::difficulty_negative) std::reverse(grid.begin(), grid.end());
  return grid;
}

nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["tau"] = r.threshold;
  j["accuracy"] = r.accuracy;
  j["f1"] = r.f1;
  j["mean"] = r.mean();
  j["speedup"] = r.speedup;
  j["premature_rate"] = r.premature_rate;
  j["delayed_rate"] = r.delayed_rate;
  j["histogram"] = r.histogram;
  return j;
}

std::string fmt_value(const std::string& v) {
  std::string out = v;
  std::replace(out.begin(), out.end(), '/', '_');
  return out;
}

int cmd_gen_data(const Config& c, const fs::path& dir, std::ostream& out) {
  const Dataset d = gen_synthetic(synthetic_spec(c), c.u64("data_seed"));
  const fs::path path = dir / "data.csv";
  save_csv(path.string(), d);
  out << "wrote " << d.size() << " samples to " << path.string() << "\n";
  return kOk;
}

int cmd_train(const Config& c, const fs::path& dir, std::ostream& out) {
  const Splits s = load_splits(c);
  const MultiExitModel model = train_model(c, s, dir / "model.ckpt", dir / "train_log.jsonl", out);
  if (s.dev.size() > 0) {
    const auto outputs = forward_all(model, s.dev.features);
    std::vector<int> preds(s.dev.size());
    for (std::size_t n = 0; n < preds.size(); ++n) preds[n] = outputs.predicted(n, model.num_layers());
    out << "dev accuracy (final layer): " << accuracy(preds, s.dev.labels) << "\n";
  }
  out << "checkpoint: " << (dir / "model.ckpt").string() << "\n";
  return kOk;
}

int cmd_eval(const Config& c, const fs::path& dir, std::ostream& out) {
  const Splits s = load_splits(c);
  Dataset holder;
  const Dataset& d = eval_split(c, s, holder);
  const MultiExitModel model = load_model_for(c, d);
  const SignalKind kind = parse_signal_kind(c.str("signal"));
  const double tau = c.real("tau");
  const auto outputs = forward_all(model, d.features);
  const EvalReport r = evaluate_at(outputs, d.labels, signals_for_batch(outputs, kind), tau);

  // Batch-size-1 path: per-sample incremental evaluation and its cost.
  std::uint64_t flops = 0;
  std::size_t agree = 0;
  const auto exits = simulate_batch(signals_for_batch(outputs, kind), tau);
  for (std::size_t n = 0; n < d.size(); ++n) {
    const auto res = infer_early_exit(model, d.row(n), kind, tau);
    flops += res.flops;
    agree += res.exit_layer == exits.exit_layer[n];
  }
  IncrementalForward full(model, d.row(0));
  while (full.layers_evaluated() < model.num_layers()) full.advance();

  nlohmann::ordered_json j = report_json(r);
  j["signal"] = to_string(kind);
  j["split"] = c.str("split");
  j["samples"] = d.size();
  j["mean_flops"] = static_cast<double>(flops) / static_cast<double>(d.size());
  j["full_flops"] = full.flops();
  j["incremental_agreement"] = static_cast<double>(agree) / static_cast<double>(d.size());
  write_text(dir / "eval.json", j.dump(2) + "\n");
  out << "accuracy " << r.accuracy << ", f1 " << r.f1 << ", speed-up " << r.speedup << "x at tau " << tau << "\n";
  return kOk;
}

int cmd_sweep(const Config& c, const fs::path& dir, std::ostream& out) {
  const Splits s = load_splits(c);
  Dataset holder;
  const Dataset& d = eval_split(c, s, holder);
  const SignalKind kind = parse_signal_kind(c.str("signal"));
  const std::vector<double> grid = threshold_grid(c, kind, s.train.num_classes);
  std::vector<PlotSeries> series;
  nlohmann::ordered_json summary;
  summary["signal"] = to_string(kind);
  summary["split"] = c.str("split");
  summary["thresholds"] = grid;
  summary["curves"] = nlohmann::ordered_json::array();

  auto emit = [&](const MultiExitModel& model, const std::string& label, const std::string& file) {
    const TradeoffCurve curve = sweep_tradeoff(model, d, kind, grid);
    write_text(dir / file, curve_csv(curve));
    PlotSeries ps{label, {}, {}};
    for (const auto& r : curve) {
      ps.x.push_back(r.speedup);
      ps.y.push_back(r.accuracy);
    }
    series.push_back(std::move(ps));
    summary["curves"].push_back({{"label", label}, {"csv", file}});
    out << "wrote " << (dir / file).string() << " (" << curve.size() << " thresholds)\n";
  };

  if (!c.empty("checkpoint")) {
    emit(load_model_for(c, d), "checkpoint", "curve.csv");
  } else if (c.empty("grid")) {
    const auto model = train_model(c, s, dir / "model.ckpt", dir / "train_log.jsonl", out);
    emit(model, "model", "curve.csv");
  } else {
    const HyperGrid g = parse_grid(c.str("grid"));
    summary["grid_key"] = g.key;
    for (const auto& v : g.values) {
      Settings point = c.settings();
      point[g.key] = v;
      const Config pc(point);
      const std::string tag = g.key + "_" + fmt_value(v);
      const auto model = train_model(pc, s, dir / ("model_" + tag + ".ckpt"), dir / ("train_log_" + tag + ".jsonl"), out);
      emit(model, g.key + "=" + v, "curve_" + tag + ".csv");
    }
  }
  if (c.flag("plot")) {
    write_text(dir / "curve.svg", svg_line_plot(series, "speed-up ratio", "accuracy", "accuracy vs speed-up"));
    summary["svg"] = "curve.svg";
  }
  write_text(dir / "sweep.json", summary.dump(2) + "\n");
  return kOk;
}

int cmd_stats(const Config& c, const fs::path& dir, std::ostream& out) {
  const Splits s = load_splits(c);
  if (s.dev.size() == 0) throw std::runtime_error("dev split is empty; raise --dev_fraction");
  Dataset holder;
  const Dataset& d = eval_split(c, s, holder);
  const MultiExitModel model = load_model_for(c, s.train);
  const SignalKind kind = parse_signal_kind(c.str("signal"));
  const double tau = c.real("tau");
  const ExitHistograms h = exit_histograms(model, s.train, s.dev, kind, tau);
  const auto outputs = forward_all(model, d.features);
  const SignalMatrix sig = signals_for_batch(outputs, kind);
  const EvalReport r = evaluate_at(outputs, d.labels, sig, tau);
  const FailureRates fr = failure_rates(outputs, d.labels, sig, tau);

  nlohmann::ordered_json j;
  j["tau"] = tau;
  j["signal"] = to_string(kind);
  j["num_layers"] = model.num_layers();
  j["split"] = c.str("split");
  j["samples"] = d.size();
  j["histograms"]["train"] = {{"counts", h.counts_a}, {"distribution", h.dist_a}};
  j["histograms"]["dev"] = {{"counts", h.counts_b}, {"distribution", h.dist_b}};
  j["tv_distance"] = h.tv_distance;
  j["failure_rates"] = {{"premature", fr.premature},
                        {"delayed", fr.delayed},
                        {"premature_undefined", fr.premature_undefined},
                        {"delayed_undefined", fr.delayed_undefined},
                        {"incorrect_points", fr.incorrect_points},
                        {"correct_points", fr.correct_points}};
  j["speedup"] = r.speedup;
  j["accuracy"] = r.accuracy;
  j["f1"] = r.f1;
  write_text(dir / "report.json", j.dump(2) + "\n");
  write_text(dir / "histogram.csv", histogram_csv(h));
  out << "tv distance " << h.tv_distance << ", speed-up " << r.speedup << "x, accuracy " << r.accuracy << "\n";
  return kOk;
}

fs::path output_dir(const Config& c, const std::string& command) {
  if (!c.empty("out")) return c.str("out");
  const char* root = std::getenv(kOutEnv);
  return fs::path(root != nullptr && *root != '\0' ? root : "runs") / command;
}

}  // namespace

const Settings& default_settings() {
  static const Settings defaults = [] {
    Settings s;
    for (const auto& k : kKeys) s[k.name] = k.value;
    return s;
  }();
  return defaults;
}

Settings read_config_file(const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigBase().from_file(path);
  } catch (const CLI::Error& e) {
    throw ConfigError("--config: cannot read '" + path + "': " + e.what());
  }
  Settings out;
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--") continue;
    if (!default_settings().count(it.name)) throw ConfigError(path + ": unknown key '" + it.name + "'");
    std::string joined;
    for (std::size_t i = 0; i < it.inputs.size(); ++i) joined += (i ? "," : "") + it.inputs[i];
    out[it.name] = joined;
  }
  return out;
}

std::string format_settings(const Settings& s, const std::string& command) {
  std::ostringstream os;
  os << "# resolved configuration for `exitnet " << command << "`\n";
  for (const auto& [k, v] : s) os << k << " = \"" << v << "\"\n";
  return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-exit early-exit training and evaluation"};
  app.name(args.empty() ? "exitnet" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    CLI::App* app = nullptr;
  };
  Command commands[] = {
      {"train", "train a model; writes model.ckpt and train_log.jsonl"},
      {"eval", "evaluate a checkpoint at one threshold; writes eval.json"},
      {"sweep", "threshold sweep (optionally over a hyperparameter grid); writes curve CSVs"},
      {"stats", "exit histograms, failure rates and speed-up; writes report.json"},
      {"gen-data", "generate a synthetic dataset; writes data.csv"},
  };
  std::map<std::string, std::string> flag_values;
  std::map<std::string, std::map<std::string, CLI::Option*>> flag_opts;
  std::map<std::string, std::string> config_path;
  for (auto& cmd : commands) {
    cmd.app = app.add_subcommand(cmd.name, cmd.help);
    cmd.app->add_option("--config", config_path[cmd.name], "flat key = value config file; flags override it");
    for (const auto& k : kKeys) {
      std::string names = std::string("--") + k.name;
      std::string dashed = k.name;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      if (dashed != k.name) names += ",--" + dashed;
      // Each subcommand gets its own storage slot.
      auto& slot = flag_values[std::string(cmd.name) + "/" + k.name];
      flag_opts[cmd.name][k.name] = cmd.app->add_option(names, slot, k.help);
    }
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  std::string command;
  for (const auto& cmd : commands)
    if (cmd.app->parsed()) command = cmd.name;

  Settings resolved = default_settings();
  fs::path dir;
  std::optional<Config> cfg;
  try {
    if (!config_path[command].empty()) {
      for (const auto& [k, v] : read_config_file(config_path[command])) resolved[k] = v;
    }
    for (const auto& [k, opt] : flag_opts[command]) {
      if (opt->count() > 0) resolved[k] = flag_values[command + "/" + k];
    }
    cfg.emplace(resolved);
    validate(*cfg, command);
    dir = output_dir(*cfg, command);
    resolved["out"] = dir.string();
    cfg.emplace(resolved);
  } catch (const ConfigError& e) {
    err << "exitnet " << command << ": error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    fs::create_directories(dir);
    write_text(dir / "config.ini", format_settings(resolved, command));
    if (command == "gen-data") return cmd_gen_data(*cfg, dir, out);
    if (command == "train") return cmd_train(*cfg, dir, out);
    if (command == "eval") return cmd_eval(*cfg, dir, out);
    if (command == "sweep") return cmd_sweep(*cfg, dir, out);
    if (command == "stats") return cmd_stats(*cfg, dir, out);
  } catch (const ConfigError& e) {
    err << "exitnet " << command << ": error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "exitnet " << command << ": error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace exitnet::cli

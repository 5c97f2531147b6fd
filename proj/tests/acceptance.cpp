// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and
// experiment settings are fixed here and must not be tuned per run.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "exitnet/checkpoint.hpp"
#include "exitnet/cli.hpp"
#include "exitnet/exit_policy.hpp"
#include "exitnet/metrics.hpp"
#include "exitnet/training.hpp"
#include "support.hpp"
#include "temp_dir.hpp"

using namespace exitnet;
using exitnet::testing::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

// ---------------------------------------------------------------------------

constexpr double kGradTol = 1e-4;
constexpr double kCrossingExclusion = 1e-6;

// Thresholds placed midway between neighbouring signal values at the 1/3 and
// 2/3 quantiles, so exits vary across samples but no signal sits on a threshold.
std::vector<double> interior_thresholds(const MultiExitModel& m, const Dataset& d, SignalKind kind) {
  const auto sig = signals_for_batch(forward_all(m, d.features), kind);
  std::vector<double> v(sig.values().begin(), sig.values().end());
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double q : {1.0 / 3.0, 2.0 / 3.0}) {
    const auto i = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
    out.push_back(0.5 * (v[i] + v[i + 1]));
  }
  return out;
}

Outcome ac1_gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ModelConfig cfg;
    cfg.num_layers = 4;
    cfg.width = 16;
    cfg.input_dim = 6;
    cfg.num_classes = 2;
    cfg.nonlinearity = Nonlinearity::tanh;
    cfg.seed = seed;
    auto m = init_model(cfg);
    const Dataset d = exitnet::testing::random_dataset(8, 6, 2, 100 + seed);
    exitnet::testing::TotalLossSetup s;
    s.alpha = 0.1;
    s.beta = 1.0;
    s.epsilon = 0.3;
    s.thresholds = interior_thresholds(m, d, s.kind);
    if (exitnet::testing::threshold_clearance(m, d, s) <= kCrossingExclusion) {
      ok = false;
      continue;
    }
    const auto r = exitnet::testing::check_total_loss_gradient(m, d, s);
    worst = std::max(worst, r.worst);
    checked += r.checked;
    skipped += r.skipped;
  }
  const double secs = seconds_since(t0);
  ok = ok && checked > 0 && worst < kGradTol && secs < 60.0;
  return {ok, fmt("5 models, %zu entries checked (%zu skipped at crossings), worst rel err %.2e (tol %.0e), %.1fs",
                  checked, skipped, worst, kGradTol, secs)};
}

// ---------------------------------------------------------------------------

Outcome ac2_swm_algebra() {
  const std::vector<double> betas{0.0, 0.05, 0.2, 1.0, 10.0};
  std::size_t violations = 0, cases = 0;
  double worst_reduction = 0.0;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int M = 2; M <= 16; ++M) {
    for (int ms = 1; ms <= M; ++ms) {
      for (double beta : betas) {
        ++cases;
        const auto w = swm_weights(ms, M, beta);
        double sum = 0.0;
        for (double x : w) sum += x;
        if (std::abs(sum - 1.0) > 1e-9) ++violations;
        for (int d = 1; ms - d >= 1 && ms + d <= M; ++d) {
          if (w[ms - d - 1] != w[ms + d - 1]) ++violations;
        }
        for (int m = 1; m <= M; ++m) {
          for (int k = 1; k <= M; ++k) {
            if (std::abs(k - ms) > std::abs(m - ms) && w[k - 1] > w[m - 1]) ++violations;
          }
        }
        if (beta == 0.0) {
          for (double x : w) {
            if (std::abs(x - 1.0 / M) > 1e-12) ++violations;
          }
        }
      }
    }
    // Zero decay: the weighted objective equals the uniform-weight one.
    const std::size_t N = 7;
    Graph g;
    std::vector<Var> ce;
    for (int m = 0; m < M; ++m) {
      std::vector<double> v(N);
      for (double& x : v) x = u(rng);
      ce.push_back(g.constant(Tensor::vector(v)));
    }
    SignalMatrix sig(N, M, SignalKind::entropy);
    for (std::size_t n = 0; n < N; ++n)
      for (int m = 1; m <= M; ++m) sig.at(n, m) = u(rng);
    for (double tau : {0.2, 1.0, 2.5}) {
      const double a = classification_loss_at_threshold(ce, sig, tau, 0.0).value().item();
      const double b = baseline_loss(ce).value().item();
      worst_reduction = std::max(worst_reduction, std::abs(a - b));
    }
  }
  const bool ok = violations == 0 && worst_reduction <= 1e-12;
  return {ok, fmt("%zu (M, m*, beta) cases, %zu violations; zero-decay vs uniform max diff %.1e (tol 1e-12)", cases,
                  violations, worst_reduction)};
}

// ---------------------------------------------------------------------------

Outcome ac3_exit_oracle() {
  std::mt19937_64 rng(3);
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t N = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
    const int M = std::uniform_int_distribution<int>(2, 16)(rng);
    const SignalKind kind = t % 2 == 0 ? SignalKind::energy_normalized : SignalKind::softmax_score;
    SignalMatrix s(N, M, kind);
    // Values on a coarse grid so ties with tau occur.
    std::uniform_int_distribution<int> grid(0, 10);
    for (std::size_t n = 0; n < N; ++n)
      for (int m = 1; m <= M; ++m) s.at(n, m) = grid(rng) / 10.0;
    const double tau = grid(rng) / 10.0;
    const auto got = simulate_batch(s, tau);
    std::vector<std::size_t> counts(static_cast<std::size_t>(M), 0);
    for (std::size_t n = 0; n < N; ++n) {
      int want = M;
      for (int m = 1; m < M; ++m) {
        const double v = s.at(n, m);
        const bool fire = kind == SignalKind::softmax_score ? v > tau : v < tau;
        if (fire) {
          want = m;
          break;
        }
      }
      ++counts[static_cast<std::size_t>(want - 1)];
      if (got.exit_layer[n] != want) ++mismatches;
    }
    if (got.counts != counts) ++mismatches;
  }
  std::vector<std::size_t> at6(12, 0), atM(12, 0);
  at6[5] = 100;
  atM[11] = 100;
  const double s6 = speedup_ratio(at6), sM = speedup_ratio(atM);
  const bool ok = mismatches == 0 && std::abs(s6 - 2.0) < 1e-12 && std::abs(sM - 1.0) < 1e-12;
  return {ok, fmt("1000 matrices, %zu mismatches vs brute force; M=12 all-at-6 -> %.2fx, all-at-M -> %.2fx", mismatches,
                  s6, sM)};
}

// ---------------------------------------------------------------------------

Outcome ac4_signals() {
  struct Case {
    const char* what;
    double got;
    double want;
  };
  const double l2 = std::log(2.0);
  const std::vector<Case> cases{
      {"lse(0,0)", logsumexp(std::vector<double>{0, 0}), l2},
      {"lse(x)", logsumexp(std::vector<double>{-4.25}), -4.25},
      {"lse(1000,1000)", logsumexp(std::vector<double>{1000, 1000}), 1000 + l2},
      {"H(.5,.5)", entropy_signal(std::vector<double>{0.5, 0.5}), l2},
      {"H(1,0)", entropy_signal(std::vector<double>{1.0, 0.0}), 0.0},
      {"H(.9,.1)", entropy_signal(std::vector<double>{0.9, 0.1}), 0.325083},
      {"S(.5,.5)", softmax_signal(std::vector<double>{0.5, 0.5}), 0.5},
      {"S(.2,.3,.5)", softmax_signal(std::vector<double>{0.2, 0.3, 0.5}), 0.5},
      {"S(.9,.1)", softmax_signal(std::vector<double>{0.9, 0.1}), 0.9},
      {"E(0,0)", energy_signal(std::vector<double>{0, 0}), -l2},
      {"E(3,0)", energy_signal(std::vector<double>{3, 0}), -3.048587},
      {"E(1,1)", energy_signal(std::vector<double>{1, 1}), -(1 + l2)},
      {"En(0,0)", normalized_energy(std::vector<double>{0, 0}), 1.0 / 3.0},
      {"En(E=0)", normalized_energy(std::vector<double>{-l2, -l2}), 0.5},
      {"En(3,0)", normalized_energy(std::vector<double>{3, 0}), 0.045287},
  };
  std::string bad;
  double worst = 0.0;
  for (const auto& c : cases) {
    const double e = std::abs(c.got - c.want);
    worst = std::max(worst, e);
    if (!(e <= 1e-6)) bad += std::string(" ") + c.what;
  }
  // Normalized energy must order samples exactly as raw energy does.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 3.0);
  std::uniform_int_distribution<int> cdist(2, 10);
  std::size_t disagreements = 0;
  const int pairs = 10000;
  for (int i = 0; i < pairs; ++i) {
    const int C = cdist(rng);
    std::vector<double> a(static_cast<std::size_t>(C)), b(static_cast<std::size_t>(C));
    for (double& x : a) x = nd(rng);
    for (double& x : b) x = nd(rng);
    const double ea = energy_signal(a), eb = energy_signal(b);
    const double na = normalized_energy(a), nb = normalized_energy(b);
    if ((ea < eb) != (na < nb) || (ea > eb) != (na > nb)) ++disagreements;
  }
  const bool ok = bad.empty() && disagreements == 0;
  // The (3,0) reference is checked as written; its exact value is 1/(e^3 + 2).
  const double exact30 = 1.0 / (std::exp(3.0) + 2.0);
  return {ok, fmt("%zu examples, max abs err %.1e (tol 1e-6)%s; En(3,0) = %.7f, closed form 1/(e^3+2) = %.7f; rank "
                  "agreement on %d pairs: %.2f%%",
                  cases.size(), worst, bad.empty() ? "" : (" failing:" + bad).c_str(),
                  normalized_energy(std::vector<double>{3, 0}), exact30, pairs,
                  100.0 * (pairs - static_cast<double>(disagreements)) / pairs)};
}

// ---------------------------------------------------------------------------

Outcome ac5_monotone() {
  std::size_t violations = 0;
  std::size_t sweeps = 0;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    SyntheticSpec sp;
    sp.n = 300;
    sp.dim = 8;
    sp.classes = 2 + i % 3;
    Dataset d = gen_synthetic(sp, 500 + static_cast<std::uint64_t>(i));
    ModelConfig mc;
    mc.num_layers = 3 + i % 5;
    mc.width = 16;
    mc.input_dim = 8;
    mc.num_classes = d.num_classes;
    mc.nonlinearity = i % 2 ? Nonlinearity::tanh : Nonlinearity::relu;
    mc.seed = static_cast<std::uint64_t>(i);
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = static_cast<std::uint64_t>(i);
    tc.signal = i % 2 ? SignalKind::entropy : SignalKind::energy_normalized;
    tc.objective = i % 4 == 3 ? Objective::conventional_uniform : Objective::cosee;
    const auto res = train(init_model(mc), d, tc);
    for (SignalKind kind : {SignalKind::entropy, SignalKind::energy_normalized}) {
      std::vector<double> grid(200);
      const double hi = kind == SignalKind::entropy ? std::log(static_cast<double>(d.num_classes)) : 1.0;
      std::uniform_real_distribution<double> u(0.0, hi);
      for (double& t : grid) t = u(rng);
      std::sort(grid.begin(), grid.end());
      const auto curve = sweep_tradeoff(res.model, d, kind, grid);
      ++sweeps;
      for (std::size_t k = 1; k < curve.size(); ++k) violations += curve[k].speedup < curve[k - 1].speedup;
    }
  }
  return {violations == 0, fmt("20 trained models, %zu sorted sweeps of 200 thresholds, %zu violations", sweeps, violations)};
}

// ---------------------------------------------------------------------------

// Shared synthetic task for the ablation reproductions.
constexpr int kSeeds = 5;

SyntheticSpec ablation_task() {
  SyntheticSpec sp;
  sp.generator = Generator::gaussian_mixture;
  sp.n = 5000;  // 4000 train / 1000 dev
  sp.dim = 16;
  sp.classes = 2;
  sp.noise = 0.0;
  sp.boundary_fraction = 0.5;
  sp.components = 6;
  sp.separation = 3.0;
  return sp;
}

struct AblationRun {
  double acc[3]{};  // at 2x, 3x, 4x
  double speed[3]{};
  double premature = 0.0;  // at 4x
  double delayed = 0.0;
  double secs = 0.0;
};

struct Ablation {
  AblationRun cosee[kSeeds];
  AblationRun base[kSeeds];
  std::vector<MultiExitModel> cosee_models;
  std::vector<Dataset> train, dev;
  double max_secs = 0.0;
};

const Ablation& ablation() {
  static const Ablation a = [] {
    Ablation out;
    for (int s = 0; s < kSeeds; ++s) {
      const Dataset all = gen_synthetic(ablation_task(), 100 + static_cast<std::uint64_t>(s));
      auto [tr, dev] = split_dataset(all, 0.2, 7 + static_cast<std::uint64_t>(s));
      for (int obj = 0; obj < 2; ++obj) {
        ModelConfig mc;
        mc.num_layers = 6;
        mc.width = 32;
        mc.input_dim = 16;
        mc.num_classes = 2;
        mc.seed = static_cast<std::uint64_t>(s);
        TrainConfig tc;
        tc.alpha = 0.1;
        tc.beta0 = 1.0;
        tc.epochs = 5;
        tc.seed = static_cast<std::uint64_t>(s);
        tc.signal = SignalKind::energy_normalized;
        tc.objective = obj == 0 ? Objective::cosee : Objective::conventional_uniform;
        const auto t0 = std::chrono::steady_clock::now();
        auto res = train(init_model(mc), tr, tc);
        AblationRun& r = obj == 0 ? out.cosee[s] : out.base[s];
        r.secs = seconds_since(t0);
        out.max_secs = std::max(out.max_secs, r.secs);
        const auto outs = forward_all(res.model, dev.features);
        const auto sig = signals_for_batch(outs, SignalKind::energy_normalized);
        const double targets[3] = {2.0, 3.0, 4.0};
        for (int i = 0; i < 3; ++i) {
          const auto rep = evaluate_at(outs, dev.labels, sig, threshold_for_speedup(sig, targets[i]));
          r.acc[i] = rep.accuracy;
          r.speed[i] = rep.speedup;
          if (i == 2) {
            r.premature = rep.premature_rate;
            r.delayed = rep.delayed_rate;
          }
        }
        if (obj == 0) out.cosee_models.push_back(std::move(res.model));
      }
      out.train.push_back(std::move(tr));
      out.dev.push_back(std::move(dev));
    }
    return out;
  }();
  return a;
}

double mean_of(const AblationRun (&runs)[kSeeds], auto field) {
  double s = 0.0;
  for (const auto& r : runs) s += field(r);
  return s / kSeeds;
}

Outcome ac6_accuracy_at_speedup() {
  const Ablation& a = ablation();
  double c[2], b[2], sc[2], sb[2];
  for (int i = 0; i < 2; ++i) {
    c[i] = mean_of(a.cosee, [i](const AblationRun& r) { return r.acc[i]; });
    b[i] = mean_of(a.base, [i](const AblationRun& r) { return r.acc[i]; });
    sc[i] = mean_of(a.cosee, [i](const AblationRun& r) { return r.speed[i]; });
    sb[i] = mean_of(a.base, [i](const AblationRun& r) { return r.speed[i]; });
  }
  bool matched = true;
  for (int s = 0; s < kSeeds; ++s) {
    matched = matched && a.cosee[s].speed[0] >= 2.0 && a.base[s].speed[0] >= 2.0 && a.cosee[s].speed[1] >= 3.0 &&
              a.base[s].speed[1] >= 3.0;
  }
  const bool ok = matched && c[0] >= b[0] && c[1] >= b[1] && a.max_secs < 600.0;
  return {ok, fmt("mean over %d seeds: >=2x cosee %.4f vs baseline %.4f (gap %+.4f, speed-ups %.2f/%.2f); >=3x cosee "
                  "%.4f vs baseline %.4f (gap %+.4f, speed-ups %.2f/%.2f); slowest run %.1fs",
                  kSeeds, c[0], b[0], c[0] - b[0], sc[0], sb[0], c[1], b[1], c[1] - b[1], sc[1], sb[1], a.max_secs)};
}

Outcome ac7_failure_rates() {
  const Ablation& a = ablation();
  const double pc = mean_of(a.cosee, [](const AblationRun& r) { return r.premature; });
  const double pb = mean_of(a.base, [](const AblationRun& r) { return r.premature; });
  const double dc = mean_of(a.cosee, [](const AblationRun& r) { return r.delayed; });
  const double db = mean_of(a.base, [](const AblationRun& r) { return r.delayed; });
  const double sc = mean_of(a.cosee, [](const AblationRun& r) { return r.speed[2]; });
  const double sb = mean_of(a.base, [](const AblationRun& r) { return r.speed[2]; });
  const bool ok = pc <= pb && dc <= db;
  return {ok, fmt("at ~4x (mean speed-up %.2f/%.2f): premature cosee %.4f vs baseline %.4f; delayed cosee %.4f vs "
                  "baseline %.4f",
                  sc, sb, pc, pb, dc, db)};
}

Outcome ac8_histogram_shift() {
  const Ablation& a = ablation();
  const MultiExitModel& model = a.cosee_models.front();
  const Dataset& tr = a.train.front();
  const Dataset& dev = a.dev.front();
  const auto sig = signals_for_batch(forward_all(model, dev.features), SignalKind::energy_normalized);
  std::string detail;
  bool ok = true;
  for (double target : {1.5, 2.5, 4.0}) {
    const double tau = threshold_for_speedup(sig, target);
    const auto h = exit_histograms(model, tr, dev, SignalKind::energy_normalized, tau);
    const double speed = speedup_ratio(h.counts_b);
    ok = ok && h.tv_distance < 0.2;
    detail += fmt("%stau %.4f (dev speed-up %.2fx) TV %.4f", detail.empty() ? "" : "; ", tau, speed, h.tv_distance);
  }
  return {ok, detail + " (limit 0.2)"};
}

// ---------------------------------------------------------------------------

Outcome ac9_reduction() {
  SyntheticSpec sp;
  sp.n = 600;
  sp.dim = 10;
  const Dataset d = gen_synthetic(sp, 9);
  ModelConfig mc;
  mc.num_layers = 5;
  mc.width = 16;
  mc.input_dim = 10;
  mc.seed = 9;
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 9;
  tc.alpha = 0.0;
  tc.beta0 = 0.0;
  tc.objective = Objective::cosee;
  const auto a = train(init_model(mc), d, tc);
  tc.objective = Objective::conventional_uniform;
  const auto b = train(init_model(mc), d, tc);
  std::size_t differing = a.log.steps.size() == b.log.steps.size() ? 0 : 1;
  for (std::size_t i = 0; i < std::min(a.log.steps.size(), b.log.steps.size()); ++i) {
    differing += !same_bits(a.log.steps[i].loss_total, b.log.steps[i].loss_total);
  }
  std::size_t params_differ = 0;
  for (std::size_t i = 0; i < a.model.parameters().size(); ++i) {
    const auto& x = a.model.parameters()[i].value;
    const auto& y = b.model.parameters()[i].value;
    for (std::size_t j = 0; j < x.size(); ++j) params_differ += !same_bits(x[j], y[j]);
  }
  const bool ok = differing == 0 && params_differ == 0 && !a.log.steps.empty();
  return {ok, fmt("%zu steps compared, %zu loss values differ in any bit; %zu final parameter entries differ",
                  a.log.steps.size(), differing, params_differ)};
}

// ---------------------------------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Outcome ac10_persistence() {
  TempDir dir;
  std::ostringstream sink;
  auto cli_run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "exitnet");
    return cli::run(args, sink, sink);
  };
  bool ok = cli_run({"gen-data", "--n", "500", "--dim", "12", "--data-seed", "10", "--out", dir.file("gen")}) == 0;
  const std::string data = dir.file("gen/data.csv");
  for (const char* o : {"a", "b"}) {
    ok = ok && cli_run({"train", "--data", data, "--num-layers", "4", "--width", "24", "--epochs", "2", "--seed", "10",
                        "--out", dir.file(o)}) == 0;
  }
  // Third run driven only by the resolved config of the first.
  ok = ok && cli_run({"train", "--config", dir.file("a/config.ini"), "--out", dir.file("c")}) == 0;
  const std::string ck = slurp(dir.file("a/model.ckpt"));
  const bool runs_equal = !ck.empty() && ck == slurp(dir.file("b/model.ckpt")) && ck == slurp(dir.file("c/model.ckpt")) &&
                          slurp(dir.file("a/train_log.jsonl")) == slurp(dir.file("b/train_log.jsonl")) &&
                          slurp(dir.file("a/train_log.jsonl")) == slurp(dir.file("c/train_log.jsonl"));

  // Round trip: load, save again, compare bytes and parameter bits.
  bool round_trip = false;
  std::size_t entries = 0;
  if (ok) {
    const auto loaded = load_checkpoint(dir.file("a/model.ckpt"));
    save_checkpoint(dir.file("resaved.ckpt"), loaded.model, loaded.extras);
    const auto again = load_checkpoint(dir.file("resaved.ckpt"));
    round_trip = slurp(dir.file("resaved.ckpt")) == ck && loaded.model.config() == again.model.config();
    for (std::size_t i = 0; i < loaded.model.parameters().size(); ++i) {
      const auto& x = loaded.model.parameters()[i].value;
      const auto& y = again.model.parameters()[i].value;
      for (std::size_t j = 0; j < x.size(); ++j, ++entries) round_trip = round_trip && same_bits(x[j], y[j]);
    }
  }
  return {ok && runs_equal && round_trip,
          fmt("three train runs byte-identical: %s; round trip of %zu parameter entries bit-exact: %s",
              runs_equal ? "yes" : "no", entries, round_trip ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AC1 gradient suite", ac1_gradient},
      {"AC2 sample-weight algebra", ac2_swm_algebra},
      {"AC3 exit-policy oracle", ac3_exit_oracle},
      {"AC4 signal math", ac4_signals},
      {"AC5 threshold monotonicity", ac5_monotone},
      {"AC6 accuracy at matched speed-up", ac6_accuracy_at_speedup},
      {"AC7 premature/delayed exiting", ac7_failure_rates},
      {"AC8 train/dev exit histograms", ac8_histogram_shift},
      {"AC9 reduction identity", ac9_reduction},
      {"AC10 persistence and determinism", ac10_persistence},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}

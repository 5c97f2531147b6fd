#include "exitnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace exitnet {

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("dataset is empty");
  if (features.rank() != 2 || features.rows() != labels.size()) {
    throw std::invalid_argument("dataset features must be N x D with one label per row");
  }
  if (!features.all_finite()) throw std::invalid_argument("dataset contains non-finite features");
  for (int y : labels)
    if (y < 0 || y >= num_classes) {
      throw std::invalid_argument("dataset label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.split = split;
  const std::size_t d = features.cols();
  std::vector<double> data;
  data.reserve(indices.size() * d);
  for (std::size_t i : indices) {
    auto r = row(i);
    data.insert(data.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
  }
  out.features = Tensor(Shape{indices.size(), d}, std::move(data));
  return out;
}

std::string to_string(Generator g) { return g == Generator::gaussian_mixture ? "gaussian_mixture" : "two_spirals"; }

Generator parse_generator(const std::string& s) {
  if (s == "gaussian_mixture") return Generator::gaussian_mixture;
  if (s == "two_spirals") return Generator::two_spirals;
  throw std::invalid_argument("unknown generator '" + s + "' (expected gaussian_mixture or two_spirals)");
}

void SyntheticSpec::validate() const {
  if (n == 0) throw std::invalid_argument("synthetic: n must be positive");
  if (dim < 1) throw std::invalid_argument("synthetic: dim must be positive");
  if (classes < 2) throw std::invalid_argument("synthetic: need at least two classes");
  if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("synthetic: noise must lie in [0, 1]");
  if (!(boundary_fraction >= 0.0 && boundary_fraction <= 1.0)) {
    throw std::invalid_argument("synthetic: boundary fraction must lie in [0, 1]");
  }
  if (!(margin >= 0.0)) throw std::invalid_argument("synthetic: margin must be non-negative");
  if (!(spread > 0.0)) throw std::invalid_argument("synthetic: spread must be positive");
  if (!(separation > 0.0)) throw std::invalid_argument("synthetic: separation must be positive");
  if (components < 1) throw std::invalid_argument("synthetic: components must be positive");
  if (generator == Generator::two_spirals && (classes != 2 || dim < 2)) {
    throw std::invalid_argument("synthetic: two_spirals needs classes = 2 and dim >= 2");
  }
  // Neighbouring arms sit separation/3 apart, so no point is further than
  // separation/6 from the boundary.
  if (generator == Generator::two_spirals && boundary_fraction < 1.0 && margin >= separation / 6.0) {
    throw std::invalid_argument("synthetic: two_spirals margin must be below separation/6");
  }
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

struct Proposal {
  std::vector<double> x;
  int label;
  double margin;
};

class MixtureSampler {
 public:
  MixtureSampler(const SyntheticSpec& spec, std::mt19937_64& rng) : spec_(spec), rng_(rng) {
    std::normal_distribution<double> normal;
    const int total = spec.classes * spec.components;
    for (int j = 0; j < total; ++j) {
      std::vector<double> c(static_cast<std::size_t>(spec.dim));
      double norm = 0.0;
      while (norm < 1e-12) {
        for (double& v : c) v = normal(rng_);
        norm = std::sqrt(std::inner_product(c.begin(), c.end(), c.begin(), 0.0));
      }
      for (double& v : c) v *= spec.separation / norm;
      centers_.push_back(std::move(c));
      labels_.push_back(j % spec.classes);
    }
  }

  Proposal propose() {
    std::uniform_int_distribution<std::size_t> pick(0, centers_.size() - 1);
    std::normal_distribution<double> normal(0.0, spec_.spread);
    const auto& c = centers_[pick(rng_)];
    Proposal p{std::vector<double>(c.size()), 0, 0.0};
    for (std::size_t i = 0; i < c.size(); ++i) p.x[i] = c[i] + normal(rng_);
    p.margin = mixture_margin(p.x, centers_, labels_, &p.label);
    return p;
  }

  const std::vector<std::vector<double>>& centers() const { return centers_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  const SyntheticSpec& spec_;
  std::mt19937_64& rng_;
  std::vector<std::vector<double>> centers_;
  std::vector<int> labels_;
};

class SpiralSampler {
 public:
  static constexpr double kTurns = 1.5;
  static constexpr int kCurvePoints = 1500;

  SpiralSampler(const SyntheticSpec& spec, std::mt19937_64& rng) : spec_(spec), rng_(rng) {
    for (int arm = 0; arm < 2; ++arm) {
      for (int i = 0; i < kCurvePoints; ++i) {
        const double t = static_cast<double>(i) / (kCurvePoints - 1);
        curve_[arm].push_back(point(arm, t));
      }
    }
  }

  Proposal propose() {
    std::uniform_int_distribution<int> arm_dist(0, 1);
    std::uniform_real_distribution<double> t_dist(0.05, 1.0);
    // The 2-D jitter is scaled down so arms stay distinguishable; extra
    // dimensions carry pure nuisance noise.
    std::normal_distribution<double> jitter(0.0, spec_.spread * 0.15 * spec_.separation / 3.0);
    std::normal_distribution<double> nuisance(0.0, spec_.spread);
    const auto base = point(arm_dist(rng_), std::sqrt(t_dist(rng_)));
    Proposal p{std::vector<double>(static_cast<std::size_t>(spec_.dim)), 0, 0.0};
    p.x[0] = base[0] + jitter(rng_);
    p.x[1] = base[1] + jitter(rng_);
    for (std::size_t i = 2; i < p.x.size(); ++i) p.x[i] = nuisance(rng_);
    double d[2];
    for (int arm = 0; arm < 2; ++arm) {
      d[arm] = std::numeric_limits<double>::infinity();
      for (const auto& q : curve_[arm]) {
        d[arm] = std::min(d[arm], std::hypot(p.x[0] - q[0], p.x[1] - q[1]));
      }
    }
    p.label = d[0] <= d[1] ? 0 : 1;
    p.margin = std::abs(d[0] - d[1]) / 2.0;
    return p;
  }

 private:
  std::array<double, 2> point(int arm, double t) const {
    const double theta = t * kTurns * 2.0 * std::numbers::pi + arm * std::numbers::pi;
    const double r = t * spec_.separation;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  const SyntheticSpec& spec_;
  std::mt19937_64& rng_;
  std::array<std::vector<std::array<double, 2>>, 2> curve_;
};

template <typename Sampler>
Dataset draw(const SyntheticSpec& spec, Sampler& sampler, std::mt19937_64& rng, SyntheticInfo* info) {
  std::bernoulli_distribution want_hard(spec.boundary_fraction);
  std::bernoulli_distribution flip(spec.noise);
  std::uniform_int_distribution<int> other(1, spec.classes - 1);
  constexpr int kMaxAttempts = 100000;
  Dataset out;
  out.num_classes = spec.classes;
  std::vector<double> features;
  features.reserve(spec.n * static_cast<std::size_t>(spec.dim));
  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool hard = want_hard(rng);
    Proposal p;
    int attempts = 0;
    do {
      if (++attempts > kMaxAttempts) {
        throw std::invalid_argument("synthetic: cannot draw samples with the requested boundary fraction and margin");
      }
      p = sampler.propose();
    } while ((p.margin < spec.margin) != hard);
    int label = p.label;
    if (flip(rng)) label = (label + other(rng)) % spec.classes;
    features.insert(features.end(), p.x.begin(), p.x.end());
    out.labels.push_back(label);
    if (info != nullptr) info->margins.push_back(p.margin);
  }
  out.features = Tensor(Shape{spec.n, static_cast<std::size_t>(spec.dim)}, std::move(features));
  return out;
}

}  // namespace

double mixture_margin(std::span<const double> x, const std::vector<std::vector<double>>& centers,
                      const std::vector<int>& center_labels, int* label) {
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const double d = squared_distance(x, centers[j]);
    if (d < best) {
      best = d;
      nearest = j;
    }
  }
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.size(); ++j) {
    if (center_labels[j] == center_labels[nearest]) continue;
    const double gap = std::sqrt(squared_distance(centers[j], centers[nearest]));
    margin = std::min(margin, (squared_distance(x, centers[j]) - best) / (2.0 * gap));
  }
  if (label != nullptr) *label = center_labels[nearest];
  return margin;
}

Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed, SyntheticInfo* info) {
  spec.validate();
  std::mt19937_64 rng(seed);
  if (info != nullptr) *info = SyntheticInfo{};
  Dataset out;
  if (spec.generator == Generator::gaussian_mixture) {
    MixtureSampler sampler(spec, rng);
    if (info != nullptr) {
      info->centers = sampler.centers();
      info->center_labels = sampler.labels();
    }
    out = draw(spec, sampler, rng, info);
  } else {
    SpiralSampler sampler(spec, rng);
    out = draw(spec, sampler, rng, info);
  }
  out.split = "all";
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double dev_fraction, std::uint64_t seed) {
  if (!(dev_fraction >= 0.0 && dev_fraction <= 1.0)) throw std::invalid_argument("split: dev fraction must lie in [0, 1]");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> dev(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_dev));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_dev), idx.end());
  std::sort(dev.begin(), dev.end());
  std::sort(train.begin(), train.end());
  auto tr = data.subset(train);
  auto dv = data.subset(dev);
  tr.split = "train";
  dv.split = "dev";
  return {std::move(tr), std::move(dv)};
}

DataFormat parse_format(const std::string& s) {
  if (s == "csv_numeric" || s == "csv") return DataFormat::csv_numeric;
  if (s == "jsonl_text" || s == "jsonl") return DataFormat::jsonl_text;
  throw std::invalid_argument("unknown data format '" + s + "' (expected csv_numeric or jsonl_text)");
}

std::string to_string(DataFormat f) { return f == DataFormat::csv_numeric ? "csv_numeric" : "jsonl_text"; }

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

[[noreturn]] void malformed(const std::string& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

int finish_classes(const std::vector<int>& labels, int min_classes) {
  const int mx = *std::max_element(labels.begin(), labels.end());
  return std::max({mx + 1, min_classes, 2});
}

Dataset load_csv(const std::string& path, std::ifstream& in, int min_classes) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<double> features;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() < 2) malformed(path, line_no, "expected at least one feature and a label");
    double probe = 0.0;
    if (labels.empty() && width == 0 && !parse_double(fields[0], probe)) {
      if (trim(fields.back()) != "label") malformed(path, line_no, "header must end with 'label'");
      width = fields.size() - 1;
      continue;
    }
    if (width == 0) width = fields.size() - 1;
    if (fields.size() - 1 != width) {
      malformed(path, line_no, "expected " + std::to_string(width + 1) + " columns, got " + std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < width; ++i) {
      double v = 0.0;
      if (!parse_double(fields[i], v)) malformed(path, line_no, "column " + std::to_string(i) + " is not a finite number");
      features.push_back(v);
    }
    double lv = 0.0;
    if (!parse_double(fields.back(), lv) || lv != std::floor(lv) || lv < 0.0) {
      malformed(path, line_no, "label must be a non-negative integer");
    }
    labels.push_back(static_cast<int>(lv));
  }
  if (labels.empty()) throw std::runtime_error(path + ": empty file");
  Dataset out;
  out.features = Tensor(Shape{labels.size(), width}, std::move(features));
  out.num_classes = finish_classes(labels, min_classes);
  out.labels = std::move(labels);
  return out;
}

Dataset load_jsonl(const std::string& path, std::ifstream& in, const TextHashing& hashing, int min_classes) {
  if (hashing.dim == 0) throw std::invalid_argument("text hashing dimension must be positive");
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> features;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      malformed(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string() || !rec.contains("label") ||
        !rec["label"].is_number_integer() || rec["label"].get<long long>() < 0) {
      malformed(path, line_no, "expected {\"text\": string, \"label\": non-negative int}");
    }
    const auto v = hash_text_features(rec["text"].get<std::string>(), hashing.dim, hashing.seed);
    features.insert(features.end(), v.begin(), v.end());
    labels.push_back(rec["label"].get<int>());
  }
  if (labels.empty()) throw std::runtime_error(path + ": empty file");
  Dataset out;
  out.features = Tensor(Shape{labels.size(), hashing.dim}, std::move(features));
  out.num_classes = finish_classes(labels, min_classes);
  out.labels = std::move(labels);
  return out;
}

}  // namespace

Dataset load_dataset(const std::string& path, DataFormat format, const TextHashing& hashing, int min_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  Dataset out = format == DataFormat::csv_numeric ? load_csv(path, in, min_classes)
                                                  : load_jsonl(path, in, hashing, min_classes);
  out.validate();
  return out;
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (int j = 0; j < data.dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t n = 0; n < data.size(); ++n) {
    for (double v : data.row(n)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << data.labels[n] << '\n';
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t hash_token(std::string_view token, std::uint64_t seed) {
  // FNV-1a over the bytes, seeded through the offset basis, then a splitmix
  // finalizer so both the low bits (bucket) and the top bit (sign) mix well.
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

std::vector<double> hash_text_features(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("text hashing dimension must be positive");
  std::vector<double> v(dim, 0.0);
  const auto tokens = tokenize(text);
  const auto bump = [&](const std::string& feature) {
    const std::uint64_t h = hash_token(feature, seed);
    v[h % dim] += (h >> 63) != 0 ? -1.0 : 1.0;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    bump(tokens[i]);
    if (i + 1 < tokens.size()) bump(tokens[i] + " " + tokens[i + 1]);
  }
  const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (norm > 0.0)
    for (double& x : v) x /= norm;
  return v;
}

}  // namespace exitnet

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "exitnet/tensor.hpp"

namespace exitnet {

struct Dataset {
  Tensor features;  // N×D
  std::vector<int> labels;
  int num_classes = 2;
  std::string split;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
  std::span<const double> row(std::size_t n) const { return features.row(n); }

  // Throws unless N >= 1, features are finite and labels lie in [0, C).
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

enum class Generator { gaussian_mixture, two_spirals };

std::string to_string(Generator g);
Generator parse_generator(const std::string& s);

// Desk-scale stand-in for a task mixing easy and hard samples. A sample is
// "hard" when it lies within `margin` of the true class boundary; a
// `boundary_fraction` share of samples is drawn from that band.
struct SyntheticSpec {
  Generator generator = Generator::gaussian_mixture;
  std::size_t n = 1000;
  int dim = 16;
  int classes = 2;
  double noise = 0.0;  // label flip probability
  double boundary_fraction = 0.3;
  double margin = 0.5;
  double spread = 1.0;      // within-component standard deviation
  double separation = 3.0;  // distance of component centres from the origin
  int components = 2;       // mixture components per class

  void validate() const;
};

struct SyntheticInfo {
  std::vector<std::vector<double>> centers;  // gaussian_mixture only
  std::vector<int> center_labels;
  std::vector<double> margins;  // per sample, distance to the class boundary
};

Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed, SyntheticInfo* info = nullptr);

// Distance from x to the nearest bisector between its nearest centre and any
// centre of another class.
double mixture_margin(std::span<const double> x, const std::vector<std::vector<double>>& centers,
                      const std::vector<int>& center_labels, int* label = nullptr);

// Random partition; dev receives round(N * dev_fraction) samples.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double dev_fraction, std::uint64_t seed);

enum class DataFormat { csv_numeric, jsonl_text };

DataFormat parse_format(const std::string& s);
std::string to_string(DataFormat f);

struct TextHashing {
  std::size_t dim = 256;
  std::uint64_t seed = 0;
};

// csv_numeric: rows f0..fD-1,label with an optional header row.
// jsonl_text: {"text": ..., "label": ...} per line, featurized by hashing.
// num_classes is max(label)+1 (at least 2) unless min_classes is larger.
Dataset load_dataset(const std::string& path, DataFormat format, const TextHashing& hashing = {}, int min_classes = 2);

void save_csv(const std::string& path, const Dataset& data);

std::vector<std::string> tokenize(std::string_view text);
std::uint64_t hash_token(std::string_view token, std::uint64_t seed);
// Signed-count hashing of lowercase unigrams and bigrams, L2-normalised.
std::vector<double> hash_text_features(std::string_view text, std::size_t dim, std::uint64_t seed);

}  // namespace exitnet

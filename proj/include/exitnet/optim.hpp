#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "exitnet/autodiff.hpp"

namespace exitnet {

struct AdamWHyper {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::uint64_t total_steps = 1;

  void validate() const;
};

struct AdamWState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

// One decoupled-weight-decay Adam update with bias-corrected moments.
// Moments are created lazily on the first call. Throws on shape mismatch.
void adamw_step(std::span<Parameter> params, AdamWState& state, const AdamWHyper& hyper, double lr);

// Linear decay: base * (1 - step / total).
double lr_at(std::uint64_t step, std::uint64_t total, double base);

}  // namespace exitnet

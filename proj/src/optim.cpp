#include "exitnet/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace exitnet {

void AdamWHyper::validate() const {
  if (!(base_lr > 0.0)) throw std::invalid_argument("adamw: base learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("adamw: betas must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("adamw: epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("adamw: weight decay must be non-negative");
  if (total_steps == 0) throw std::invalid_argument("adamw: total steps must be positive");
}

void adamw_step(std::span<Parameter> params, AdamWState& state, const AdamWHyper& hyper, double lr) {
  if (lr < 0.0) throw std::invalid_argument("adamw: negative learning rate");
  if (state.first_moment.empty() && state.second_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.value.shape());
      state.second_moment.emplace_back(p.value.shape());
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adamw: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.grad.shape() != p.value.shape() || state.first_moment[i].shape() != p.value.shape() ||
        state.second_moment[i].shape() != p.value.shape()) {
      throw std::invalid_argument("adamw: shape mismatch for parameter '" + p.name + "'");
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  const double decay = 1.0 - lr * hyper.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.data();
    auto g = params[i].grad.data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g[k];
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      w[k] = w[k] * decay - lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

double lr_at(std::uint64_t step, std::uint64_t total, double base) {
  if (total == 0) throw std::invalid_argument("lr_at: total steps must be positive");
  if (step > total) {
    throw std::invalid_argument("lr_at: step " + std::to_string(step) + " exceeds total " + std::to_string(total));
  }
  return base * (1.0 - static_cast<double>(step) / static_cast<double>(total));
}

}  // namespace exitnet

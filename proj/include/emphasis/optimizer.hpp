#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emphasis/errors.hpp"

namespace emphasis {

enum class OptimizerKind { adam, momentum_sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;     // adam first-moment decay
  double beta2 = 0.999;   // adam second-moment decay
  double epsilon = 1e-8;
  double momentum = 0.9;  // momentum_sgd only
};

/// Per-parameter moment buffers. Lazily sized on the first step.
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// One first-order update in place. A non-finite gradient entry refuses the
/// step and leaves params and state untouched.
inline void optimizer_step(std::span<double> params, std::span<const double> grad, const OptimizerConfig& cfg,
                           OptimizerState& state) {
  if (params.size() != grad.size()) {
    throw ArgumentError("optimizer_step: " + std::to_string(grad.size()) + " gradient entries for " +
                        std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) throw NumericError("non-finite gradient at index " + std::to_string(i));
  }
  if (state.m.size() != params.size()) {
    if (state.step != 0) throw ArgumentError("optimizer_step: state belongs to a different parameter set");
    state.m.assign(params.size(), 0.0);
    if (cfg.kind == OptimizerKind::adam) state.v.assign(params.size(), 0.0);
  }
  ++state.step;

  if (cfg.kind == OptimizerKind::momentum_sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i] = cfg.momentum * state.m[i] + grad[i];
      params[i] -= cfg.lr * state.m[i];
    }
    return;
  }

  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace emphasis

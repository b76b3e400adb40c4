#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "emphasis/errors.hpp"
#include "emphasis/model.hpp"

namespace emphasis {

/// Loss value and its gradient with respect to each token logit.
struct LossOutput {
  double value = 0.0;
  std::vector<double> grad;
};

/// -log(sigmoid(x)) = log(1 + exp(-x)), without overflow for large |x|.
inline double neg_log_sigmoid(double x) noexcept {
  if (x > 0.0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

namespace detail {

inline void check_lengths(const char* op, std::size_t logits, std::size_t targets) {
  if (logits != targets) {
    throw ArgumentError(std::string(op) + ": " + std::to_string(logits) + " logits but " + std::to_string(targets) +
                        " targets");
  }
  if (logits == 0) throw ArgumentError(std::string(op) + ": empty sequence");
}

}  // namespace detail

/// Mean squared error between sigmoid(logit) and target; gradient is taken
/// through the sigmoid.
inline LossOutput mse_loss(std::span<const double> logits, std::span<const double> targets) {
  detail::check_lengths("mse_loss", logits.size(), targets.size());
  const double n = static_cast<double>(logits.size());
  LossOutput out;
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = bounded_sigmoid(logits[i]);
    const double diff = p - targets[i];
    out.value += diff * diff;
    out.grad[i] = 2.0 * diff * p * (1.0 - p) / n;
  }
  out.value /= n;
  return out;
}

/// Gap-weighted pairwise logistic loss on raw logits:
///   J = 1/N^2 * sum_i sum_j max(t_i - t_j, 0) * -log sigmoid(s_i - s_j)
/// Only pairs with t_i > t_j are visited; the skipped terms are exactly zero.
inline LossOutput pairwise_loss(std::span<const double> logits, std::span<const double> targets) {
  detail::check_lengths("pairwise_loss", logits.size(), targets.size());
  const std::size_t n = logits.size();
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  LossOutput out;
  out.grad.assign(n, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double gap = targets[i] - targets[j];
      if (!(gap > 0.0)) continue;
      const double diff = logits[i] - logits[j];
      sum += gap * neg_log_sigmoid(diff);
      // d/d diff of -log sigmoid(diff) is -sigmoid(-diff)
      const double g = gap * sigmoid(-diff) * norm;
      out.grad[i] -= g;
      out.grad[j] += g;
    }
  }
  out.value = sum * norm;
  return out;
}

/// Reference form visiting all N^2 ordered pairs, including zero-weight ones.
inline LossOutput pairwise_loss_full(std::span<const double> logits, std::span<const double> targets) {
  detail::check_lengths("pairwise_loss", logits.size(), targets.size());
  const std::size_t n = logits.size();
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  LossOutput out;
  out.grad.assign(n, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double weight = std::max(targets[i] - targets[j], 0.0);
      const double diff = logits[i] - logits[j];
      sum += weight * neg_log_sigmoid(diff);
      const double g = weight * sigmoid(-diff) * norm;
      out.grad[i] -= g;
      out.grad[j] += g;
    }
  }
  out.value = sum * norm;
  return out;
}

/// mse + lambda_pair * pairwise. lambda_pair == 0 skips the pairwise pass.
inline LossOutput combined_loss(std::span<const double> logits, std::span<const double> targets, double lambda_pair) {
  if (!(lambda_pair >= 0.0) || !std::isfinite(lambda_pair)) {
    throw ArgumentError("combined_loss: lambda_pair must be a finite non-negative number");
  }
  LossOutput out = mse_loss(logits, targets);
  if (lambda_pair == 0.0) return out;
  const LossOutput pair = pairwise_loss(logits, targets);
  out.value += lambda_pair * pair.value;
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += lambda_pair * pair.grad[i];
  return out;
}

inline LossOutput mse_loss(const Prediction& pred, std::span<const double> targets) {
  return mse_loss(pred.logits, targets);
}
inline LossOutput pairwise_loss(const Prediction& pred, std::span<const double> targets) {
  return pairwise_loss(pred.logits, targets);
}
inline LossOutput combined_loss(const Prediction& pred, std::span<const double> targets, double lambda_pair) {
  return combined_loss(pred.logits, targets, lambda_pair);
}

}  // namespace emphasis

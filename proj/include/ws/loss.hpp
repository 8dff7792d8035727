#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ws/tensor.hpp"

namespace ws::nn {

inline constexpr double kLogClamp = 1e-12;

// Weighted categorical cross-entropy over post-softmax probabilities:
// −Σᵢ wᵢ·log pᵢ[yᵢ] / Σᵢ wᵢ, with the log argument clamped at 1e-12.
inline Tensor weighted_cross_entropy(const Tensor& probs, const std::vector<int>& targets,
                                     const std::vector<double>& weights) {
  if (probs.ndim() != 2) throw std::invalid_argument("weighted_cross_entropy: expected [batch, classes]");
  const int B = probs.dim(0), C = probs.dim(1);
  if (static_cast<int>(targets.size()) != B || static_cast<int>(weights.size()) != B) {
    throw std::invalid_argument("weighted_cross_entropy: batch " + std::to_string(B) + " vs " +
                                std::to_string(targets.size()) + " targets, " +
                                std::to_string(weights.size()) + " weights");
  }
  double total_weight = 0.0;
  for (int i = 0; i < B; ++i) {
    if (targets[i] < 0 || targets[i] >= C) {
      throw std::invalid_argument("weighted_cross_entropy: target " + std::to_string(targets[i]) +
                                  " outside [0," + std::to_string(C) + ") at sample " +
                                  std::to_string(i));
    }
    if (weights[i] < 0.0) {
      throw std::invalid_argument("weighted_cross_entropy: negative weight at sample " +
                                  std::to_string(i));
    }
    total_weight += weights[i];
  }
  if (total_weight <= 0.0) throw std::invalid_argument("weighted_cross_entropy: zero total weight");

  const auto& pv = probs.value();
  double loss = 0.0;
  for (int i = 0; i < B; ++i) {
    const double p = pv[static_cast<size_t>(i) * C + targets[i]];
    loss -= weights[i] * std::log(std::max(p, kLogClamp));
  }
  loss /= total_weight;

  auto pn = probs.node();
  return make_op({1}, {loss}, {probs},
                 [pn, targets, weights, total_weight, B, C](Node& self) {
                   pn->ensure_grad();
                   const double g = self.grad[0] / total_weight;
                   for (int i = 0; i < B; ++i) {
                     const size_t idx = static_cast<size_t>(i) * C + targets[i];
                     const double p = pn->value[idx];
                     if (p > kLogClamp) pn->grad[idx] -= g * weights[i] / p;
                   }
                 });
}

}  // namespace ws::nn

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ws/tensor.hpp"

namespace ws::nn {

// Staircase learning-rate decay: lr(step) = initial · rate^⌊step/interval⌋,
// where a step is one optimizer update.
struct LrSchedule {
  double initial = 1e-4;
  double decay_rate = 0.5;
  int decay_steps = 200;
  bool staircase = true;
};

inline double lr_at(const LrSchedule& sched, int64_t step) {
  if (step < 0) throw std::invalid_argument("lr_at: negative step");
  if (sched.initial <= 0.0 || sched.decay_steps <= 0) {
    throw std::invalid_argument("lr_at: schedule requires positive initial lr and decay interval");
  }
  const double exponent = sched.staircase
                              ? static_cast<double>(step / sched.decay_steps)
                              : static_cast<double>(step) / sched.decay_steps;
  return sched.initial * std::pow(sched.decay_rate, exponent);
}

// Adam with bias correction. Moment buffers mirror each parameter and the
// step counter is shared across the whole parameter group.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  void reset(const std::vector<Tensor>& params) {
    step = 0;
    m.assign(params.size(), {});
    v.assign(params.size(), {});
    for (size_t i = 0; i < params.size(); ++i) {
      m[i].assign(params[i].numel(), 0.0);
      v[i].assign(params[i].numel(), 0.0);
    }
  }
};

inline void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: state not initialized for this parameter group");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& node = *params[i].node();
    if (node.grad.size() != node.value.size()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) + " of shape " +
                                  shape_str(node.shape) + " has no gradient");
    }
    auto& mi = state.m[i];
    auto& vi = state.v[i];
    if (mi.size() != node.value.size()) {
      throw std::invalid_argument("adam_step: moment shape mismatch at parameter " +
                                  std::to_string(i));
    }
    for (size_t j = 0; j < node.value.size(); ++j) {
      const double g = node.grad[j];
      mi[j] = state.beta1 * mi[j] + (1.0 - state.beta1) * g;
      vi[j] = state.beta2 * vi[j] + (1.0 - state.beta2) * g * g;
      const double mhat = mi[j] / bc1;
      const double vhat = vi[j] / bc2;
      node.value[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace ws::nn

#pragma once

#include <cmath>

#include "damext/network.hpp"

namespace damext {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Standard Adam with bias correction. step_index is 1-based. Any schedule
/// (e.g. polynomial decay) is applied by the caller through lr.
template <class S>
void adam_step(ParamStore<S>& params, double lr, long step_index, const AdamConfig& cfg = {}) {
  if (step_index < 1) throw ConfigError("adam_step: step_index must be >= 1");
  if (!params.grads_finite()) throw NumericError("adam_step: non-finite gradient");

  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_index));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_index));
  for (auto& p : params.entries) {
    p.m = static_cast<S>(cfg.beta1) * p.m + static_cast<S>(1.0 - cfg.beta1) * p.grad;
    p.v.array() = static_cast<S>(cfg.beta2) * p.v.array() +
                  static_cast<S>(1.0 - cfg.beta2) * p.grad.array().square();
    p.value.array() -= static_cast<S>(lr) * (p.m.array() / static_cast<S>(bc1)) /
                       ((p.v.array() / static_cast<S>(bc2)).sqrt() + static_cast<S>(cfg.eps));
  }
}

/// lr(step) = base · (1 - step/total)^power, step in [0, total).
inline double poly_decay(double base_lr, long step, long total_steps, double power = 0.9) {
  if (total_steps < 1) throw ConfigError("poly_decay: total_steps must be >= 1");
  if (step < 0 || step >= total_steps) throw ConfigError("poly_decay: step out of range");
  const double remain = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * std::pow(remain, power);
}

}  // namespace damext

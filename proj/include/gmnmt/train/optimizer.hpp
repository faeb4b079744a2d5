#pragma once

#include <vector>

#include "gmnmt/model/parameters.hpp"

namespace gmnmt {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

/// Inverse-square-root schedule with linear warmup:
/// d_model^-0.5 * min(step^-0.5, step * warmup^-1.5). `step` starts at 1.
double lr_schedule(std::size_t step, std::size_t d_model, std::size_t warmup);

/// Bias-corrected Adam over every tensor in a ParameterStore.
class Adam {
 public:
  Adam(ParameterStore& store, AdamConfig config = {});

  /// Applies one update from the accumulated gradients.
  void step(double lr);
  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

  /// Moment buffers in store order, for checkpointing.
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore(std::size_t steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

 private:
  ParameterStore& store_;
  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterStore& store, double max_norm);

}  // namespace gmnmt

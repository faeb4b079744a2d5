#include "gmnmt/train/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

double lr_schedule(std::size_t step, std::size_t d_model, std::size_t warmup) {
  if (step < 1) throw UsageError("learning-rate schedule starts at step 1");
  if (warmup < 1) throw ConfigError("warmup_steps must be at least 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return std::pow(static_cast<double>(d_model), -0.5) * std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

Adam::Adam(ParameterStore& store, AdamConfig config) : store_(store), config_(config) {
  for (const auto& p : store_.entries()) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  auto& entries = store_.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto data = entries[k].tensor.mutable_data();
    const auto grad = entries[k].tensor.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      data[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

void Adam::restore(std::size_t steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
  const auto& entries = store_.entries();
  if (m.size() != entries.size() || v.size() != entries.size())
    throw DataError("optimizer state covers " + std::to_string(m.size()) + " tensors, model has " +
                    std::to_string(entries.size()));
  for (std::size_t k = 0; k < entries.size(); ++k)
    if (m[k].size() != entries[k].tensor.numel() || v[k].size() != entries[k].tensor.numel())
      throw DataError("optimizer state size mismatch for " + entries[k].name);
  step_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

double clip_grad_norm(ParameterStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& p : store.entries())
    for (double g : p.tensor.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : store.entries())
      for (double& g : p.tensor.mutable_grad()) g *= s;
  }
  return norm;
}

}  // namespace gmnmt

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gmnmt/model/model.hpp"
#include "gmnmt/train/batching.hpp"
#include "gmnmt/train/optimizer.hpp"

namespace gmnmt {

struct TrainConfig {
  std::size_t batch_tokens = 2000;
  std::size_t warmup_steps = 4000;
  AdamConfig adam;
  std::uint64_t seed = 1;
  std::size_t max_steps = 10000;
  /// 0 disables periodic checkpoints.
  std::size_t checkpoint_every = 0;
  /// Multiplies the scheduled learning rate.
  double lr_scale = 1.0;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 0.0;

  void validate() const;
};

struct StepLog {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  /// Called every `checkpoint_every` steps and after the final step.
  std::function<void(std::size_t step)> on_checkpoint;
};

/// Mean token NLL of one batch (teacher forcing, PAD positions excluded).
Tensor batch_loss(ForwardContext& ctx, const Model& model, const std::vector<Example>& examples, const Batch& batch);

/// Eval-mode mean token NLL over a dataset.
double evaluate_loss(const Model& model, const std::vector<Example>& examples, std::size_t batch_tokens = 2000);

/// Human-readable dump of a batch for diagnostics.
std::string describe_batch(const std::vector<Example>& examples, const Batch& batch);

/// Runs `config.max_steps` optimizer steps over repeated epochs. Dropout and
/// batching draw from RNGs derived from `config.seed` only, so a run is
/// reproducible bit for bit. A non-finite loss throws NumericalError whose
/// message carries the offending batch.
std::vector<StepLog> train(Model& model, Adam& optimizer, const std::vector<Example>& examples,
                           const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace gmnmt

#include "gmnmt/train/trainer.hpp"

#include <cmath>
#include <sstream>

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

void TrainConfig::validate() const {
  if (batch_tokens < 1) throw ConfigError("batch_tokens must be positive");
  if (warmup_steps < 1) throw ConfigError("warmup_steps must be at least 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0,1)");
  if (!(adam.eps > 0.0)) throw ConfigError("Adam eps must be positive");
  if (!(lr_scale > 0.0)) throw ConfigError("lr_scale must be positive");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
}

Tensor batch_loss(ForwardContext& ctx, const Model& model, const std::vector<Example>& examples, const Batch& batch) {
  std::vector<Tensor> parts;
  std::vector<std::int32_t> gold;
  std::vector<std::uint8_t> mask;
  const std::size_t steps = batch.target_width - 1;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const Example& ex = examples[batch.indices[r]];
    parts.push_back(model.target_log_probs(ctx, ex.graph, ex.target));
    for (std::size_t t = 1; t <= steps; ++t) {
      gold.push_back(batch.target[r * batch.target_width + t]);
      mask.push_back(batch.target_mask[r * batch.target_width + t]);
    }
  }
  return ops::nll_loss(ctx.tape, ops::stack_padded(ctx.tape, parts, steps), gold, mask);
}

double evaluate_loss(const Model& model, const std::vector<Example>& examples, std::size_t batch_tokens) {
  if (examples.empty()) throw DataError("cannot evaluate on an empty dataset");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const Batch& b : make_batches(examples, batch_tokens, 0)) {
    Tape tape(false);
    ForwardContext ctx{tape};
    std::size_t n = 0;
    for (std::size_t r = 0; r < b.size(); ++r) n += examples[b.indices[r]].target.size() - 1;
    total += batch_loss(ctx, model, examples, b).item() * static_cast<double>(n);
    tokens += n;
  }
  return total / static_cast<double>(tokens);
}

std::string describe_batch(const std::vector<Example>& examples, const Batch& batch) {
  std::ostringstream out;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const Example& ex = examples[batch.indices[r]];
    out << "example " << batch.indices[r] << ": src";
    for (TokenId t : ex.graph.textual_nodes()) out << ' ' << t;
    out << " | tgt";
    for (TokenId t : ex.target) out << ' ' << t;
    out << " | objects " << ex.graph.visual_size() << " edges " << ex.graph.edges().size();
    bool finite = true;
    for (double f : ex.graph.visual_features()) finite = finite && std::isfinite(f);
    if (!finite) out << " (non-finite features)";
    out << '\n';
  }
  return out.str();
}

std::vector<StepLog> train(Model& model, Adam& optimizer, const std::vector<Example>& examples,
                           const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (examples.empty()) throw DataError("training set is empty");
  Rng dropout_rng(config.seed);
  std::vector<StepLog> log;
  std::size_t epoch = 0;
  std::vector<Batch> batches;
  std::size_t next_batch = 0;
  const std::size_t d_model = model.config().encoder.d_model;

  while (optimizer.steps() < config.max_steps) {
    if (next_batch == batches.size()) {
      batches = make_batches(examples, config.batch_tokens, config.seed * 1000003ULL + epoch++);
      next_batch = 0;
    }
    const Batch& batch = batches[next_batch++];
    model.parameters().zero_grad();
    Tape tape;
    ForwardContext ctx{tape, Mode::Train, &dropout_rng};
    const Tensor loss = batch_loss(ctx, model, examples, batch);
    if (!std::isfinite(loss.item()))
      throw NumericalError("non-finite loss at step " + std::to_string(optimizer.steps() + 1) + "\n" +
                           describe_batch(examples, batch));
    tape.backward(loss);
    if (config.clip_norm > 0.0) clip_grad_norm(model.parameters(), config.clip_norm);

    const std::size_t step = optimizer.steps() + 1;
    const double lr = config.lr_scale * lr_schedule(step, d_model, config.warmup_steps);
    optimizer.step(lr);
    const StepLog entry{step, lr, loss.item()};
    log.push_back(entry);
    if (hooks.on_step) hooks.on_step(entry);
    const bool last = optimizer.steps() == config.max_steps;
    if (hooks.on_checkpoint && (last || (config.checkpoint_every > 0 && step % config.checkpoint_every == 0)))
      hooks.on_checkpoint(step);
  }
  return log;
}

}  // namespace gmnmt

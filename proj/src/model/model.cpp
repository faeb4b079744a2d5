#include "gmnmt/model/model.hpp"

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

Model::Model(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  Rng rng(init_seed);
  encoder_ = make_encoder_weights(store_, config_.encoder, config_.source_vocab, rng);
  decoder_ = make_decoder_weights(store_, config_.decoder, config_.target_vocab, rng);
}

EncoderOutput Model::encode(ForwardContext& ctx, const MultiModalGraph& graph, EncoderTrace* trace) const {
  return gmnmt::encode(ctx, graph, encoder_, config_.encoder, trace);
}

Tensor Model::logits(ForwardContext& ctx, const EncoderOutput& encoded, std::span<const TokenId> prefix) const {
  return generator_logits(ctx, decode_states(ctx, prefix, encoded, decoder_, config_.decoder), decoder_);
}

Tensor Model::target_log_probs(ForwardContext& ctx, const MultiModalGraph& graph,
                               std::span<const TokenId> target) const {
  if (target.size() < 2) throw DataError("target needs <s> and at least one more token");
  const EncoderOutput encoded = encode(ctx, graph);
  return ops::log_softmax(ctx.tape, logits(ctx, encoded, target.first(target.size() - 1)));
}

std::vector<double> Model::score_target(const MultiModalGraph& graph, std::span<const TokenId> target) const {
  Tape tape(false);
  ForwardContext ctx{tape};
  const Tensor lp = target_log_probs(ctx, graph, target);
  const std::size_t v = lp.dim(1);
  std::vector<double> out;
  for (std::size_t t = 0; t + 1 < target.size(); ++t) {
    const TokenId next = target[t + 1];
    if (next < 0 || static_cast<std::size_t>(next) >= v) throw DataError("target id outside vocabulary");
    out.push_back(lp.data()[t * v + static_cast<std::size_t>(next)]);
  }
  return out;
}

}  // namespace gmnmt

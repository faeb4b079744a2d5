#pragma once

#include <span>
#include <vector>

#include "gmnmt/graph/vocabulary.hpp"
#include "gmnmt/model/attention.hpp"
#include "gmnmt/model/config.hpp"
#include "gmnmt/model/encoder.hpp"
#include "gmnmt/model/parameters.hpp"

namespace gmnmt {

struct DecoderLayerWeights {
  AttentionWeights self_attn;
  NormWeights self_norm;
  /// Cross-attention over H_x (textual, both) or H_o (visual).
  AttentionWeights cross_attn;
  /// Second cross-attention over H_o, only in the `both` mode.
  AttentionWeights cross_visual_attn;
  NormWeights cross_norm;
  FeedForwardWeights ffn;
  NormWeights ffn_norm;
};

struct DecoderWeights {
  Tensor embedding;  // [target_vocab x d_model]
  std::vector<DecoderLayerWeights> layers;
  Tensor out_w;  // [d_model x target_vocab]
  Tensor out_b;  // [target_vocab]
};

/// Registers and initializes decoder parameters under the "dec." prefix.
DecoderWeights make_decoder_weights(ParameterStore& store, const DecoderConfig& config, std::size_t target_vocab,
                                    Rng& rng);

/// Final decoder states S for a BOS-initial prefix, one row per position.
/// Self-attention is causal, so row k depends only on prefix[0..k].
Tensor decode_states(ForwardContext& ctx, std::span<const TokenId> prefix, const EncoderOutput& encoded,
                     const DecoderWeights& weights, const DecoderConfig& config);

/// S W + b, [t x target_vocab].
Tensor generator_logits(ForwardContext& ctx, const Tensor& states, const DecoderWeights& weights);

/// softmax(W s + b) for a single state row.
std::vector<double> generate_distribution(std::span<const double> state, const DecoderWeights& weights);

}  // namespace gmnmt

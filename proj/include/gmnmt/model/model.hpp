#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gmnmt/model/decoder.hpp"
#include "gmnmt/model/encoder.hpp"

namespace gmnmt {

/// Encoder, decoder and their parameter registry.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t init_seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const EncoderWeights& encoder_weights() const { return encoder_; }
  const DecoderWeights& decoder_weights() const { return decoder_; }

  EncoderOutput encode(ForwardContext& ctx, const MultiModalGraph& graph, EncoderTrace* trace = nullptr) const;
  /// Generator logits [prefix x target_vocab] for a BOS-initial prefix.
  Tensor logits(ForwardContext& ctx, const EncoderOutput& encoded, std::span<const TokenId> prefix) const;
  /// Teacher-forced log-probabilities [len-1 x target_vocab] for target = <s> ... </s>;
  /// row t predicts target[t+1].
  Tensor target_log_probs(ForwardContext& ctx, const MultiModalGraph& graph, std::span<const TokenId> target) const;
  /// Eval-mode log P(target[t+1] | target[..t]) for every position.
  std::vector<double> score_target(const MultiModalGraph& graph, std::span<const TokenId> target) const;

 private:
  ModelConfig config_;
  ParameterStore store_;
  EncoderWeights encoder_;
  DecoderWeights decoder_;
};

}  // namespace gmnmt

#include "gmnmt/model/decoder.hpp"

#include <cmath>

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

namespace {

Tensor xavier(ParameterStore& store, const std::string& name, Shape shape, Rng& rng) {
  Tensor t = store.create(name, std::move(shape));
  init_xavier_uniform(t, rng);
  return t;
}

AttentionWeights attention_param(ParameterStore& store, const std::string& prefix, std::size_t d, Rng& rng) {
  return {xavier(store, prefix + ".w_q", {d, d}, rng), xavier(store, prefix + ".w_k", {d, d}, rng),
          xavier(store, prefix + ".w_v", {d, d}, rng), xavier(store, prefix + ".w_o", {d, d}, rng)};
}

NormWeights norm_param(ParameterStore& store, const std::string& prefix, std::size_t d) {
  NormWeights n{store.create(prefix + ".gain", {d}), store.create(prefix + ".bias", {d})};
  init_constant(n.gain, 1.0);
  return n;
}

}  // namespace

DecoderWeights make_decoder_weights(ParameterStore& store, const DecoderConfig& config, std::size_t target_vocab,
                                    Rng& rng) {
  config.validate();
  const std::size_t d = config.d_model;
  DecoderWeights w;
  w.embedding = store.create("dec.embed", {target_vocab, d});
  init_normal(w.embedding, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string prefix = "dec.layer" + std::to_string(l);
    DecoderLayerWeights layer;
    layer.self_attn = attention_param(store, prefix + ".self_attn", d, rng);
    layer.self_norm = norm_param(store, prefix + ".self_norm", d);
    layer.cross_attn = attention_param(store, prefix + ".cross_attn", d, rng);
    if (config.attend == DecoderAttend::Both)
      layer.cross_visual_attn = attention_param(store, prefix + ".cross_visual_attn", d, rng);
    layer.cross_norm = norm_param(store, prefix + ".cross_norm", d);
    layer.ffn.w1 = xavier(store, prefix + ".ffn.w1", {d, config.d_ff}, rng);
    layer.ffn.b1 = store.create(prefix + ".ffn.b1", {config.d_ff});
    layer.ffn.w2 = xavier(store, prefix + ".ffn.w2", {config.d_ff, d}, rng);
    layer.ffn.b2 = store.create(prefix + ".ffn.b2", {d});
    layer.ffn_norm = norm_param(store, prefix + ".ffn_norm", d);
    w.layers.push_back(std::move(layer));
  }
  w.out_w = xavier(store, "dec.out.w", {d, target_vocab}, rng);
  w.out_b = store.create("dec.out.b", {target_vocab});
  return w;
}

Tensor decode_states(ForwardContext& ctx, std::span<const TokenId> prefix, const EncoderOutput& encoded,
                     const DecoderWeights& weights, const DecoderConfig& config) {
  if (prefix.empty()) throw UsageError("decoder prefix is empty");
  if (prefix.front() != kBosId) throw UsageError("decoder prefix must start with <s>");
  if (!encoded.text.defined()) throw UsageError("decoder called without encoder output");
  const std::size_t n_vis = encoded.visual.defined() ? encoded.visual.dim(0) : 0;
  if (config.attend == DecoderAttend::Visual && n_vis == 0)
    throw DataError("decoder attends to visual nodes but the graph has none");

  Tape& t = ctx.tape;
  const std::size_t heads = config.n_heads;
  const double p = config.dropout;
  const AttentionMask causal = AttentionMask::causal(prefix.size());

  Tensor s = embed_textual(ctx, prefix, weights.embedding, p);
  for (const DecoderLayerWeights& layer : weights.layers) {
    const Tensor self = multi_head_attention(ctx, s, s, layer.self_attn, heads, p, &causal);
    const Tensor e = add_and_norm(ctx, s, self, layer.self_norm, p);

    Tensor context;
    switch (config.attend) {
      case DecoderAttend::Textual:
        context = multi_head_attention(ctx, e, encoded.text, layer.cross_attn, heads, p);
        break;
      case DecoderAttend::Visual:
        context = multi_head_attention(ctx, e, encoded.visual, layer.cross_attn, heads, p);
        break;
      case DecoderAttend::Both:
        context = multi_head_attention(ctx, e, encoded.text, layer.cross_attn, heads, p);
        if (n_vis > 0)
          context = ops::add(t, context, multi_head_attention(ctx, e, encoded.visual, layer.cross_visual_attn, heads, p));
        break;
    }
    const Tensor tt = add_and_norm(ctx, e, context, layer.cross_norm, p);
    s = add_and_norm(ctx, tt, feed_forward(ctx, tt, layer.ffn), layer.ffn_norm, p);
  }
  return s;
}

Tensor generator_logits(ForwardContext& ctx, const Tensor& states, const DecoderWeights& weights) {
  return ops::add(ctx.tape, ops::matmul(ctx.tape, states, weights.out_w), weights.out_b);
}

std::vector<double> generate_distribution(std::span<const double> state, const DecoderWeights& weights) {
  const std::size_t d = weights.out_w.dim(0);
  if (state.size() != d)
    throw DimensionError("decoder state has " + std::to_string(state.size()) + " values, generator expects " +
                         std::to_string(d));
  Tape tape(false);
  const Tensor row = Tensor::from({1, d}, std::vector<double>(state.begin(), state.end()));
  ForwardContext ctx{tape};
  const Tensor probs = ops::softmax(tape, generator_logits(ctx, row, weights), -1);
  return {probs.data().begin(), probs.data().end()};
}

}  // namespace gmnmt

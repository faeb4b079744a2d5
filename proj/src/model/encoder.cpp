#include "gmnmt/model/encoder.hpp"

#include <cmath>

#include "gmnmt/core/errors.hpp"
#include "json.hpp"

namespace gmnmt {

namespace {

Tensor matrix_param(ParameterStore& store, const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = store.create(name, {rows, cols});
  init_xavier_uniform(t, rng);
  return t;
}

NormWeights norm_param(ParameterStore& store, const std::string& prefix, std::size_t d) {
  NormWeights n{store.create(prefix + ".gain", {d}), store.create(prefix + ".bias", {d})};
  init_constant(n.gain, 1.0);
  return n;
}

FeedForwardWeights ffn_param(ParameterStore& store, const std::string& prefix, std::size_t d_in, std::size_t d_hidden,
                             std::size_t d_out, Rng& rng) {
  FeedForwardWeights f;
  f.w1 = matrix_param(store, prefix + ".w1", d_in, d_hidden, rng);
  f.b1 = store.create(prefix + ".b1", {d_hidden});
  f.w2 = matrix_param(store, prefix + ".w2", d_hidden, d_out, rng);
  f.b2 = store.create(prefix + ".b2", {d_out});
  return f;
}

ModalityWeights modality_param(ParameterStore& store, const std::string& prefix, const EncoderConfig& cfg,
                               bool simplified_attention, bool with_ffn, Rng& rng) {
  const std::size_t d = cfg.d_model;
  ModalityWeights m;
  m.attn.w_q = matrix_param(store, prefix + ".attn.w_q", d, d, rng);
  m.attn.w_k = matrix_param(store, prefix + ".attn.w_k", d, d, rng);
  if (!simplified_attention) {
    m.attn.w_v = matrix_param(store, prefix + ".attn.w_v", d, d, rng);
    m.attn.w_o = matrix_param(store, prefix + ".attn.w_o", d, d, rng);
  }
  m.attn_norm = norm_param(store, prefix + ".attn_norm", d);
  m.gate_self = matrix_param(store, prefix + ".gate.w_self", d, d, rng);
  m.gate_other = matrix_param(store, prefix + ".gate.w_other", d, d, rng);
  m.fuse_norm = norm_param(store, prefix + ".fuse_norm", d);
  if (with_ffn) {
    m.ffn = ffn_param(store, prefix + ".ffn", d, cfg.d_ff, d, rng);
    m.ffn_norm = norm_param(store, prefix + ".ffn_norm", d);
  }
  return m;
}

std::vector<std::size_t> to_rows(std::span<const TokenId> tokens, std::size_t vocab) {
  std::vector<std::size_t> rows;
  rows.reserve(tokens.size());
  for (TokenId id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw UsageError("token id " + std::to_string(id) + " outside embedding table of " + std::to_string(vocab));
    rows.push_back(static_cast<std::size_t>(id));
  }
  return rows;
}

Tensor gated_neighbor_sum(ForwardContext& ctx, const Tensor& c_self, const Tensor& c_other,
                          std::span<const std::size_t> self_idx, std::span<const std::size_t> other_idx,
                          const Tensor& w_self, const Tensor& w_other, Tensor* gates_out) {
  Tape& t = ctx.tape;
  const Tensor self_rows = ops::gather_rows(t, c_self, self_idx);
  const Tensor other_rows = ops::gather_rows(t, c_other, other_idx);
  const Tensor gates =
      ops::sigmoid(t, ops::add(t, ops::matmul(t, self_rows, w_self), ops::matmul(t, other_rows, w_other)));
  if (gates_out) *gates_out = gates;
  return ops::scatter_add_rows(t, ops::mul(t, gates, other_rows), self_idx, c_self.dim(0));
}

}  // namespace

EncoderWeights make_encoder_weights(ParameterStore& store, const EncoderConfig& config, std::size_t source_vocab,
                                    Rng& rng) {
  config.validate();
  EncoderWeights w;
  w.embedding = store.create("enc.embed", {source_vocab, config.d_model});
  init_normal(w.embedding, rng, 1.0 / std::sqrt(static_cast<double>(config.d_model)));
  w.visual_projection = ffn_param(store, "enc.visual_mlp", config.feature_dim, config.d_ff, config.d_model, rng);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string prefix = "enc.layer" + std::to_string(l);
    const bool last = l + 1 == config.n_layers;
    FusionLayerWeights layer;
    layer.text = modality_param(store, prefix + ".text", config, false, true, rng);
    if (config.unified_parameters) {
      layer.visual = layer.text;
      if (last) layer.visual.ffn.reset();
    } else {
      layer.visual = modality_param(store, prefix + ".visual", config, true, !last, rng);
    }
    w.layers.push_back(std::move(layer));
  }
  return w;
}

std::vector<double> position_encoding(std::size_t position, std::size_t d_model) {
  std::vector<double> pe(d_model);
  for (std::size_t i = 0; i < d_model; ++i) {
    const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
    const double angle = static_cast<double>(position) / std::pow(10000.0, exponent);
    pe[i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

Tensor embed_textual(ForwardContext& ctx, std::span<const TokenId> tokens, const Tensor& embedding, double dropout) {
  const std::size_t d = embedding.dim(1);
  const auto rows = to_rows(tokens, embedding.dim(0));
  std::vector<double> pe;
  pe.reserve(tokens.size() * d);
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    const auto row = position_encoding(p, d);
    pe.insert(pe.end(), row.begin(), row.end());
  }
  const Tensor sum =
      ops::add(ctx.tape, ops::gather_rows(ctx.tape, embedding, rows), Tensor::from({tokens.size(), d}, std::move(pe)));
  return ctx.dropout(sum, dropout);
}

Tensor embed_visual(ForwardContext& ctx, const Tensor& features, const FeedForwardWeights& mlp) {
  if (features.rank() != 2 || features.dim(1) != mlp.w1.dim(0))
    throw DataError("visual features " + shape_string(features.shape()) + " do not match projection input width " +
                    std::to_string(mlp.w1.dim(0)));
  return feed_forward(ctx, features, mlp);
}

Tensor cross_modal_gate_text(ForwardContext& ctx, const Tensor& c_text, const Tensor& c_visual,
                             std::span<const InterEdge> edges, const Tensor& w1, const Tensor& w2, Tensor* gates_out) {
  std::vector<std::size_t> text_idx, vis_idx;
  for (const InterEdge& e : edges) {
    text_idx.push_back(e.text);
    vis_idx.push_back(e.object);
  }
  return gated_neighbor_sum(ctx, c_text, c_visual, text_idx, vis_idx, w1, w2, gates_out);
}

Tensor cross_modal_gate_visual(ForwardContext& ctx, const Tensor& c_visual, const Tensor& c_text,
                               std::span<const InterEdge> edges, const Tensor& w3, const Tensor& w4,
                               Tensor* gates_out) {
  std::vector<std::size_t> text_idx, vis_idx;
  for (const InterEdge& e : edges) {
    text_idx.push_back(e.text);
    vis_idx.push_back(e.object);
  }
  return gated_neighbor_sum(ctx, c_visual, c_text, vis_idx, text_idx, w3, w4, gates_out);
}

LayerStates fusion_layer(ForwardContext& ctx, const LayerStates& input, const MultiModalGraph& graph,
                         const FusionLayerWeights& weights, const EncoderConfig& config, bool is_last_layer,
                         FusionLayerTrace* trace) {
  const std::size_t heads = config.n_heads;
  const double p = config.dropout;
  const ModalityWeights& tw = weights.text;
  const ModalityWeights& vw = weights.visual;
  FusionLayerTrace local;
  FusionLayerTrace& tr = trace ? *trace : local;

  // Step 1: intra-modal fusion.
  const Tensor a_text = multi_head_attention(ctx, input.text, input.text, tw.attn, heads, p, nullptr, &tr.text_attention);
  const Tensor c_text = add_and_norm(ctx, input.text, a_text, tw.attn_norm, p);
  const Tensor a_vis = vw.attn.simplified()
                           ? simplified_self_attention(ctx, input.visual, vw.attn, heads, p, &tr.visual_attention)
                           : multi_head_attention(ctx, input.visual, input.visual, vw.attn, heads, p, nullptr,
                                                  &tr.visual_attention);
  const Tensor c_vis = add_and_norm(ctx, input.visual, a_vis, vw.attn_norm, p);

  // Step 2: inter-modal fusion via cross-modal gating.
  const std::span<const InterEdge> edges =
      config.inter_modal_fusion ? std::span<const InterEdge>(graph.edges()) : std::span<const InterEdge>();
  const Tensor g_text = cross_modal_gate_text(ctx, c_text, c_vis, edges, tw.gate_self, tw.gate_other, &tr.alpha);
  const Tensor g_vis = cross_modal_gate_visual(ctx, c_vis, c_text, edges, vw.gate_self, vw.gate_other, &tr.beta);
  const Tensor m_text = add_and_norm(ctx, c_text, g_text, tw.fuse_norm, p);
  const Tensor m_vis = add_and_norm(ctx, c_vis, g_vis, vw.fuse_norm, p);

  LayerStates out;
  out.text = add_and_norm(ctx, m_text, feed_forward(ctx, m_text, *tw.ffn), tw.ffn_norm, p);
  if (is_last_layer) {
    out.visual = m_vis;
  } else {
    if (!vw.ffn) throw UsageError("visual FFN weights missing on a non-final fusion layer");
    out.visual = add_and_norm(ctx, m_vis, feed_forward(ctx, m_vis, *vw.ffn), vw.ffn_norm, p);
  }

  if (trace) {
    tr.text_attention_out = a_text;
    tr.visual_attention_out = a_vis;
    tr.c_text = c_text;
    tr.c_visual = c_vis;
    tr.m_text = m_text;
    tr.m_visual = m_vis;
  }
  return out;
}

EncoderOutput encode(ForwardContext& ctx, const MultiModalGraph& graph, const EncoderWeights& weights,
                     const EncoderConfig& config, EncoderTrace* trace) {
  if (graph.text_size() == 0) throw DataError("cannot encode a graph without textual nodes");
  if (graph.feature_dim() != config.feature_dim)
    throw DataError("graph features have dimension " + std::to_string(graph.feature_dim()) + ", model expects " +
                    std::to_string(config.feature_dim));
  LayerStates states;
  states.text = embed_textual(ctx, graph.textual_nodes(), weights.embedding, config.dropout);
  const Tensor features = Tensor::from({graph.visual_size(), graph.feature_dim()},
                                       std::vector<double>(graph.visual_features().begin(), graph.visual_features().end()));
  states.visual = embed_visual(ctx, features, weights.visual_projection);
  if (trace) trace->layers.assign(weights.layers.size(), {});
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    const bool last = l + 1 == weights.layers.size();
    states = fusion_layer(ctx, states, graph, weights.layers[l], config, last, trace ? &trace->layers[l] : nullptr);
  }
  return {states.text, states.visual};
}

std::string trace_to_json(const EncoderTrace& trace) {
  auto dump = [](const Tensor& t) {
    nlohmann::json j;
    if (!t.defined()) return j;
    j["shape"] = t.shape();
    j["data"] = std::vector<double>(t.data().begin(), t.data().end());
    return j;
  };
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : trace.layers) {
    layers.push_back({{"text_attention", dump(l.text_attention)},
                      {"visual_attention", dump(l.visual_attention)},
                      {"C_x", dump(l.c_text)},
                      {"C_o", dump(l.c_visual)},
                      {"alpha", dump(l.alpha)},
                      {"beta", dump(l.beta)},
                      {"M_x", dump(l.m_text)},
                      {"M_o", dump(l.m_visual)}});
  }
  return nlohmann::json{{"layers", layers}}.dump();
}

}  // namespace gmnmt

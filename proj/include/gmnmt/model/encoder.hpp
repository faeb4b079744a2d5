#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmnmt/graph/graph.hpp"
#include "gmnmt/model/attention.hpp"
#include "gmnmt/model/config.hpp"
#include "gmnmt/model/parameters.hpp"

namespace gmnmt {

/// Per-modality weights of one fusion layer. `gate_self` multiplies the
/// receiving node's context, `gate_other` the neighbor's (W1/W2 for text,
/// W3/W4 for visual nodes). The visual FFN of the last layer is absent.
struct ModalityWeights {
  AttentionWeights attn;
  NormWeights attn_norm;
  Tensor gate_self, gate_other;
  NormWeights fuse_norm;
  std::optional<FeedForwardWeights> ffn;
  NormWeights ffn_norm;
};

struct FusionLayerWeights {
  ModalityWeights text;
  ModalityWeights visual;
};

struct EncoderWeights {
  Tensor embedding;  // [source_vocab x d_model]
  FeedForwardWeights visual_projection;  // feature_dim -> d_ff -> d_model
  std::vector<FusionLayerWeights> layers;
};

/// Registers and initializes encoder parameters under the "enc." prefix.
EncoderWeights make_encoder_weights(ParameterStore& store, const EncoderConfig& config, std::size_t source_vocab,
                                    Rng& rng);

/// Introspection of one fusion layer (eval-mode debugging and invariant tests).
struct FusionLayerTrace {
  Tensor text_attention;    // [heads x n_text x n_text]
  Tensor visual_attention;  // [heads x n_vis x n_vis]
  Tensor text_attention_out, visual_attention_out;  // raw attention outputs before residual
  Tensor c_text, c_visual;                          // after residual + norm
  Tensor alpha, beta;                               // per-edge gates [edges x d_model]
  Tensor m_text, m_visual;
};

struct EncoderTrace {
  std::vector<FusionLayerTrace> layers;
};

struct EncoderOutput {
  Tensor text;    // H_x [n_text x d_model]
  Tensor visual;  // H_o [n_vis x d_model]
};

/// Sinusoidal position encoding row for `position`.
std::vector<double> position_encoding(std::size_t position, std::size_t d_model);

/// Word embedding plus position encoding, then dropout.
Tensor embed_textual(ForwardContext& ctx, std::span<const TokenId> tokens, const Tensor& embedding, double dropout);
/// Visual feature MLP; [n_vis x feature_dim] -> [n_vis x d_model]. No position encoding.
Tensor embed_visual(ForwardContext& ctx, const Tensor& features, const FeedForwardWeights& mlp);

/// M_x: for each textual node, sum over visual neighbors of
/// sigmoid(C_x W1 + C_o W2) (elementwise) times C_o. Nodes without neighbors get 0.
Tensor cross_modal_gate_text(ForwardContext& ctx, const Tensor& c_text, const Tensor& c_visual,
                             std::span<const InterEdge> edges, const Tensor& w1, const Tensor& w2,
                             Tensor* gates_out = nullptr);
/// M_o: mirror image with sigmoid(C_o W3 + C_x W4).
Tensor cross_modal_gate_visual(ForwardContext& ctx, const Tensor& c_visual, const Tensor& c_text,
                               std::span<const InterEdge> edges, const Tensor& w3, const Tensor& w4,
                               Tensor* gates_out = nullptr);

struct LayerStates {
  Tensor text;
  Tensor visual;
};

/// One graph-based fusion layer: intra-modal attention, gated inter-modal
/// fusion, position-wise FFN. Each sub-block is wrapped as
/// LayerNorm(input + dropout(sub-block)). On the last layer the visual FFN is
/// skipped and H_o = M_o.
LayerStates fusion_layer(ForwardContext& ctx, const LayerStates& input, const MultiModalGraph& graph,
                         const FusionLayerWeights& weights, const EncoderConfig& config, bool is_last_layer,
                         FusionLayerTrace* trace = nullptr);

EncoderOutput encode(ForwardContext& ctx, const MultiModalGraph& graph, const EncoderWeights& weights,
                     const EncoderConfig& config, EncoderTrace* trace = nullptr);

/// JSON dump of every traced tensor (shape + values).
std::string trace_to_json(const EncoderTrace& trace);

}  // namespace gmnmt

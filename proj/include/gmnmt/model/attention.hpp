#pragma once

#include "gmnmt/core/ops.hpp"

namespace gmnmt {

/// Per-call forward state: where ops record, train/eval, and the dropout RNG
/// (required in train mode only).
struct ForwardContext {
  Tape& tape;
  Mode mode = Mode::Eval;
  Rng* rng = nullptr;

  Tensor dropout(const Tensor& x, double p);
};

/// Query/key/value/output projections, each [d_model x d_model]. Value and
/// output projections are left undefined for the simplified variant.
struct AttentionWeights {
  Tensor w_q, w_k, w_v, w_o;
  bool simplified() const { return !w_v.defined(); }
};

struct FeedForwardWeights {
  Tensor w1, b1, w2, b2;
};

struct NormWeights {
  Tensor gain, bias;
};

/// Scaled dot-product attention over `heads` heads (scale 1/sqrt(d_head)).
/// `weights_out`, when given, receives the [heads x queries x keys] weights
/// before dropout. Zero queries give an empty result; queries with no
/// attendable key raise DataError.
Tensor multi_head_attention(ForwardContext& ctx, const Tensor& queries, const Tensor& keys_values,
                            const AttentionWeights& w, std::size_t heads, double dropout,
                            const AttentionMask* mask = nullptr, Tensor* weights_out = nullptr);

/// Self-attention without value and output projections: each head averages
/// slices of the raw input rows.
Tensor simplified_self_attention(ForwardContext& ctx, const Tensor& states, const AttentionWeights& w,
                                 std::size_t heads, double dropout, Tensor* weights_out = nullptr);

/// relu(x W1 + b1) W2 + b2
Tensor feed_forward(ForwardContext& ctx, const Tensor& x, const FeedForwardWeights& w);

/// LayerNorm(residual + dropout(update))
Tensor add_and_norm(ForwardContext& ctx, const Tensor& residual, const Tensor& update, const NormWeights& norm,
                    double dropout);

}  // namespace gmnmt

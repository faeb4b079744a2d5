#include "gmnmt/model/attention.hpp"

#include <cmath>

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

Tensor ForwardContext::dropout(const Tensor& x, double p) {
  if (mode == Mode::Eval || p == 0.0) return x;
  if (rng == nullptr) throw UsageError("train-mode forward pass without a dropout RNG");
  return ops::dropout(tape, x, p, mode, *rng);
}

Tensor multi_head_attention(ForwardContext& ctx, const Tensor& queries, const Tensor& keys_values,
                            const AttentionWeights& w, std::size_t heads, double dropout, const AttentionMask* mask,
                            Tensor* weights_out) {
  Tape& t = ctx.tape;
  const std::size_t nq = queries.dim(0);
  const std::size_t nk = keys_values.dim(0);
  const std::size_t d = w.simplified() ? keys_values.dim(1) : w.w_o.dim(1);
  if (nq == 0) {
    if (weights_out) *weights_out = Tensor::zeros({heads, 0, nk});
    return Tensor::zeros({0, d});
  }
  if (nk == 0) throw DataError("attention has " + std::to_string(nq) + " queries but no keys");

  const Tensor q = ops::split_heads(t, ops::matmul(t, queries, w.w_q), heads);
  const Tensor k = ops::split_heads(t, ops::matmul(t, keys_values, w.w_k), heads);
  const Tensor v = ops::split_heads(t, w.simplified() ? keys_values : ops::matmul(t, keys_values, w.w_v), heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.dim(2)));
  const Tensor scores = ops::scale(t, ops::matmul(t, q, ops::transpose(t, k)), scale);
  const AttentionMask full = mask ? AttentionMask{} : AttentionMask::all(nq, nk);
  Tensor attn = ops::masked_softmax(t, scores, mask ? *mask : full);
  if (weights_out) *weights_out = attn;
  attn = ctx.dropout(attn, dropout);
  const Tensor merged = ops::merge_heads(t, ops::matmul(t, attn, v));
  return w.simplified() ? merged : ops::matmul(t, merged, w.w_o);
}

Tensor simplified_self_attention(ForwardContext& ctx, const Tensor& states, const AttentionWeights& w,
                                 std::size_t heads, double dropout, Tensor* weights_out) {
  AttentionWeights qk{w.w_q, w.w_k, {}, {}};
  return multi_head_attention(ctx, states, states, qk, heads, dropout, nullptr, weights_out);
}

Tensor feed_forward(ForwardContext& ctx, const Tensor& x, const FeedForwardWeights& w) {
  Tape& t = ctx.tape;
  const Tensor hidden = ops::relu(t, ops::add(t, ops::matmul(t, x, w.w1), w.b1));
  return ops::add(t, ops::matmul(t, hidden, w.w2), w.b2);
}

Tensor add_and_norm(ForwardContext& ctx, const Tensor& residual, const Tensor& update, const NormWeights& norm,
                    double dropout) {
  Tape& t = ctx.tape;
  return ops::layer_norm(t, ops::add(t, residual, ctx.dropout(update, dropout)), norm.gain, norm.bias);
}

}  // namespace gmnmt

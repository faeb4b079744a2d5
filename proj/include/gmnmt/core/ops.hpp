#pragma once

// Differentiable tensor primitives. Every op takes the tape it records onto
// first; when the tape is not recording (or no input requires a gradient) the
// op is a plain forward computation.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gmnmt/core/rng.hpp"
#include "gmnmt/core/tape.hpp"
#include "gmnmt/core/tensor.hpp"

namespace gmnmt {

enum class Mode { Train, Eval };

/// Boolean [queries x keys] mask; nonzero entries may be attended.
struct AttentionMask {
  std::size_t queries = 0;
  std::size_t keys = 0;
  std::vector<std::uint8_t> allowed;

  static AttentionMask all(std::size_t queries, std::size_t keys);
  /// Query i may attend to keys 0..i.
  static AttentionMask causal(std::size_t length);
  bool at(std::size_t q, std::size_t k) const { return allowed[q * keys + k] != 0; }
};

namespace ops {

/// Batched matrix product over the last two axes; leading axes broadcast.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
/// Swaps the last two axes.
Tensor transpose(Tape& tape, const Tensor& a);

/// Elementwise sum. `b` may also be a trailing-suffix shape of `a` (bias add).
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);

Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);

/// Max-shifted softmax along `axis` (negative counts from the back).
Tensor softmax(Tape& tape, const Tensor& x, int axis);
/// Softmax over the last axis restricted to allowed keys; masked entries are
/// exactly zero. A query with no allowed key raises DataError.
Tensor masked_softmax(Tape& tape, const Tensor& x, const AttentionMask& mask);
Tensor log_softmax(Tape& tape, const Tensor& x);

/// Normalizes over the last axis, then applies gain and bias.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-6);

/// Inverted dropout. Identity in eval mode or when p == 0; p must be in [0,1).
Tensor dropout(Tape& tape, const Tensor& x, double p, Mode mode, Rng& rng);

/// out[r] = table[rows[r]] for a 2-D table.
Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::size_t> rows);
/// out[rows[r]] += src[r] into an [out_rows x d] zero matrix.
Tensor scatter_add_rows(Tape& tape, const Tensor& src, std::span<const std::size_t> rows,
                        std::size_t out_rows);

/// [n x heads*dh] -> [heads x n x dh]
Tensor split_heads(Tape& tape, const Tensor& x, std::size_t heads);
/// [heads x n x dh] -> [n x heads*dh]
Tensor merge_heads(Tape& tape, const Tensor& x);

Tensor sum(Tape& tape, const Tensor& x);

/// Stacks [T_i x V] matrices into a zero-padded [B x max_len x V] tensor.
Tensor stack_padded(Tape& tape, std::span<const Tensor> rows, std::size_t max_len);

/// Mean negative log-likelihood over positions whose mask is nonzero.
/// `log_probs` is [B x T x V]; `targets` and `mask` are row-major B*T.
Tensor nll_loss(Tape& tape, const Tensor& log_probs, std::span<const std::int32_t> targets,
                std::span<const std::uint8_t> mask);

}  // namespace ops
}  // namespace gmnmt

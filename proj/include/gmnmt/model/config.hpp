#pragma once

#include <cstddef>
#include <string>

#include "gmnmt/graph/graph.hpp"

namespace gmnmt {

struct EncoderConfig {
  std::size_t d_model = 128;
  std::size_t d_ff = 256;
  std::size_t n_heads = 4;
  std::size_t n_layers = 3;
  double dropout = 0.5;
  std::size_t feature_dim = kVisualFeatureDim;
  /// Visual nodes reuse the textual per-layer weights (and full attention).
  bool unified_parameters = false;
  /// When false, the gated cross-modal sums are skipped entirely.
  bool inter_modal_fusion = true;

  void validate() const;
};

/// Which encoder states the decoder's cross-attention reads.
enum class DecoderAttend { Textual, Visual, Both };

std::string to_string(DecoderAttend attend);
DecoderAttend parse_decoder_attend(const std::string& text);

struct DecoderConfig {
  std::size_t d_model = 128;
  std::size_t d_ff = 256;
  std::size_t n_heads = 4;
  std::size_t n_layers = 4;
  double dropout = 0.5;
  DecoderAttend attend = DecoderAttend::Textual;

  void validate() const;
};

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;

  void validate() const;
};

}  // namespace gmnmt

#include "gmnmt/model/config.hpp"

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

namespace {
void check_common(const char* who, std::size_t d_model, std::size_t d_ff, std::size_t heads, std::size_t layers,
                  double dropout) {
  const std::string w = who;
  if (d_model == 0 || d_ff == 0) throw ConfigError(w + ": d_model and d_ff must be positive");
  if (heads == 0 || d_model % heads != 0)
    throw ConfigError(w + ": d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  if (layers == 0) throw ConfigError(w + ": at least one layer is required");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError(w + ": dropout must be in [0,1)");
}
}  // namespace

void EncoderConfig::validate() const {
  check_common("encoder", d_model, d_ff, n_heads, n_layers, dropout);
  if (feature_dim == 0) throw ConfigError("encoder: feature_dim must be positive");
}

void DecoderConfig::validate() const { check_common("decoder", d_model, d_ff, n_heads, n_layers, dropout); }

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (encoder.d_model != decoder.d_model) throw ConfigError("encoder and decoder d_model differ");
  if (source_vocab <= 4 || target_vocab <= 4) throw ConfigError("vocabularies must contain at least one word");
}

std::string to_string(DecoderAttend attend) {
  switch (attend) {
    case DecoderAttend::Textual: return "textual";
    case DecoderAttend::Visual: return "visual";
    case DecoderAttend::Both: return "both";
  }
  return "textual";
}

DecoderAttend parse_decoder_attend(const std::string& text) {
  if (text == "textual") return DecoderAttend::Textual;
  if (text == "visual") return DecoderAttend::Visual;
  if (text == "both") return DecoderAttend::Both;
  throw ConfigError("decoder attend mode must be textual, visual or both; got '" + text + "'");
}

}  // namespace gmnmt

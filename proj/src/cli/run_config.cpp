#include "gmnmt/cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string num(double d) {
  std::ostringstream s;
  s.precision(17);
  s << d;
  return s.str();
}

std::string flag(bool b) { return b ? "true" : "false"; }

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "d_model") encoder.d_model = decoder.d_model = to_size(key, v);
  else if (key == "d_ff") encoder.d_ff = decoder.d_ff = to_size(key, v);
  else if (key == "n_heads") encoder.n_heads = decoder.n_heads = to_size(key, v);
  else if (key == "encoder_layers") encoder.n_layers = to_size(key, v);
  else if (key == "decoder_layers") decoder.n_layers = to_size(key, v);
  else if (key == "dropout") encoder.dropout = decoder.dropout = to_double(key, v);
  else if (key == "feature_dim") encoder.feature_dim = to_size(key, v);
  else if (key == "unified_parameters") encoder.unified_parameters = to_bool(key, v);
  else if (key == "inter_modal_fusion") encoder.inter_modal_fusion = to_bool(key, v);
  else if (key == "decoder_attend") decoder.attend = parse_decoder_attend(v);
  else if (key == "fully_connected_grounding") fully_connected_grounding = to_bool(key, v);
  else if (key == "zero_object_fallback") zero_object_fallback = to_bool(key, v);
  else if (key == "min_count") min_count = to_size(key, v);
  else if (key == "init_seed") init_seed = to_u64(key, v);
  else if (key == "batch_tokens") train.batch_tokens = to_size(key, v);
  else if (key == "warmup_steps") train.warmup_steps = to_size(key, v);
  else if (key == "adam_beta1") train.adam.beta1 = to_double(key, v);
  else if (key == "adam_beta2") train.adam.beta2 = to_double(key, v);
  else if (key == "adam_eps") train.adam.eps = to_double(key, v);
  else if (key == "seed") train.seed = to_u64(key, v);
  else if (key == "max_steps") train.max_steps = to_size(key, v);
  else if (key == "checkpoint_every") train.checkpoint_every = to_size(key, v);
  else if (key == "lr_scale") train.lr_scale = to_double(key, v);
  else if (key == "clip_norm") train.clip_norm = to_double(key, v);
  else if (key == "train") train_data = v;
  else if (key == "valid") valid_data = v;
  else if (key == "test") test_data = v;
  else if (key == "checkpoint_dir") checkpoint_dir = v;
  else throw ConfigError("unknown configuration key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::model_entries() const {
  return {{"d_model", std::to_string(encoder.d_model)},
          {"d_ff", std::to_string(encoder.d_ff)},
          {"n_heads", std::to_string(encoder.n_heads)},
          {"encoder_layers", std::to_string(encoder.n_layers)},
          {"decoder_layers", std::to_string(decoder.n_layers)},
          {"dropout", num(encoder.dropout)},
          {"feature_dim", std::to_string(encoder.feature_dim)},
          {"unified_parameters", flag(encoder.unified_parameters)},
          {"inter_modal_fusion", flag(encoder.inter_modal_fusion)},
          {"decoder_attend", to_string(decoder.attend)},
          {"fully_connected_grounding", flag(fully_connected_grounding)},
          {"zero_object_fallback", flag(zero_object_fallback)}};
}

std::map<std::string, std::string> RunConfig::entries() const {
  auto e = model_entries();
  e["min_count"] = std::to_string(min_count);
  e["init_seed"] = std::to_string(init_seed);
  e["batch_tokens"] = std::to_string(train.batch_tokens);
  e["warmup_steps"] = std::to_string(train.warmup_steps);
  e["adam_beta1"] = num(train.adam.beta1);
  e["adam_beta2"] = num(train.adam.beta2);
  e["adam_eps"] = num(train.adam.eps);
  e["seed"] = std::to_string(train.seed);
  e["max_steps"] = std::to_string(train.max_steps);
  e["checkpoint_every"] = std::to_string(train.checkpoint_every);
  e["lr_scale"] = num(train.lr_scale);
  e["clip_norm"] = num(train.clip_norm);
  return e;
}

ModelConfig RunConfig::model_config(std::size_t source_vocab, std::size_t target_vocab) const {
  ModelConfig m{encoder, decoder, source_vocab, target_vocab};
  m.validate();
  return m;
}

GraphOptions RunConfig::graph_options() const {
  GraphOptions g;
  g.mode = fully_connected_grounding ? GroundingMode::FullyConnected : GroundingMode::Grounded;
  g.zero_object_fallback = zero_object_fallback;
  g.feature_dim = encoder.feature_dim;
  return g;
}

void RunConfig::validate() const {
  encoder.validate();
  decoder.validate();
  train.validate();
  if (encoder.d_model != decoder.d_model) throw ConfigError("encoder and decoder d_model differ");
}

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + " line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + " line " + std::to_string(n) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  for (const auto& [k, v] : parse_key_values(buf.str(), path.string())) config.set(k, v);
}

std::string format_key_values(const std::map<std::string, std::string>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

}  // namespace gmnmt

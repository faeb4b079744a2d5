#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "gmnmt/model/config.hpp"
#include "gmnmt/train/trainer.hpp"

namespace gmnmt {

/// Everything a command needs: model shape, training settings, data paths
/// and ablation switches. Serialized as flat `key = value` lines.
struct RunConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  TrainConfig train;
  std::uint64_t init_seed = 1;
  bool fully_connected_grounding = false;
  /// Graphs for object-free sentences get one zero-feature object.
  bool zero_object_fallback = false;
  std::size_t min_count = 1;

  std::filesystem::path train_data, valid_data, test_data;
  std::filesystem::path checkpoint_dir = "checkpoints";

  /// Sets one key; unknown keys and malformed values raise ConfigError.
  void set(const std::string& key, const std::string& value);
  /// Model-shaping keys and values only (what a checkpoint records).
  std::map<std::string, std::string> model_entries() const;
  std::map<std::string, std::string> entries() const;

  ModelConfig model_config(std::size_t source_vocab, std::size_t target_vocab) const;
  GraphOptions graph_options() const;
  void validate() const;
};

/// Parses `key = value` lines; '#' starts a comment. Errors name the line.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
std::string format_key_values(const std::map<std::string, std::string>& entries);

}  // namespace gmnmt

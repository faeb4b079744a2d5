#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gmnmt/graph/graph.hpp"
#include "gmnmt/graph/vocabulary.hpp"

namespace gmnmt {

/// One JSONL record before vocabulary mapping.
struct RawExample {
  std::vector<std::string> source;
  std::vector<std::string> target;  // may be empty for translation input
  std::vector<PhraseGrounding> groundings;
};

struct Example {
  MultiModalGraph graph;
  /// BOS, target ids..., EOS
  std::vector<TokenId> target;
};

/// Parses a JSONL dataset. Each line:
///   {"src":[...], "tgt":[...], "objects":[{"span":[b,e], "feat":[...]}, ...]}
/// An object may give "feat_ref":{"file":F,"offset":K} instead of "feat": F is
/// resolved relative to the dataset's directory, K is a byte offset, and the
/// payload is `feature_dim` little-endian float32 values. A missing "objects"
/// key means no groundings. Blank lines are skipped.
std::vector<RawExample> read_jsonl(const std::filesystem::path& path, std::size_t feature_dim = kVisualFeatureDim);
RawExample parse_jsonl_line(const std::string& line, std::size_t line_number, const std::filesystem::path& base_dir,
                            std::size_t feature_dim = kVisualFeatureDim);

/// Writes records with inline features.
void write_jsonl(const std::filesystem::path& path, const std::vector<RawExample>& examples);
std::string to_jsonl_line(const RawExample& example);

Example make_example(const RawExample& raw, const Vocabulary& source_vocab, const Vocabulary& target_vocab,
                     const GraphOptions& options);

std::vector<Example> load_dataset(const std::filesystem::path& path, const Vocabulary& source_vocab,
                                  const Vocabulary& target_vocab, const GraphOptions& options);

}  // namespace gmnmt

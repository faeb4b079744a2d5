#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gmnmt {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr TokenId kFirstWordId = 4;

/// Token <-> id bijection with four reserved ids (PAD, BOS, EOS, UNK).
class Vocabulary {
 public:
  Vocabulary();

  /// Builds from tokenized sentences. Ordering is by descending frequency,
  /// ties broken by first appearance; tokens rarer than `min_count` are dropped.
  static Vocabulary build(std::span<const std::vector<std::string>> sentences, std::size_t min_count = 1);
  /// One token per line; line i (0-based) gets id i + 4.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId add(std::string_view token);
  /// Total mapping: unknown strings map to UNK.
  TokenId id(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  /// Space-joined surface form; PAD/BOS/EOS are skipped.
  std::string decode(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace gmnmt

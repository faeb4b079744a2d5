#include "gmnmt/graph/vocabulary.hpp"

#include <algorithm>
#include <fstream>

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

namespace {
const char* const kSpecials[] = {"<pad>", "<s>", "</s>", "<unk>"};
}

Vocabulary::Vocabulary() {
  for (const char* s : kSpecials) add(s);
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> sentences, std::size_t min_count) {
  std::unordered_map<std::string, std::size_t> count;
  std::vector<std::string> order;
  for (const auto& sentence : sentences)
    for (const auto& tok : sentence)
      if (count[tok]++ == 0) order.push_back(tok);
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& a, const std::string& b) { return count[a] > count[b]; });
  Vocabulary v;
  for (const auto& tok : order)
    if (count[tok] >= min_count) v.add(tok);
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (v.find(line))
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate token '" + line + "'");
    v.add(line);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file " + path.string());
  for (std::size_t i = kFirstWordId; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

TokenId Vocabulary::add(std::string_view token) {
  if (auto existing = find(token)) return *existing;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnkId); }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw UsageError("token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId i : ids) {
    if (i == kPadId || i == kBosId || i == kEosId) continue;
    if (!out.empty()) out += ' ';
    out += token(i);
  }
  return out;
}

}  // namespace gmnmt

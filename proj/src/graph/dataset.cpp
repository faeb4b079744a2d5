#include "gmnmt/graph/dataset.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "gmnmt/core/errors.hpp"
#include "json.hpp"

namespace gmnmt {

namespace {

std::vector<double> read_sidecar(const std::filesystem::path& file, std::uint64_t offset, std::size_t count) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + file.string());
  in.seekg(static_cast<std::streamoff>(offset));
  std::vector<unsigned char> bytes(count * 4);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size())
    throw DataError("feature file " + file.string() + " too short for offset " + std::to_string(offset));
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bitsv = static_cast<std::uint32_t>(bytes[4 * i]) |
                                static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                                static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                                static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
    out[i] = std::bit_cast<float>(bitsv);
  }
  return out;
}

}  // namespace

RawExample parse_jsonl_line(const std::string& line, std::size_t line_number, const std::filesystem::path& base_dir,
                            std::size_t feature_dim) {
  const std::string where = "line " + std::to_string(line_number) + ": ";
  RawExample ex;
  try {
    const auto j = nlohmann::json::parse(line);
    ex.source = j.at("src").get<std::vector<std::string>>();
    if (j.contains("tgt")) ex.target = j.at("tgt").get<std::vector<std::string>>();
    if (ex.source.empty()) throw DataError(where + "empty source sentence");
    if (j.contains("objects") && !j.at("objects").is_null()) {
      std::size_t index = 0;
      for (const auto& obj : j.at("objects")) {
        const auto span = obj.at("span").get<std::vector<std::size_t>>();
        if (span.size() != 2) throw DataError(where + "object " + std::to_string(index) + ": span needs two entries");
        if (span[0] >= span[1] || span[1] > ex.source.size())
          throw DataError(where + "object " + std::to_string(index) + ": span [" + std::to_string(span[0]) + "," +
                          std::to_string(span[1]) + ") invalid for " + std::to_string(ex.source.size()) + " tokens");
        std::vector<double> feat;
        if (obj.contains("feat")) {
          feat = obj.at("feat").get<std::vector<double>>();
        } else if (obj.contains("feat_ref")) {
          const auto& ref = obj.at("feat_ref");
          feat = read_sidecar(base_dir / ref.at("file").get<std::string>(), ref.at("offset").get<std::uint64_t>(),
                              feature_dim);
        } else {
          throw DataError(where + "object " + std::to_string(index) + " has neither feat nor feat_ref");
        }
        if (feat.size() != feature_dim)
          throw DataError(where + "object " + std::to_string(index) + " has " + std::to_string(feat.size()) +
                          " feature values, expected " + std::to_string(feature_dim));
        ex.groundings.push_back(PhraseGrounding{span[0], span[1], {std::move(feat)}});
        ++index;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + e.what());
  } catch (const DataError& e) {
    const std::string msg = e.what();
    throw DataError(msg.rfind("line ", 0) == 0 ? msg : where + msg);
  }
  return ex;
}

std::vector<RawExample> read_jsonl(const std::filesystem::path& path, std::size_t feature_dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::vector<RawExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_jsonl_line(line, lineno, path.parent_path(), feature_dim));
  }
  return out;
}

std::string to_jsonl_line(const RawExample& example) {
  nlohmann::json j;
  j["src"] = example.source;
  j["tgt"] = example.target;
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& g : example.groundings)
    for (const auto& feat : g.objects) objects.push_back({{"span", {g.begin, g.end}}, {"feat", feat}});
  j["objects"] = std::move(objects);
  return j.dump();
}

void write_jsonl(const std::filesystem::path& path, const std::vector<RawExample>& examples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset " + path.string());
  for (const auto& ex : examples) out << to_jsonl_line(ex) << '\n';
}

Example make_example(const RawExample& raw, const Vocabulary& source_vocab, const Vocabulary& target_vocab,
                     const GraphOptions& options) {
  const std::vector<TokenId> src = source_vocab.encode(raw.source);
  Example ex{build_graph(src, raw.groundings, options), {}};
  ex.target.reserve(raw.target.size() + 2);
  ex.target.push_back(kBosId);
  for (const auto& tok : raw.target) ex.target.push_back(target_vocab.id(tok));
  ex.target.push_back(kEosId);
  return ex;
}

std::vector<Example> load_dataset(const std::filesystem::path& path, const Vocabulary& source_vocab,
                                  const Vocabulary& target_vocab, const GraphOptions& options) {
  const auto raws = read_jsonl(path, options.feature_dim);
  std::vector<Example> out;
  out.reserve(raws.size());
  for (std::size_t i = 0; i < raws.size(); ++i) out.push_back(make_example(raws[i], source_vocab, target_vocab, options));
  return out;
}

}  // namespace gmnmt

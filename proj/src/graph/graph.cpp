#include "gmnmt/graph/graph.hpp"

#include <algorithm>

#include "gmnmt/core/errors.hpp"
#include "json.hpp"

namespace gmnmt {

MultiModalGraph::MultiModalGraph(std::vector<TokenId> textual, std::vector<double> visual_features,
                                 std::size_t feature_dim, std::vector<InterEdge> edges)
    : textual_(std::move(textual)),
      features_(std::move(visual_features)),
      feature_dim_(feature_dim),
      edges_(std::move(edges)) {
  if (feature_dim_ == 0) throw DataError("visual feature dimension must be positive");
  if (features_.size() % feature_dim_ != 0)
    throw DataError("visual feature buffer of " + std::to_string(features_.size()) +
                    " values is not a multiple of dimension " + std::to_string(feature_dim_));
  for (const InterEdge& e : edges_)
    if (e.text >= textual_.size() || e.object >= visual_size())
      throw DataError("inter-modal edge (" + std::to_string(e.text) + "," + std::to_string(e.object) +
                      ") out of range for " + std::to_string(textual_.size()) + " textual / " +
                      std::to_string(visual_size()) + " visual nodes");
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

std::span<const double> MultiModalGraph::visual_feature(std::size_t object) const {
  if (object >= visual_size()) throw UsageError("visual node " + std::to_string(object) + " out of range");
  return std::span<const double>(features_).subspan(object * feature_dim_, feature_dim_);
}

std::vector<std::size_t> MultiModalGraph::neighbors_visual(std::size_t text_index) const {
  if (text_index >= text_size())
    throw UsageError("textual node " + std::to_string(text_index) + " out of range");
  std::vector<std::size_t> out;
  for (const InterEdge& e : edges_)
    if (e.text == text_index) out.push_back(e.object);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> MultiModalGraph::neighbors_textual(std::size_t visual_index) const {
  if (visual_index >= visual_size())
    throw UsageError("visual node " + std::to_string(visual_index) + " out of range");
  std::vector<std::size_t> out;
  for (const InterEdge& e : edges_)
    if (e.object == visual_index) out.push_back(e.text);
  std::sort(out.begin(), out.end());
  return out;
}

MultiModalGraph MultiModalGraph::with_visual_features(std::vector<double> features) const {
  if (features.size() != features_.size())
    throw DataError("replacement visual features have the wrong size");
  return MultiModalGraph(textual_, std::move(features), feature_dim_, edges_);
}

namespace {

struct Nodes {
  std::vector<double> features;
  // For each object, the phrase span it came from.
  std::vector<std::pair<std::size_t, std::size_t>> spans;
};

Nodes collect_objects(std::size_t n_tokens, std::span<const PhraseGrounding> groundings,
                      std::size_t feature_dim, bool zero_object_fallback) {
  Nodes nodes;
  for (std::size_t g = 0; g < groundings.size(); ++g) {
    const PhraseGrounding& pg = groundings[g];
    if (pg.begin >= pg.end || pg.end > n_tokens)
      throw DataError("grounding record " + std::to_string(g) + ": span [" + std::to_string(pg.begin) + "," +
                      std::to_string(pg.end) + ") invalid for " + std::to_string(n_tokens) + " tokens");
    for (const auto& feat : pg.objects) {
      if (feat.size() != feature_dim)
        throw DataError("grounding record " + std::to_string(g) + ": feature vector has " +
                        std::to_string(feat.size()) + " values, expected " + std::to_string(feature_dim));
      nodes.features.insert(nodes.features.end(), feat.begin(), feat.end());
      nodes.spans.emplace_back(pg.begin, pg.end);
    }
  }
  if (nodes.spans.empty() && zero_object_fallback) nodes.features.assign(feature_dim, 0.0);
  return nodes;
}

}  // namespace

MultiModalGraph build_graph(std::span<const TokenId> tokens, std::span<const PhraseGrounding> groundings,
                            std::size_t feature_dim, bool zero_object_fallback) {
  Nodes nodes = collect_objects(tokens.size(), groundings, feature_dim, zero_object_fallback);
  std::vector<InterEdge> edges;
  for (std::size_t o = 0; o < nodes.spans.size(); ++o)
    for (std::size_t t = nodes.spans[o].first; t < nodes.spans[o].second; ++t) edges.push_back({t, o});
  return MultiModalGraph({tokens.begin(), tokens.end()}, std::move(nodes.features), feature_dim, std::move(edges));
}

MultiModalGraph build_fully_connected_graph(std::span<const TokenId> tokens,
                                            std::span<const PhraseGrounding> groundings, std::size_t feature_dim,
                                            bool zero_object_fallback) {
  Nodes nodes = collect_objects(tokens.size(), groundings, feature_dim, zero_object_fallback);
  std::vector<InterEdge> edges;
  for (std::size_t t = 0; t < tokens.size(); ++t)
    for (std::size_t o = 0; o < nodes.spans.size(); ++o) edges.push_back({t, o});
  return MultiModalGraph({tokens.begin(), tokens.end()}, std::move(nodes.features), feature_dim, std::move(edges));
}

MultiModalGraph build_graph(std::span<const TokenId> tokens, std::span<const PhraseGrounding> groundings,
                            const GraphOptions& options) {
  return options.mode == GroundingMode::FullyConnected
             ? build_fully_connected_graph(tokens, groundings, options.feature_dim, options.zero_object_fallback)
             : build_graph(tokens, groundings, options.feature_dim, options.zero_object_fallback);
}

std::string graph_to_json(const MultiModalGraph& graph) {
  nlohmann::json j;
  j["text"] = std::vector<TokenId>(graph.textual_nodes().begin(), graph.textual_nodes().end());
  j["feature_dim"] = graph.feature_dim();
  nlohmann::json visual = nlohmann::json::array();
  for (std::size_t o = 0; o < graph.visual_size(); ++o) {
    auto f = graph.visual_feature(o);
    visual.push_back(std::vector<double>(f.begin(), f.end()));
  }
  j["visual"] = std::move(visual);
  nlohmann::json edges = nlohmann::json::array();
  for (const InterEdge& e : graph.edges()) edges.push_back({e.text, e.object});
  j["edges"] = std::move(edges);
  return j.dump();
}

MultiModalGraph graph_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto dim = j.at("feature_dim").get<std::size_t>();
    std::vector<double> features;
    for (const auto& row : j.at("visual")) {
      auto v = row.get<std::vector<double>>();
      if (v.size() != dim) throw DataError("visual row has wrong dimension");
      features.insert(features.end(), v.begin(), v.end());
    }
    std::vector<InterEdge> edges;
    for (const auto& e : j.at("edges")) edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
    return MultiModalGraph(j.at("text").get<std::vector<TokenId>>(), std::move(features), dim, std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed graph JSON: ") + e.what());
  }
}

}  // namespace gmnmt

#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gmnmt/graph/vocabulary.hpp"

namespace gmnmt {

inline constexpr std::size_t kVisualFeatureDim = 2048;

/// Undirected inter-modal edge, stored once as (textual node, visual node).
struct InterEdge {
  std::size_t text = 0;
  std::size_t object = 0;
  auto operator<=>(const InterEdge&) const = default;
};

/// A noun phrase [begin, end) and the visual objects grounded to it.
struct PhraseGrounding {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<std::vector<double>> objects;
};

enum class GroundingMode { Grounded, FullyConnected };

struct GraphOptions {
  GroundingMode mode = GroundingMode::Grounded;
  /// Sentences without any grounded object get one all-zero, edgeless visual
  /// node instead of none.
  bool zero_object_fallback = false;
  std::size_t feature_dim = kVisualFeatureDim;
};

/// Sentence-image pair as one graph: a textual node per word, a visual node
/// per object, and inter-modal edges from groundings. Intra-modal edges are
/// implicit (each modality is fully connected) and never stored.
class MultiModalGraph {
 public:
  MultiModalGraph() = default;
  /// Validates edge endpoints and feature sizes; edges are sorted and deduplicated.
  MultiModalGraph(std::vector<TokenId> textual, std::vector<double> visual_features,
                  std::size_t feature_dim, std::vector<InterEdge> edges);

  std::size_t text_size() const { return textual_.size(); }
  std::size_t visual_size() const { return feature_dim_ == 0 ? 0 : features_.size() / feature_dim_; }
  std::size_t feature_dim() const { return feature_dim_; }

  std::span<const TokenId> textual_nodes() const { return textual_; }
  /// Row-major [visual_size x feature_dim].
  std::span<const double> visual_features() const { return features_; }
  std::span<const double> visual_feature(std::size_t object) const;
  const std::vector<InterEdge>& edges() const { return edges_; }

  /// A(v_x): visual neighbors of a textual node, ascending.
  std::vector<std::size_t> neighbors_visual(std::size_t text_index) const;
  /// A(v_o): textual neighbors of a visual node, ascending.
  std::vector<std::size_t> neighbors_textual(std::size_t visual_index) const;

  /// Same structure with replaced visual features (used for invariance probes).
  MultiModalGraph with_visual_features(std::vector<double> features) const;

  bool operator==(const MultiModalGraph&) const = default;

 private:
  std::vector<TokenId> textual_;
  std::vector<double> features_;
  std::size_t feature_dim_ = kVisualFeatureDim;
  std::vector<InterEdge> edges_;
};

/// Inter-modal edges connect each object to every token of its phrase.
MultiModalGraph build_graph(std::span<const TokenId> tokens, std::span<const PhraseGrounding> groundings,
                            std::size_t feature_dim = kVisualFeatureDim, bool zero_object_fallback = false);
/// Same nodes; every token is connected to every object.
MultiModalGraph build_fully_connected_graph(std::span<const TokenId> tokens,
                                            std::span<const PhraseGrounding> groundings,
                                            std::size_t feature_dim = kVisualFeatureDim,
                                            bool zero_object_fallback = false);
MultiModalGraph build_graph(std::span<const TokenId> tokens, std::span<const PhraseGrounding> groundings,
                            const GraphOptions& options);

/// Compact JSON form: {"text":[...], "feature_dim":D, "visual":[[...],...], "edges":[[t,o],...]}.
std::string graph_to_json(const MultiModalGraph& graph);
MultiModalGraph graph_from_json(const std::string& text);

}  // namespace gmnmt

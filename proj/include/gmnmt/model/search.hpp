#pragma once

#include <vector>

#include "gmnmt/model/model.hpp"

namespace gmnmt {

/// 2 x source length + 10.
std::size_t default_max_len(std::size_t source_length);

/// A finished search result. `tokens` excludes <s> and </s>; `length` counts
/// generated tokens including </s> when one was emitted.
struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  std::size_t length = 0;
  bool ended = false;

  /// Length-normalized score: log_prob / length.
  double score() const;
};

/// Repeated argmax at the last position until </s> or `max_len` tokens.
Hypothesis greedy_search(const Model& model, const MultiModalGraph& graph, std::size_t max_len);
std::vector<TokenId> greedy_decode(const Model& model, const MultiModalGraph& graph, std::size_t max_len);

/// Beam search ranked by length-normalized log-probability. Each step keeps
/// the `beam_size` best expansions by cumulative log-probability; those ending
/// in </s> retire to the finished list and occupy a slot. Ties keep the lower
/// token id, so beam_size 1 reproduces greedy search.
Hypothesis beam_search(const Model& model, const MultiModalGraph& graph, std::size_t beam_size, std::size_t max_len);
std::vector<TokenId> beam_decode(const Model& model, const MultiModalGraph& graph, std::size_t beam_size,
                                 std::size_t max_len);

}  // namespace gmnmt

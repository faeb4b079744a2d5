#pragma once

#include <cstdint>
#include <vector>

#include "gmnmt/graph/dataset.hpp"

namespace gmnmt {

/// A group of examples with PAD-filled rectangular id matrices.
struct Batch {
  std::vector<std::size_t> indices;  // into the example list
  std::size_t source_width = 0;
  std::size_t target_width = 0;
  std::vector<TokenId> source;       // [size x source_width]
  std::vector<std::uint8_t> source_mask;
  std::vector<TokenId> target;       // [size x target_width], <s> ... </s>
  std::vector<std::uint8_t> target_mask;
  std::size_t tokens = 0;            // real source + target tokens

  std::size_t size() const { return indices.size(); }
};

/// Source tokens plus target tokens (including <s> and </s>).
std::size_t example_tokens(const Example& example);

/// Length-bucketed batches for one epoch. Examples are shuffled, stably sorted
/// by size, packed greedily up to `batch_tokens`, and the batch order is
/// shuffled. An example larger than the cap forms a singleton batch.
std::vector<Batch> make_batches(const std::vector<Example>& examples, std::size_t batch_tokens, std::uint64_t seed);

}  // namespace gmnmt

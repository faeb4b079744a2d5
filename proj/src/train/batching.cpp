#include "gmnmt/train/batching.hpp"

#include <algorithm>
#include <numeric>

#include "gmnmt/core/rng.hpp"

namespace gmnmt {

namespace {

Batch pack(const std::vector<Example>& examples, std::vector<std::size_t> indices) {
  Batch b;
  b.indices = std::move(indices);
  for (std::size_t i : b.indices) {
    b.source_width = std::max(b.source_width, examples[i].graph.text_size());
    b.target_width = std::max(b.target_width, examples[i].target.size());
    b.tokens += example_tokens(examples[i]);
  }
  b.source.assign(b.size() * b.source_width, kPadId);
  b.source_mask.assign(b.size() * b.source_width, 0);
  b.target.assign(b.size() * b.target_width, kPadId);
  b.target_mask.assign(b.size() * b.target_width, 0);
  for (std::size_t r = 0; r < b.size(); ++r) {
    const Example& ex = examples[b.indices[r]];
    const auto src = ex.graph.textual_nodes();
    for (std::size_t c = 0; c < src.size(); ++c) {
      b.source[r * b.source_width + c] = src[c];
      b.source_mask[r * b.source_width + c] = 1;
    }
    for (std::size_t c = 0; c < ex.target.size(); ++c) {
      b.target[r * b.target_width + c] = ex.target[c];
      b.target_mask[r * b.target_width + c] = 1;
    }
  }
  return b;
}

}  // namespace

std::size_t example_tokens(const Example& example) { return example.graph.text_size() + example.target.size(); }

std::vector<Batch> make_batches(const std::vector<Example>& examples, std::size_t batch_tokens, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return example_tokens(examples[a]) < example_tokens(examples[b]);
  });

  std::vector<Batch> batches;
  std::vector<std::size_t> current;
  std::size_t used = 0;
  for (std::size_t i : order) {
    const std::size_t n = example_tokens(examples[i]);
    if (!current.empty() && used + n > batch_tokens) {
      batches.push_back(pack(examples, std::move(current)));
      current.clear();
      used = 0;
    }
    current.push_back(i);
    used += n;
  }
  if (!current.empty()) batches.push_back(pack(examples, std::move(current)));
  std::shuffle(batches.begin(), batches.end(), rng.engine());
  return batches;
}

}  // namespace gmnmt

#pragma once

#include <cstdint>
#include <vector>

#include "gmnmt/graph/dataset.hpp"

namespace gmnmt {

struct SyntheticOptions {
  std::size_t pairs = 32;
  std::size_t word_types = 46;
  std::size_t min_length = 3;
  std::size_t max_length = 10;
  std::size_t min_objects = 1;
  std::size_t max_objects = 2;
  std::size_t feature_dim = kVisualFeatureDim;
  std::uint64_t seed = 1;
};

/// Grounded copy task: source words "w<k>", target words "t<k>" in the same
/// order. Each sentence grounds 1-2 disjoint short phrases; every object's
/// feature is a per-word prototype (keyed on the phrase's last word) plus
/// small noise, all drawn from the seed.
std::vector<RawExample> make_copy_corpus(const SyntheticOptions& options);

/// "two boys are playing with a toy car": two objects for [0,2), one for [5,8).
RawExample figure_one_example(std::uint64_t seed = 7, std::size_t feature_dim = kVisualFeatureDim);

}  // namespace gmnmt

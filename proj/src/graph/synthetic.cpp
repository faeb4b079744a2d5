#include "gmnmt/graph/synthetic.hpp"

#include <algorithm>

#include "gmnmt/core/errors.hpp"
#include "gmnmt/core/rng.hpp"

namespace gmnmt {

namespace {

std::vector<double> noisy_copy(const std::vector<double>& proto, Rng& rng, double noise) {
  std::vector<double> out(proto);
  for (double& v : out) v += rng.normal(0.0, noise);
  return out;
}

std::vector<double> gaussian(Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  for (double& v : out) v = rng.normal(0.0, 1.0);
  return out;
}

}  // namespace

std::vector<RawExample> make_copy_corpus(const SyntheticOptions& options) {
  if (options.min_length < options.max_objects || options.min_length > options.max_length ||
      options.min_objects > options.max_objects || options.word_types == 0)
    throw ConfigError("inconsistent synthetic corpus options");
  Rng rng(options.seed);
  std::vector<std::vector<double>> prototypes;
  prototypes.reserve(options.word_types);
  for (std::size_t w = 0; w < options.word_types; ++w) prototypes.push_back(gaussian(rng, options.feature_dim));

  std::vector<RawExample> corpus;
  corpus.reserve(options.pairs);
  for (std::size_t p = 0; p < options.pairs; ++p) {
    RawExample ex;
    const std::size_t len = options.min_length + rng.below(options.max_length - options.min_length + 1);
    std::vector<std::size_t> words(len);
    for (auto& w : words) w = rng.below(options.word_types);
    for (std::size_t w : words) {
      ex.source.push_back("w" + std::to_string(w));
      ex.target.push_back("t" + std::to_string(w));
    }
    // Disjoint phrases: split the sentence into one slot per object.
    const std::size_t n_obj = options.min_objects + rng.below(options.max_objects - options.min_objects + 1);
    const std::size_t slot = len / std::max<std::size_t>(n_obj, 1);
    for (std::size_t o = 0; o < n_obj; ++o) {
      const std::size_t lo = o * slot;
      const std::size_t span_len = 1 + rng.below(std::min<std::size_t>(3, slot));
      const std::size_t begin = lo + rng.below(slot - span_len + 1);
      const std::size_t end = begin + span_len;
      ex.groundings.push_back({begin, end, {noisy_copy(prototypes[words[end - 1]], rng, 0.1)}});
    }
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

RawExample figure_one_example(std::uint64_t seed, std::size_t feature_dim) {
  Rng rng(seed);
  RawExample ex;
  ex.source = {"two", "boys", "are", "playing", "with", "a", "toy", "car"};
  ex.target = {"zwei", "jungen", "spielen", "mit", "einem", "spielzeugauto"};
  ex.groundings.push_back({0, 2, {gaussian(rng, feature_dim), gaussian(rng, feature_dim)}});
  ex.groundings.push_back({5, 8, {gaussian(rng, feature_dim)}});
  return ex;
}

}  // namespace gmnmt

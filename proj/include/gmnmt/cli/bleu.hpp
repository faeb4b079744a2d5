#pragma once

#include <array>
#include <string>
#include <vector>

namespace gmnmt {

struct BleuStats {
  std::array<std::size_t, 4> matches{};  // clipped n-gram matches, n = 1..4
  std::array<std::size_t, 4> totals{};   // hypothesis n-grams
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  double precision(std::size_t n) const;  // n in 1..4
  double brevity_penalty() const;
  /// 0..100; zero when any precision is zero (no smoothing).
  double score() const;
};

std::vector<std::string> split_tokens(const std::string& line);
/// Single-reference corpus statistics over whitespace tokens.
BleuStats corpus_bleu_stats(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);
double corpus_bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);
std::string format_bleu(double score);

}  // namespace gmnmt

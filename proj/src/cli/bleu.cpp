#include "gmnmt/cli/bleu.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[Ngram(tokens.begin() + static_cast<long>(i), tokens.begin() + static_cast<long>(i + n))];
  return counts;
}

}  // namespace

double BleuStats::precision(std::size_t n) const {
  const std::size_t i = n - 1;
  return totals[i] == 0 ? 0.0 : static_cast<double>(matches[i]) / static_cast<double>(totals[i]);
}

double BleuStats::brevity_penalty() const {
  if (hyp_length == 0) return 0.0;
  if (hyp_length > ref_length) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_length) / static_cast<double>(hyp_length));
}

double BleuStats::score() const {
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const double p = precision(n);
    if (p == 0.0) return 0.0;
    log_sum += 0.25 * std::log(p);
  }
  return 100.0 * brevity_penalty() * std::exp(log_sum);
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

BleuStats corpus_bleu_stats(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
  if (hypotheses.size() != references.size())
    throw DataError("hypothesis file has " + std::to_string(hypotheses.size()) + " lines, reference file has " +
                    std::to_string(references.size()));
  BleuStats s;
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    const auto hyp = split_tokens(hypotheses[k]);
    const auto ref = split_tokens(references[k]);
    s.hyp_length += hyp.size();
    s.ref_length += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = count_ngrams(hyp, n);
      const auto r = count_ngrams(ref, n);
      for (const auto& [gram, c] : h) {
        s.totals[n - 1] += c;
        const auto it = r.find(gram);
        if (it != r.end()) s.matches[n - 1] += std::min(c, it->second);
      }
    }
  }
  return s;
}

double corpus_bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
  return corpus_bleu_stats(hypotheses, references).score();
}

std::string format_bleu(double score) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", score);
  return buf;
}

}  // namespace gmnmt

#include "gmnmt/model/search.hpp"

#include <algorithm>
#include <cmath>

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

namespace {

void check_limits(std::size_t max_len) {
  if (max_len < 1) throw ConfigError("max_len must be at least 1");
}

// Log-probabilities of the next token after `prefix`.
std::vector<double> next_log_probs(const Model& model, const EncoderOutput& encoded,
                                   const std::vector<TokenId>& prefix) {
  Tape tape(false);
  ForwardContext ctx{tape};
  const Tensor logits = model.logits(ctx, encoded, prefix);
  const std::size_t v = logits.dim(1);
  const std::size_t last = logits.dim(0) - 1;
  const Tensor row = Tensor::from({1, v}, std::vector<double>(logits.data().begin() + static_cast<long>(last * v),
                                                              logits.data().begin() + static_cast<long>((last + 1) * v)));
  const Tensor lp = ops::log_softmax(tape, row);
  return {lp.data().begin(), lp.data().end()};
}

EncoderOutput encode_eval(const Model& model, const MultiModalGraph& graph) {
  Tape tape(false);
  ForwardContext ctx{tape};
  return model.encode(ctx, graph);
}

struct Live {
  std::vector<TokenId> prefix;  // starts with <s>
  double log_prob = 0.0;
};

Hypothesis finish(const Live& h, bool ended) {
  Hypothesis out;
  out.tokens.assign(h.prefix.begin() + 1, h.prefix.end());
  out.log_prob = h.log_prob;
  out.length = out.tokens.size();
  out.ended = ended;
  return out;
}

}  // namespace

std::size_t default_max_len(std::size_t source_length) { return 2 * source_length + 10; }

double Hypothesis::score() const { return length == 0 ? log_prob : log_prob / static_cast<double>(length); }

Hypothesis greedy_search(const Model& model, const MultiModalGraph& graph, std::size_t max_len) {
  check_limits(max_len);
  const EncoderOutput encoded = encode_eval(model, graph);
  Live h{{kBosId}, 0.0};
  for (std::size_t step = 0; step < max_len; ++step) {
    const auto lp = next_log_probs(model, encoded, h.prefix);
    const auto best = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    h.log_prob += lp[static_cast<std::size_t>(best)];
    if (best == kEosId) {
      Hypothesis out = finish(h, true);
      out.length += 1;
      return out;
    }
    h.prefix.push_back(best);
  }
  return finish(h, false);
}

std::vector<TokenId> greedy_decode(const Model& model, const MultiModalGraph& graph, std::size_t max_len) {
  return greedy_search(model, graph, max_len).tokens;
}

Hypothesis beam_search(const Model& model, const MultiModalGraph& graph, std::size_t beam_size,
                       std::size_t max_len) {
  check_limits(max_len);
  if (beam_size < 1) throw ConfigError("beam size must be at least 1");
  const EncoderOutput encoded = encode_eval(model, graph);

  struct Candidate {
    std::size_t parent;
    TokenId token;
    double log_prob;
  };
  std::vector<Live> beam{{{kBosId}, 0.0}};
  std::vector<Hypothesis> finished;
  for (std::size_t step = 0; step < max_len && !beam.empty() && finished.size() < beam_size; ++step) {
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      const auto lp = next_log_probs(model, encoded, beam[i].prefix);
      for (std::size_t v = 0; v < lp.size(); ++v)
        candidates.push_back({i, static_cast<TokenId>(v), beam[i].log_prob + lp[v]});
    }
    const std::size_t keep = std::min(beam_size - finished.size(), candidates.size());
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.log_prob > b.log_prob; });
    std::vector<Live> next;
    for (std::size_t c = 0; c < keep; ++c) {
      Live h{beam[candidates[c].parent].prefix, candidates[c].log_prob};
      if (candidates[c].token == kEosId) {
        Hypothesis done = finish(h, true);
        done.length += 1;
        finished.push_back(std::move(done));
      } else {
        h.prefix.push_back(candidates[c].token);
        next.push_back(std::move(h));
      }
    }
    beam = std::move(next);
  }
  for (const Live& h : beam) finished.push_back(finish(h, false));

  // First maximum wins, which keeps the earliest-ranked hypothesis on ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i)
    if (finished[i].score() > finished[best].score()) best = i;
  return finished[best];
}

std::vector<TokenId> beam_decode(const Model& model, const MultiModalGraph& graph, std::size_t beam_size,
                                 std::size_t max_len) {
  return beam_search(model, graph, beam_size, max_len).tokens;
}

}  // namespace gmnmt

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include "cli_fixtures.hpp"
#include "gmnmt/cli/grad_check.hpp"
#include "gmnmt/graph/dataset.hpp"
#include "gmnmt/model/search.hpp"
#include "model_fixtures.hpp"
#include "reference_model.hpp"

using namespace gmnmt;
using namespace gmnmt::testing;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && passed) {
      passed = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

struct Encoder {
  ParameterStore store;
  EncoderConfig config;
  EncoderWeights weights;

  Encoder(std::uint64_t seed, std::size_t layers, bool unified = false) {
    config = toy_config().encoder;
    config.n_layers = layers;
    config.unified_parameters = unified;
    Rng rng(seed);
    weights = make_encoder_weights(store, config, 12, rng);
    jitter_parameters(store, rng);
  }

  EncoderOutput run(const MultiModalGraph& g, EncoderTrace* trace = nullptr) const {
    Tape tape(false);
    ForwardContext ctx{tape};
    return encode(ctx, g, weights, config, trace);
  }
};

Model jittered_model(const ModelConfig& c, std::uint64_t seed) {
  Model m(c, seed);
  Rng rng(seed ^ 0x5eedULL);
  jitter_parameters(m.parameters(), rng);
  return m;
}

Tensor decode(const Model& m, const std::vector<TokenId>& prefix, const EncoderOutput& enc) {
  Tape tape(false);
  ForwardContext ctx{tape};
  return decode_states(ctx, prefix, enc, m.decoder_weights(), m.config().decoder);
}

double max_diff(const reference::Mat& a, const Tensor& b) {
  double m = 0.0;
  const std::size_t c = b.rank() == 2 ? b.dim(1) : 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) m = std::max(m, std::abs(a[i][j] - b.data()[i * c + j]));
  return m;
}

reference::Mat rows(const Tensor& t) { return t.dim(0) == 0 ? reference::Mat{} : reference::mat(t); }

std::size_t first_count(const std::string& report) {
  const auto colon = report.find(':');
  return std::stoul(report.substr(colon + 1));
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
  Outcome o;
  const auto t0 = Clock::now();
  const CliResult r = run_gmnmt({"grad-check", "--ablation", "all"});
  const double secs = seconds_since(t0);
  std::size_t passes = 0;
  double worst = 0.0;
  for (const auto& line : lines_of(r.out)) {
    if (line.rfind("PASS", 0) == 0) ++passes;
    if (line.rfind("PASS worst ", 0) == 0 || line.rfind("FAIL worst ", 0) == 0)
      worst = std::max(worst, std::stod(line.substr(11)));
  }
  o.require(r.code == 0, "grad-check exit code " + std::to_string(r.code) + "\n" + r.out);
  o.require(passes == 1 + all_ablations().size(), "expected a PASS for the default model and every ablation");
  o.require(secs < 300.0, "runtime " + fmt("%.0f", secs) + " s exceeds 5 minutes");
  if (o.passed)
    o.detail = std::to_string(passes) + " configurations, worst relative error " + fmt("%.2e", worst) + ", " +
               fmt("%.0f", secs) + " s";
  return o;
}

Outcome overfit() {
  Outcome o;
  TempDir dir("overfit");
  const auto t0 = Clock::now();
  o.require(run_gmnmt({"synth", "--out", dir / "copy.jsonl", "--pairs", "32", "--seed", "1"}).code == 0, "synth failed");
  const CliResult tr = run_gmnmt({"train", "--train", dir / "copy.jsonl", "--valid", dir / "copy.jsonl",
                                  "--checkpoint-dir", dir / "ck", "--d-model", "32", "--d-ff", "64", "--heads", "4",
                                  "--encoder-layers", "2", "--decoder-layers", "2", "--dropout", "0.1", "--max-steps",
                                  "2000", "--seed", "1", "--init-seed", "1"});
  o.require(tr.code == 0, "train failed: " + tr.err);
  if (!o.passed) return o;
  const std::string marker = "validation loss: ";
  const double nll = std::stod(tr.out.substr(tr.out.find(marker) + marker.size()));
  o.require(nll < 0.1, "training-set NLL " + fmt("%.4f", nll) + " is not below 0.1");

  const CliResult hyp = run_gmnmt({"translate", "--checkpoint", dir / "ck", "--input", dir / "copy.jsonl"});
  o.require(hyp.code == 0, "translate failed: " + hyp.err);
  const auto raw = read_jsonl(dir / "copy.jsonl");
  std::string refs;
  for (const auto& r : raw) {
    std::string line;
    for (const auto& w : r.target) line += (line.empty() ? "" : " ") + w;
    refs += line + "\n";
  }
  write_file(dir / "hyp.txt", hyp.out);
  write_file(dir / "ref.txt", refs);
  const auto h = lines_of(hyp.out), rf = lines_of(refs);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < std::min(h.size(), rf.size()); ++i) exact += h[i] == rf[i];
  const double rate = static_cast<double>(exact) / static_cast<double>(raw.size());
  o.require(rate >= 0.9, "exact match " + std::to_string(exact) + "/" + std::to_string(raw.size()));
  const CliResult bleu = run_gmnmt({"evaluate", "--hyp", dir / "hyp.txt", "--ref", dir / "ref.txt"});
  const double score = bleu.code == 0 ? std::stod(bleu.out) : -1.0;
  o.require(score >= 95.0, "BLEU " + fmt("%.2f", score));
  const double secs = seconds_since(t0);
  o.require(secs < 600.0, "runtime " + fmt("%.0f", secs) + " s exceeds 10 minutes");
  if (o.passed)
    o.detail = "NLL " + fmt("%.4f", nll) + ", exact " + std::to_string(exact) + "/" + std::to_string(raw.size()) +
               ", BLEU " + fmt("%.2f", score) + ", " + fmt("%.0f", secs) + " s";
  return o;
}

Outcome degeneration() {
  Outcome o;
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 100 && o.passed; ++seed) {
    ModelConfig c = toy_config();
    c.encoder.unified_parameters = seed % 2 == 1;
    const Model m = jittered_model(c, seed);
    Rng rng(9000 + seed);
    const MultiModalGraph with_edges = random_graph(rng, 12, 16, 6, 3, 0.5);
    const MultiModalGraph g({with_edges.textual_nodes().begin(), with_edges.textual_nodes().end()},
                            {with_edges.visual_features().begin(), with_edges.visual_features().end()}, 16, {});
    const MultiModalGraph moved = g.with_visual_features(random_features(rng, g.visual_size() * 16));
    const std::size_t max_len = default_max_len(g.text_size());
    const auto a = greedy_decode(m, g, max_len);
    const auto b = greedy_decode(m, moved, max_len);
    o.require(a == b, "greedy output changed at seed " + std::to_string(seed));
    o.require(beam_decode(m, g, 3, max_len) == beam_decode(m, moved, 3, max_len),
              "beam output changed at seed " + std::to_string(seed));
    std::vector<TokenId> target{kBosId};
    for (std::size_t i = 0; i < 4; ++i) target.push_back(static_cast<TokenId>(kFirstWordId + rng.below(6)));
    target.push_back(kEosId);
    const auto la = m.score_target(g, target);
    const auto lb = m.score_target(moved, target);
    o.require(la == lb, "per-token log-probabilities changed at seed " + std::to_string(seed));
    ++checked;
  }
  if (o.passed) o.detail = std::to_string(checked) + " edgeless graphs, greedy, beam 3 and per-token scores bit-identical";
  return o;
}

Outcome structural_invariants() {
  Outcome o;
  constexpr std::uint64_t kSeeds = 100;
  std::size_t rows_checked = 0, gates_checked = 0, locality_nodes = 0;
  for (std::uint64_t seed = 0; seed < kSeeds && o.passed; ++seed) {
    const std::string at = " (seed " + std::to_string(seed) + ")";
    Rng rng(1000 + seed);
    Encoder enc(seed, 2, seed % 4 == 3);
    const MultiModalGraph g = random_graph(rng, 12, 16, 6, 3, 0.4);
    EncoderTrace trace;
    const EncoderOutput out = enc.run(g, &trace);

    // Attention rows and gates.
    for (const auto& layer : trace.layers) {
      for (const Tensor* a : {&layer.text_attention, &layer.visual_attention}) {
        const std::size_t keys = a->dim(2);
        for (std::size_t r = 0; keys > 0 && r < a->numel() / keys; ++r) {
          double total = 0.0;
          for (std::size_t k = 0; k < keys; ++k) total += a->data()[r * keys + k];
          o.require(std::abs(total - 1.0) <= 1e-9, "attention row sums to " + fmt("%.12f", total) + at);
          ++rows_checked;
        }
      }
      for (const Tensor* gate : {&layer.alpha, &layer.beta})
        for (double v : gate->data()) {
          o.require(v > 0.0 && v < 1.0, "gate value " + fmt("%.17g", v) + " outside (0,1)" + at);
          ++gates_checked;
        }
    }

    // Visual permutation equivariance.
    const std::size_t no = g.visual_size();
    std::vector<std::size_t> perm(no);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    std::vector<double> pf(no * 16);
    for (std::size_t j = 0; j < no; ++j)
      std::copy_n(g.visual_feature(j).begin(), 16, pf.begin() + static_cast<long>(perm[j] * 16));
    std::vector<InterEdge> pe;
    for (const InterEdge& e : g.edges()) pe.push_back({e.text, perm[e.object]});
    const EncoderOutput pout = enc.run(MultiModalGraph({g.textual_nodes().begin(), g.textual_nodes().end()}, pf, 16, pe));
    o.require(max_abs_diff(out.text.data(), pout.text.data()) < 1e-12, "permutation changed H_x" + at);
    for (std::size_t j = 0; j < no; ++j)
      o.require(max_abs_diff(out.visual.data().subspan(j * 8, 8), pout.visual.data().subspan(perm[j] * 8, 8)) < 1e-12,
                "H_o not permuted consistently" + at);

    // Causal mask: changing tokens at positions >= k leaves states < k bit-identical.
    const Model m = jittered_model(toy_config(), seed);
    const EncoderOutput e2{random_tensor(rng, {1 + rng.below(5), 8}, false), random_tensor(rng, {1 + rng.below(3), 8}, false)};
    std::vector<TokenId> prefix{kBosId};
    const std::size_t len = 2 + rng.below(5);
    while (prefix.size() < len) prefix.push_back(static_cast<TokenId>(rng.below(10)));
    const std::size_t k = 1 + rng.below(len - 1);
    std::vector<TokenId> changed = prefix;
    for (std::size_t i = k; i < len; ++i) changed[i] = static_cast<TokenId>((changed[i] + 1 + rng.below(9)) % 10);
    const Tensor s1 = decode(m, prefix, e2), s2 = decode(m, changed, e2);
    o.require(std::equal(s1.data().begin(), s1.data().begin() + static_cast<long>(k * 8), s2.data().begin()),
              "future tokens leaked into earlier decoder states" + at);

    // One-layer locality.
    Encoder one(seed, 1);
    const MultiModalGraph lg = random_graph(rng, 12, 16, 6, 3, 0.3);
    if (lg.visual_size() > 0) {
      const std::size_t j = rng.below(lg.visual_size());
      std::vector<double> f(lg.visual_features().begin(), lg.visual_features().end());
      for (std::size_t c = 0; c < 16; ++c) f[j * 16 + c] += rng.uniform(-1.0, 1.0);
      const EncoderOutput la = one.run(lg), lb = one.run(lg.with_visual_features(f));
      Tape tape(false);
      ForwardContext ctx{tape};
      const Tensor cx = random_tensor(rng, {lg.text_size(), 8}, false);
      Tensor co = random_tensor(rng, {lg.visual_size(), 8}, false);
      const auto& lw = one.weights.layers[0].text;
      const Tensor m1 = cross_modal_gate_text(ctx, cx, co, lg.edges(), lw.gate_self, lw.gate_other);
      for (std::size_t c = 0; c < 8; ++c) co.mutable_data()[j * 8 + c] += 1.0;
      const Tensor m2 = cross_modal_gate_text(ctx, cx, co, lg.edges(), lw.gate_self, lw.gate_other);
      for (std::size_t i = 0; i < lg.text_size(); ++i) {
        const auto nb = lg.neighbors_visual(i);
        if (nb.empty()) {
          o.require(max_abs_diff(la.text.data().subspan(i * 8, 8), lb.text.data().subspan(i * 8, 8)) == 0.0,
                    "text node without visual neighbors changed" + at);
          ++locality_nodes;
        }
        if (std::find(nb.begin(), nb.end(), j) == nb.end())
          o.require(max_abs_diff(m1.data().subspan(i * 8, 8), m2.data().subspan(i * 8, 8)) == 0.0,
                    "gated aggregation depends on a non-neighbor object" + at);
      }
    }

    // Simplified attention returns a lone visual node unchanged.
    Encoder lone(seed, 2, seed % 2 == 1);
    const MultiModalGraph sg({4, 5, 6}, random_features(rng, 16), 16, {{0, 0}, {rng.below(3), 0}});
    Tape tape(false);
    ForwardContext ctx{tape};
    LayerStates s{embed_textual(ctx, sg.textual_nodes(), lone.weights.embedding, 0.0),
                  embed_visual(ctx, Tensor::from({1, 16}, {sg.visual_features().begin(), sg.visual_features().end()}),
                               lone.weights.visual_projection)};
    for (std::size_t l = 0; l < 2; ++l) {
      FusionLayerTrace tr;
      const LayerStates next = fusion_layer(ctx, s, sg, lone.weights.layers[l], lone.config, l == 1, &tr);
      if (!lone.config.unified_parameters)
        o.require(bit_equal(tr.visual_attention_out, s.visual), "lone visual node altered by attention" + at);
      s = next;
    }
  }
  if (o.passed)
    o.detail = std::to_string(kSeeds) + " seeds: " + std::to_string(rows_checked) + " attention rows, " +
               std::to_string(gates_checked) + " gates, " + std::to_string(locality_nodes) +
               " unlinked text nodes; locality checked on unlinked nodes and gated aggregation";
  return o;
}

Outcome figure_one_graph() {
  Outcome o;
  TempDir dir("fig");
  o.require(run_gmnmt({"synth", "--out", dir / "fig.jsonl", "--figure-one"}).code == 0, "synth failed");
  const auto r = lines_of(run_gmnmt({"inspect-graph", "--data", dir / "fig.jsonl"}).out);
  const auto f = lines_of(run_gmnmt({"inspect-graph", "--data", dir / "fig.jsonl", "--fully-connected-grounding"}).out);
  o.require(r.size() > 3 && r[0] == "textual nodes: 8", "textual node count");
  o.require(r.size() > 3 && r[1] == "visual nodes: 3", "visual node count");
  o.require(r.size() > 3 && r[2] == "inter-modal edges: 7", "edge count");
  o.require(r.size() > 3 && r[3] == "edges: 0-0 0-1 1-0 1-1 5-2 6-2 7-2", "edge list");
  o.require(f.size() > 3 && f[2] == "inter-modal edges: 24", "fully connected edge count");
  if (o.passed) o.detail = "8 textual, 3 visual, edges {0-0 0-1 1-0 1-1 5-2 6-2 7-2}; fully connected 24";
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(300 + seed);
    const MultiModalGraph g = random_graph(rng, 12, 16, 6, 3, 0.5);
    for (bool unified : {false, true}) {
      Encoder enc(seed * 2 + unified, 2, unified);
      for (bool last : {false, true}) {
        LayerStates in{random_tensor(rng, {g.text_size(), 8}, false), random_tensor(rng, {g.visual_size(), 8}, false)};
        Tape tape(false);
        ForwardContext ctx{tape};
        const auto& lw = enc.weights.layers[last ? 1 : 0];
        const LayerStates out = fusion_layer(ctx, in, g, lw, enc.config, last);
        const auto ref = reference::fusion_layer({rows(in.text), rows(in.visual)}, g.edges(), lw, enc.config, last);
        worst = std::max({worst, max_diff(ref.text, out.text), max_diff(ref.visual, out.visual)});
      }
    }
    for (DecoderAttend mode : {DecoderAttend::Textual, DecoderAttend::Visual, DecoderAttend::Both}) {
      ModelConfig c = toy_config();
      c.decoder.attend = mode;
      const Model m = jittered_model(c, seed);
      const EncoderOutput enc{random_tensor(rng, {1 + rng.below(5), 8}, false),
                              random_tensor(rng, {1 + rng.below(3), 8}, false)};
      std::vector<TokenId> prefix{kBosId};
      while (prefix.size() < 2 + seed % 4) prefix.push_back(static_cast<TokenId>(rng.below(10)));
      const auto ref = reference::decode_states(prefix, reference::mat(enc.text), reference::mat(enc.visual),
                                                m.decoder_weights(), m.config().decoder);
      worst = std::max(worst, max_diff(ref, decode(m, prefix, enc)));
    }
  }
  o.require(worst < 1e-10, "max deviation " + fmt("%.3e", worst));
  if (o.passed) o.detail = "fusion layer and decoder states over 20 seeds, max deviation " + fmt("%.2e", worst);
  return o;
}

Outcome bleu_fixtures() {
  Outcome o;
  TempDir dir("bleu");
  const auto score = [&](const std::string& hyp, const std::string& ref) {
    write_file(dir / "h", hyp);
    write_file(dir / "r", ref);
    const CliResult r = run_gmnmt({"evaluate", "--hyp", dir / "h", "--ref", dir / "r"});
    return r.code == 0 ? r.out : "exit " + std::to_string(r.code);
  };
  const std::string perfect = score("a b c d e\nx y z w\n", "a b c d e\nx y z w\n");
  const std::string disjoint = score("a b c d\n", "e f g h\n");
  // 9/10, 6/8, 3/6, 1/4 clipped n-gram matches, no brevity penalty.
  const std::string mixed = score("the cat sat on the mat\na dog runs fast\n", "the cat is on the mat\na dog runs fast\n");
  const std::string expected = fmt("%.2f", 100.0 * std::pow(0.9 * 0.75 * 0.5 * 0.25, 0.25)) + "\n";
  o.require(perfect == "100.00\n", "perfect match gave " + perfect);
  o.require(disjoint == "0.00\n", "disjoint gave " + disjoint);
  o.require(mixed == expected, "mixed case gave " + mixed + " expected " + expected);
  if (o.passed) o.detail = "100.00, 0.00, " + expected.substr(0, expected.size() - 1);
  return o;
}

Outcome determinism() {
  Outcome o;
  TempDir dir("determinism");
  o.require(run_gmnmt({"synth", "--out", dir / "data.jsonl", "--pairs", "8", "--seed", "3", "--feature-dim", "64"}).code ==
                0,
            "synth failed");
  const auto train = [&](const std::string& sub) {
    return run_gmnmt({"train", "--train", dir / "data.jsonl", "--checkpoint-dir", dir / sub, "--feature-dim", "64",
                      "--d-model", "16", "--d-ff", "32", "--heads", "2", "--max-steps", "30", "--warmup-steps", "10",
                      "--checkpoint-every", "10", "--dropout", "0.1", "--seed", "7"});
  };
  const CliResult a = train("a"), b = train("b");
  o.require(a.code == 0 && b.code == 0, "train failed: " + a.err + b.err);
  std::size_t files = 0;
  for (const std::string name : {"loss.csv", "model.ckpt", "step-10.ckpt", "step-20.ckpt", "step-30.ckpt"}) {
    const std::string x = read_file(dir.path() / "a" / name), y = read_file(dir.path() / "b" / name);
    o.require(!x.empty() && x == y, name + " differs between runs");
    ++files;
  }
  o.require(lines_of(read_file(dir.path() / "a" / "loss.csv")).size() == 31, "loss.csv should have 30 rows");
  if (o.passed) o.detail = std::to_string(files) + " files byte-identical across two 30-step runs with dropout";
  return o;
}

Outcome parameter_accounting() {
  Outcome o;
  const CliResult base = run_gmnmt({"params"});
  const CliResult unified = run_gmnmt({"params", "--unified-parameters"});
  o.require(base.code == 0 && unified.code == 0, "params failed");
  if (!o.passed) return o;
  const std::size_t nb = first_count(base.out), nu = first_count(unified.out);
  o.require(nu < nb, "unified " + std::to_string(nu) + " is not below default " + std::to_string(nb));
  o.require(lines_of(base.out).size() > 10, "report lacks per-group lines");
  o.require(base.out.find("enc.visual.attn") != std::string::npos && unified.out.find("enc.visual.") == std::string::npos,
            "per-group report does not show the shared visual groups");
  if (o.passed)
    o.detail = "default " + std::to_string(nb) + ", unified " + std::to_string(nu) + " (" + std::to_string(nb - nu) +
               " fewer) with per-group counts";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"overfit oracle", overfit},
      {"degeneration without inter-modal edges", degeneration},
      {"structural invariants", structural_invariants},
      {"graph construction", figure_one_graph},
      {"oracle equivalence", oracle_equivalence},
      {"BLEU correctness", bleu_fixtures},
      {"training determinism", determinism},
      {"parameter accounting", parameter_accounting},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.passed;
    std::cout << (o.passed ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

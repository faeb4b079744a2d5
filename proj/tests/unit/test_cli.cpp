#include <cmath>

#include "cli_fixtures.hpp"
#include "doctest.h"
#include "gmnmt/cli/bleu.hpp"
#include "gmnmt/cli/checkpoint.hpp"
#include "gmnmt/cli/run_config.hpp"
#include "gmnmt/core/errors.hpp"
#include "gmnmt/graph/dataset.hpp"
#include "gmnmt/graph/synthetic.hpp"
#include "gmnmt/model/search.hpp"
#include "model_fixtures.hpp"

using namespace gmnmt;
using namespace gmnmt::testing;

namespace {

const std::vector<std::string> kTinyModel{"--feature-dim", "16", "--d-model", "8",  "--d-ff",
                                          "12",            "--heads", "2",        "--encoder-layers", "1",
                                          "--decoder-layers", "1"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void write_corpus(const std::string& path, std::size_t pairs, std::uint64_t seed = 4) {
  SyntheticOptions opt;
  opt.pairs = pairs;
  opt.word_types = 8;
  opt.feature_dim = 16;
  opt.seed = seed;
  write_jsonl(path, make_copy_corpus(opt));
}

CliResult train_tiny(const TempDir& dir, const std::string& sub, const std::string& data) {
  return run_gmnmt(concat({"train", "--train", data, "--checkpoint-dir", dir / sub, "--max-steps", "6",
                           "--warmup-steps", "4", "--checkpoint-every", "3", "--seed", "11"},
                          kTinyModel));
}

}  // namespace

TEST_CASE("corpus BLEU fixtures") {
  CHECK(format_bleu(corpus_bleu({"a b c d e", "x y z w"}, {"a b c d e", "x y z w"})) == "100.00");
  CHECK(format_bleu(corpus_bleu({"a b c d"}, {"e f g h"})) == "0.00");

  // Two sentences: clipped matches 9/10, 6/8, 3/6, 1/4 and equal lengths.
  const std::vector<std::string> hyp{"the cat sat on the mat", "a dog runs fast"};
  const std::vector<std::string> ref{"the cat is on the mat", "a dog runs fast"};
  const BleuStats s = corpus_bleu_stats(hyp, ref);
  CHECK(s.matches == std::array<std::size_t, 4>{9, 6, 3, 1});
  CHECK(s.totals == std::array<std::size_t, 4>{10, 8, 6, 4});
  CHECK(std::abs(corpus_bleu(hyp, ref) - 100.0 * std::pow(0.9 * 0.75 * 0.5 * 0.25, 0.25)) < 1e-9);
  CHECK(format_bleu(corpus_bleu(hyp, ref)) == "53.90");

  // Short hypothesis with perfect precision: only the brevity penalty remains.
  CHECK(std::abs(corpus_bleu({"the cat is on the"}, {"the cat is on the mat"}) - 100.0 * std::exp(1.0 - 6.0 / 5.0)) <
        1e-9);
  // Repeated words are clipped by the reference count.
  CHECK(corpus_bleu_stats({"the the the the"}, {"the cat"}).matches[0] == 1);
  CHECK_THROWS_AS(corpus_bleu({"a"}, {"a", "b"}), DataError);
}

TEST_CASE("evaluate command") {
  TempDir dir("eval");
  write_file(dir / "hyp", "a b c d e\nx y z w\n");
  write_file(dir / "ref", "a b c d e\nx y z w\n");
  write_file(dir / "short", "a b c d e\n");
  auto r = run_gmnmt({"evaluate", "--hyp", dir / "hyp", "--ref", dir / "ref"});
  CHECK(r.code == 0);
  CHECK(r.out == "100.00\n");
  CHECK(run_gmnmt({"evaluate", "--hyp", dir / "hyp", "--ref", dir / "short"}).code == kExitEvaluation);
  CHECK(run_gmnmt({"evaluate", "--hyp", dir / "missing", "--ref", dir / "ref"}).code == kExitInput);
  CHECK(run_gmnmt({"evaluate", "--hyp", dir / "hyp"}).code == kExitInput);
  CHECK(run_gmnmt({"no-such-command"}).code == kExitInput);
  CHECK(run_gmnmt({"--help"}).code == kExitOk);
}

TEST_CASE("configuration files and precedence") {
  const auto kv = parse_key_values("# comment\nd_model = 16\n\n  dropout=0.25 # trailing\n", "test");
  CHECK(kv.at("d_model") == "16");
  CHECK(kv.at("dropout") == "0.25");
  try {
    parse_key_values("d_model = 16\nnot a pair\n", "bad.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.cfg line 2") != std::string::npos);
  }

  RunConfig c;
  CHECK_THROWS_AS(c.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("d_model", "sixteen"), ConfigError);
  CHECK_THROWS_AS(c.set("decoder_attend", "sideways"), ConfigError);
  c.set("decoder_attend", "both");
  c.set("unified_parameters", "true");
  c.set("warmup_steps", "123");
  RunConfig back;
  for (const auto& [k, v] : parse_key_values(format_key_values(c.entries()), "roundtrip")) back.set(k, v);
  CHECK(back.entries() == c.entries());
  CHECK(back.decoder.attend == DecoderAttend::Both);
  CHECK(back.train.warmup_steps == 123);

  // Flags override the file, which overrides defaults.
  TempDir dir("cfg");
  write_file(dir / "run.cfg", "d_model = 16\nd_ff = 32\nn_heads = 2\nfeature_dim = 16\n");
  const auto count = [](const std::string& report) { return report.substr(0, report.find('\n')); };
  const auto from_file = run_gmnmt({"params", "--config", dir / "run.cfg"});
  const auto overridden = run_gmnmt({"params", "--config", dir / "run.cfg", "--d-model", "8"});
  const auto direct = run_gmnmt({"params", "--d-model", "8", "--d-ff", "32", "--heads", "2", "--feature-dim", "16"});
  REQUIRE(from_file.code == 0);
  CHECK(count(from_file.out) != count(overridden.out));
  CHECK(count(overridden.out) == count(direct.out));
  write_file(dir / "broken.cfg", "d_model = 16\n= 3\n");
  CHECK(run_gmnmt({"params", "--config", dir / "broken.cfg"}).code == kExitInput);
  CHECK(run_gmnmt({"params", "--set", "heads=3"}).code == kExitInput);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("ckpt");
  ModelConfig mc = toy_config();
  Model a(mc, 5);
  Rng rng(2);
  jitter_parameters(a.parameters(), rng);
  Adam opt(a.parameters());
  for (auto& p : a.parameters().entries())
    for (double& g : p.tensor.mutable_grad()) g = rng.uniform(-1.0, 1.0);
  opt.step(1e-3);

  const std::map<std::string, std::string> cfg{{"d_model", "8"}};
  write_checkpoint(dir / "a.ckpt", make_checkpoint(a, cfg, &opt));
  const Checkpoint ck = read_checkpoint(dir / "a.ckpt");
  CHECK(ck.config == cfg);
  REQUIRE(ck.optimizer.has_value());
  CHECK(ck.optimizer->steps == 1);
  CHECK(ck.optimizer->m == opt.first_moments());

  Model b(mc, 99);
  load_parameters(b, ck);
  for (std::size_t i = 0; i < a.parameters().entries().size(); ++i) {
    const auto& pa = a.parameters().entries()[i].tensor;
    const auto& pb = b.parameters().entries()[i].tensor;
    for (std::size_t k = 0; k < pa.numel(); ++k)
      REQUIRE(std::abs(pa.data()[k] - pb.data()[k]) <= 1e-6 * std::max(1.0, std::abs(pa.data()[k])));
  }
  Adam opt_b(b.parameters());
  opt_b.restore(ck.optimizer->steps, ck.optimizer->m, ck.optimizer->v);
  write_checkpoint(dir / "b.ckpt", make_checkpoint(b, cfg, &opt_b));
  CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));

  ModelConfig wider = mc;
  wider.encoder.d_ff = wider.decoder.d_ff = 16;
  Model c(wider, 5);
  try {
    load_parameters(c, ck);
    FAIL("expected CheckpointMismatch");
  } catch (const CheckpointMismatch& e) {
    CHECK(std::string(e.what()).find("shape") != std::string::npos);
  }

  std::string bytes = read_file(dir / "a.ckpt");
  write_file(dir / "truncated.ckpt", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS(read_checkpoint(dir / "truncated.ckpt"));
  write_file(dir / "trailing.ckpt", bytes + "x");
  CHECK_THROWS(read_checkpoint(dir / "trailing.ckpt"));
  bytes[0] = 'X';
  write_file(dir / "magic.ckpt", bytes);
  CHECK_THROWS(read_checkpoint(dir / "magic.ckpt"));
}

TEST_CASE("train and translate through the command line") {
  TempDir dir("train");
  write_corpus(dir / "train.jsonl", 6);

  const auto first = train_tiny(dir, "a", dir / "train.jsonl");
  REQUIRE_MESSAGE(first.code == 0, first.err);
  const auto second = train_tiny(dir, "b", dir / "train.jsonl");
  REQUIRE(second.code == 0);
  CHECK(first.out == second.out);
  CHECK(lines_of(read_file(dir / "a/loss.csv")).size() == 7);
  CHECK(read_file(dir / "a/loss.csv") == read_file(dir / "b/loss.csv"));
  CHECK(read_file(dir / "a/model.ckpt") == read_file(dir / "b/model.ckpt"));
  CHECK(std::filesystem::exists(dir / "a/step-3.ckpt"));
  CHECK(std::filesystem::exists(dir / "a/step-6.ckpt"));

  // Greedy output from the command line matches a width-1 beam on the loaded model.
  const auto greedy = run_gmnmt({"translate", "--checkpoint", dir / "a", "--input", dir / "train.jsonl"});
  REQUIRE_MESSAGE(greedy.code == 0, greedy.err);
  const Checkpoint ck = read_checkpoint(dir / "a/model.ckpt");
  RunConfig rc;
  for (const auto& [k, v] : ck.config)
    if (k != "source_vocab" && k != "target_vocab") rc.set(k, v);
  const Vocabulary sv = Vocabulary::load(dir / "a/src.vocab");
  const Vocabulary tv = Vocabulary::load(dir / "a/tgt.vocab");
  Model m(rc.model_config(sv.size(), tv.size()), 0);
  load_parameters(m, ck);
  const auto raw = read_jsonl(dir / "train.jsonl", 16);
  const auto lines = lines_of(greedy.out);
  REQUIRE(lines.size() == raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Example ex = make_example(raw[i], sv, tv, rc.graph_options());
    CHECK(tv.decode(beam_decode(m, ex.graph, 1, default_max_len(ex.graph.text_size()))) == lines[i]);
  }
  const auto beam = run_gmnmt({"translate", "--checkpoint", dir / "a/model.ckpt", "--input", dir / "train.jsonl",
                               "--beam", "3", "--introspect", dir / "trace.jsonl"});
  CHECK(beam.code == 0);
  CHECK(lines_of(beam.out).size() == raw.size());
  CHECK(lines_of(read_file(dir / "trace.jsonl")).size() == raw.size());

  write_file(dir / "empty.jsonl", "");
  const auto empty = run_gmnmt({"translate", "--checkpoint", dir / "a", "--input", dir / "empty.jsonl"});
  CHECK(empty.code == 0);
  CHECK(empty.out.empty());

  SUBCASE("errors map to exit codes") {
    CHECK(run_gmnmt({"translate", "--checkpoint", dir / "a", "--input", dir / "train.jsonl", "--d-model", "16"})
              .code == kExitCheckpoint);
    CHECK(run_gmnmt({"translate", "--checkpoint", dir / "nowhere", "--input", dir / "train.jsonl"}).code ==
          kExitInput);
    CHECK(run_gmnmt({"translate", "--checkpoint", dir / "a", "--input", dir / "missing.jsonl"}).code == kExitInput);
    write_file(dir / "bad.jsonl", "{\"src\": [\"a\"], \"tgt\": [\"a\"]}\n{not json\n");
    const auto bad = run_gmnmt(concat({"train", "--train", dir / "bad.jsonl", "--checkpoint-dir", dir / "c"}, kTinyModel));
    CHECK(bad.code == kExitInput);
    CHECK(bad.err.find("bad.jsonl") != std::string::npos);
  }
  SUBCASE("visual-only decoder rejects object-free data") {
    write_file(dir / "plain.jsonl", "{\"src\": [\"a\", \"b\"], \"tgt\": [\"a\", \"b\"]}\n");
    const auto r = run_gmnmt(concat({"train", "--train", dir / "plain.jsonl", "--checkpoint-dir", dir / "d",
                                     "--decoder-attend", "visual"},
                                    kTinyModel));
    CHECK(r.code == kExitInput);
    CHECK(r.err.find("visual") != std::string::npos);
  }
}

TEST_CASE("inspect-graph on the two-boys example") {
  TempDir dir("graph");
  REQUIRE(run_gmnmt({"synth", "--out", dir / "fig.jsonl", "--figure-one"}).code == 0);
  const auto r = run_gmnmt({"inspect-graph", "--data", dir / "fig.jsonl", "--line", "1"});
  REQUIRE(r.code == 0);
  const auto lines = lines_of(r.out);
  CHECK(lines[0] == "textual nodes: 8");
  CHECK(lines[1] == "visual nodes: 3");
  CHECK(lines[2] == "inter-modal edges: 7");
  CHECK(lines[4] == "token 0 two: 0 1");
  CHECK(lines[6] == "token 2 are: -");
  CHECK(lines[11] == "token 7 car: 2");
  const auto full = run_gmnmt({"inspect-graph", "--data", dir / "fig.jsonl", "--fully-connected-grounding"});
  CHECK(lines_of(full.out)[2] == "inter-modal edges: 24");
  CHECK(run_gmnmt({"inspect-graph", "--data", dir / "fig.jsonl", "--line", "2"}).code == kExitInput);
  CHECK(run_gmnmt({"inspect-graph", "--data", dir / "fig.jsonl", "--line", "0"}).code == kExitInput);
}

TEST_CASE("grad-check with zero tolerance fails") {
  const auto r = run_gmnmt({"grad-check", "--tolerance", "0", "--ablation", "no-inter-modal-fusion"});
  CHECK(r.code == kExitFailure);
  CHECK(r.out.find("FAIL worst") != std::string::npos);
  CHECK(run_gmnmt({"grad-check", "--ablation", "sideways"}).code == kExitInput);
}

TEST_CASE("unified parameters shrink the parameter report") {
  const auto base = run_gmnmt({"params", "--feature-dim", "16"});
  const auto unified = run_gmnmt({"params", "--feature-dim", "16", "--unified-parameters"});
  REQUIRE(base.code == 0);
  REQUIRE(unified.code == 0);
  CHECK(base.out.find("enc.visual.gate") != std::string::npos);
  CHECK(unified.out.find("enc.visual.") == std::string::npos);
  CHECK(base.out.substr(0, base.out.find('\n')) != unified.out.substr(0, unified.out.find('\n')));
}

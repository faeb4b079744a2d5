#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "gmnmt/core/errors.hpp"
#include "gmnmt/graph/synthetic.hpp"
#include "gmnmt/train/trainer.hpp"
#include "model_fixtures.hpp"

using namespace gmnmt;
using namespace gmnmt::testing;

namespace {

struct TinyCorpus {
  Vocabulary source, target;
  std::vector<Example> examples;
};

TinyCorpus tiny_corpus(std::size_t pairs, std::uint64_t seed = 3) {
  SyntheticOptions opt;
  opt.pairs = pairs;
  opt.word_types = 8;
  opt.feature_dim = 16;
  opt.seed = seed;
  const auto raw = make_copy_corpus(opt);
  std::vector<std::vector<std::string>> s, t;
  for (const auto& r : raw) {
    s.push_back(r.source);
    t.push_back(r.target);
  }
  TinyCorpus c{Vocabulary::build(s), Vocabulary::build(t), {}};
  GraphOptions g;
  g.feature_dim = 16;
  for (const auto& r : raw) c.examples.push_back(make_example(r, c.source, c.target, g));
  return c;
}

ModelConfig corpus_config(const TinyCorpus& c) {
  ModelConfig m = toy_config();
  m.source_vocab = c.source.size();
  m.target_vocab = c.target.size();
  m.encoder.dropout = m.decoder.dropout = 0.1;
  return m;
}

std::vector<double> parameter_bytes(const Model& m) {
  std::vector<double> all;
  for (const auto& p : m.parameters().entries()) all.insert(all.end(), p.tensor.data().begin(), p.tensor.data().end());
  return all;
}

}  // namespace

TEST_CASE("nll_loss over a padded two-sentence batch equals the hand sum") {
  // Sentence A has 3 targets, sentence B has 2 (last slot padded).
  Rng rng(1);
  Tape tape(false);
  const Tensor a = ops::log_softmax(tape, random_tensor(rng, {3, 5}, false, -3.0, 3.0));
  const Tensor b = ops::log_softmax(tape, random_tensor(rng, {2, 5}, false, -3.0, 3.0));
  const std::vector<Tensor> parts{a, b};
  const std::vector<std::int32_t> gold{1, 4, 2, 3, 0, kPadId};
  const std::vector<std::uint8_t> mask{1, 1, 1, 1, 1, 0};
  const double loss = ops::nll_loss(tape, ops::stack_padded(tape, parts, 3), gold, mask).item();
  const double hand = -(a.at({0, 1}) + a.at({1, 4}) + a.at({2, 2}) + b.at({0, 3}) + b.at({1, 0})) / 5.0;
  CHECK(std::abs(loss - hand) < 1e-14);

  const Tensor uniform = Tensor::full({2, 3, 11}, -std::log(11.0));
  CHECK(std::abs(ops::nll_loss(tape, uniform, gold, mask).item() - std::log(11.0)) < 1e-12);
}

TEST_CASE("learning-rate schedule") {
  CHECK(std::abs(lr_schedule(4000, 128, 4000) - std::pow(128.0, -0.5) * std::pow(4000.0, -0.5)) < 1e-18);
  CHECK(std::abs(lr_schedule(1, 128, 4000) - std::pow(128.0, -0.5) * std::pow(4000.0, -1.5)) < 1e-20);
  double prev = 0.0;
  for (std::size_t s = 1; s <= 10 * 400; ++s) {
    const double lr = lr_schedule(s, 64, 400);
    if (s <= 400)
      REQUIRE(lr >= prev);
    else
      REQUIRE(lr <= prev);
    prev = lr;
  }
  CHECK_THROWS_AS(lr_schedule(0, 128, 4000), UsageError);
}

TEST_CASE("Adam") {
  SUBCASE("zero gradients leave parameters unchanged") {
    ParameterStore store;
    Tensor p = store.create("p", {3});
    p.mutable_data()[0] = 1.5;
    Adam opt(store);
    opt.step(0.1);
    CHECK(p.data()[0] == 1.5);
    CHECK(p.data()[1] == 0.0);
  }
  SUBCASE("first step with unit gradient moves by about lr") {
    ParameterStore store;
    Tensor p = store.create("p", {1});
    p.mutable_grad()[0] = 1.0;
    Adam opt(store);
    opt.step(0.01);
    CHECK(std::abs(p.data()[0] + 0.01) < 1e-10);
    CHECK(opt.steps() == 1);
  }
  SUBCASE("quadratic bowl descends monotonically") {
    ParameterStore store;
    Tensor p = store.create("p", {4});
    const double start[4] = {1.0, -2.0, 0.5, 3.0};
    std::copy(start, start + 4, p.mutable_data().begin());
    Adam opt(store);
    auto bowl = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) s += (i + 1.0) * p.data()[i] * p.data()[i];
      return s;
    };
    double prev = bowl();
    for (int step = 0; step < 10; ++step) {
      store.zero_grad();
      for (std::size_t i = 0; i < 4; ++i) p.mutable_grad()[i] = 2.0 * (i + 1.0) * p.data()[i];
      opt.step(0.05);
      const double now = bowl();
      REQUIRE(now < prev);
      prev = now;
    }
  }
  SUBCASE("gradient clipping") {
    ParameterStore store;
    Tensor p = store.create("p", {2});
    p.mutable_grad()[0] = 3.0;
    p.mutable_grad()[1] = 4.0;
    CHECK(clip_grad_norm(store, 1.0) == 5.0);
    CHECK(std::abs(p.grad()[0] - 0.6) < 1e-15);
    CHECK(std::abs(p.grad()[1] - 0.8) < 1e-15);
  }
}

TEST_CASE("make_batches") {
  const TinyCorpus c = tiny_corpus(40);
  SUBCASE("one example is one batch") {
    const std::vector<Example> one{c.examples[0]};
    const auto b = make_batches(one, 2000, 1);
    REQUIRE(b.size() == 1);
    CHECK(b[0].indices == std::vector<std::size_t>{0});
  }
  for (std::size_t cap : {1, 20, 35, 60, 2000}) {
    CAPTURE(cap);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto batches = make_batches(c.examples, cap, seed);
      std::map<std::size_t, int> seen;
      for (const Batch& b : batches) {
        REQUIRE(b.size() > 0);
        REQUIRE((b.tokens <= cap || b.size() == 1));
        for (std::size_t i : b.indices) ++seen[i];
        // Rectangular padding with masks covering exactly the real tokens.
        std::size_t real = 0;
        for (auto m : b.source_mask) real += m;
        for (auto m : b.target_mask) real += m;
        REQUIRE(real == b.tokens);
        REQUIRE(b.target.size() == b.size() * b.target_width);
      }
      REQUIRE(seen.size() == c.examples.size());
      for (const auto& [i, n] : seen) REQUIRE(n == 1);
      const auto again = make_batches(c.examples, cap, seed);
      REQUIRE(again.size() == batches.size());
      for (std::size_t k = 0; k < again.size(); ++k) REQUIRE(again[k].indices == batches[k].indices);
    }
  }
}

TEST_CASE("training is deterministic and logs the schedule") {
  const TinyCorpus c = tiny_corpus(6);
  TrainConfig tc;
  tc.batch_tokens = 40;
  tc.warmup_steps = 10;
  tc.max_steps = 12;
  tc.seed = 5;
  std::vector<std::size_t> checkpoints;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](std::size_t step) { checkpoints.push_back(step); };
  tc.checkpoint_every = 5;

  Model a(corpus_config(c), 9);
  Adam opt_a(a.parameters());
  const auto log_a = train(a, opt_a, c.examples, tc, hooks);
  Model b(corpus_config(c), 9);
  Adam opt_b(b.parameters());
  const auto log_b = train(b, opt_b, c.examples, tc);

  REQUIRE(log_a.size() == 12);
  for (std::size_t i = 0; i < log_a.size(); ++i) {
    CHECK(log_a[i].loss == log_b[i].loss);
    CHECK(log_a[i].step == i + 1);
    CHECK(log_a[i].lr == lr_schedule(i + 1, 8, 10));
  }
  CHECK(parameter_bytes(a) == parameter_bytes(b));
  CHECK(checkpoints == std::vector<std::size_t>{5, 10, 12});

  // A frozen model evaluates identically twice.
  CHECK(evaluate_loss(a, c.examples) == evaluate_loss(a, c.examples));
  CHECK(std::isfinite(evaluate_loss(a, c.examples)));
}

TEST_CASE("training loss decreases on a tiny corpus") {
  const TinyCorpus c = tiny_corpus(4);
  ModelConfig mc = corpus_config(c);
  mc.encoder.dropout = mc.decoder.dropout = 0.0;
  Model m(mc, 2);
  Adam opt(m.parameters());
  const double before = evaluate_loss(m, c.examples);
  TrainConfig tc;
  tc.warmup_steps = 20;
  tc.max_steps = 60;
  tc.lr_scale = 2.0;
  train(m, opt, c.examples, tc);
  CHECK(evaluate_loss(m, c.examples) < 0.5 * before);
}

TEST_CASE("non-finite loss aborts with a batch dump") {
  TinyCorpus c = tiny_corpus(3);
  std::vector<double> f(c.examples[1].graph.visual_features().begin(), c.examples[1].graph.visual_features().end());
  f[0] = std::nan("");
  c.examples[1].graph = c.examples[1].graph.with_visual_features(f);
  Model m(corpus_config(c), 1);
  Adam opt(m.parameters());
  TrainConfig tc;
  tc.max_steps = 5;
  try {
    train(m, opt, c.examples, tc);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("example 1") != std::string::npos);
    CHECK(msg.find("non-finite features") != std::string::npos);
  }
  CHECK_THROWS_AS(train(m, opt, {}, tc), DataError);
  tc.warmup_steps = 0;
  CHECK_THROWS_AS(train(m, opt, c.examples, tc), ConfigError);
}

#include "gmnmt/cli/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "gmnmt/core/errors.hpp"
#include "gmnmt/train/trainer.hpp"

namespace gmnmt {

namespace {

constexpr std::size_t kToyVocab = 11;

std::vector<double> random_features(Rng& rng, std::size_t n) {
  std::vector<double> f(n);
  for (double& v : f) v = rng.uniform(-1.0, 1.0);
  return f;
}

std::vector<Example> toy_batch(Rng& rng, bool fully_connected) {
  struct Spec {
    std::vector<TokenId> source;
    std::vector<PhraseGrounding> groundings;
    std::vector<TokenId> target;
  };
  const std::vector<Spec> specs{
      {{4, 5, 6, 7, 8}, {{0, 2, {}}, {3, 5, {}}}, {kBosId, 9, 5, 10, 4, kEosId}},
      {{9, 10, 4, 6}, {{1, 3, {}}}, {kBosId, 7, 8, 6, kEosId}},
  };
  std::vector<Example> out;
  for (Spec s : specs) {
    for (auto& g : s.groundings) g.objects = {random_features(rng, kVisualFeatureDim)};
    MultiModalGraph graph = fully_connected
                                ? build_fully_connected_graph(s.source, s.groundings, kVisualFeatureDim)
                                : build_graph(s.source, s.groundings, kVisualFeatureDim);
    out.push_back({std::move(graph), s.target});
  }
  return out;
}

double eval_loss(const Model& model, const std::vector<Example>& batch_examples, const Batch& batch) {
  Tape tape(false);
  ForwardContext ctx{tape};
  return batch_loss(ctx, model, batch_examples, batch).item();
}

}  // namespace

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoInterModalFusion: return "no-inter-modal-fusion";
    case Ablation::FullyConnectedGrounding: return "fully-connected-grounding";
    case Ablation::UnifiedParameters: return "unified-parameters";
    case Ablation::DecoderAttendVisual: return "decoder-attend-visual";
    case Ablation::DecoderAttendBoth: return "decoder-attend-both";
  }
  return "none";
}

Ablation parse_ablation(const std::string& name) {
  for (Ablation a : all_ablations())
    if (to_string(a) == name) return a;
  if (name == "none") return Ablation::None;
  throw ConfigError("unknown ablation '" + name + "'");
}

std::vector<Ablation> all_ablations() {
  return {Ablation::NoInterModalFusion, Ablation::FullyConnectedGrounding, Ablation::UnifiedParameters,
          Ablation::DecoderAttendVisual, Ablation::DecoderAttendBoth};
}

double grad_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

GradCheckReport run_grad_check(const GradCheckOptions& options) {
  ModelConfig cfg;
  cfg.encoder.d_model = cfg.decoder.d_model = 8;
  cfg.encoder.d_ff = cfg.decoder.d_ff = 16;
  cfg.encoder.n_heads = cfg.decoder.n_heads = 2;
  cfg.encoder.n_layers = cfg.decoder.n_layers = 2;
  cfg.encoder.dropout = cfg.decoder.dropout = 0.0;
  cfg.source_vocab = cfg.target_vocab = kToyVocab;
  cfg.encoder.inter_modal_fusion = options.ablation != Ablation::NoInterModalFusion;
  cfg.encoder.unified_parameters = options.ablation == Ablation::UnifiedParameters;
  if (options.ablation == Ablation::DecoderAttendVisual) cfg.decoder.attend = DecoderAttend::Visual;
  if (options.ablation == Ablation::DecoderAttendBoth) cfg.decoder.attend = DecoderAttend::Both;

  Model model(cfg, options.seed);
  Rng rng(options.seed + 1);
  for (auto& p : model.parameters().entries())
    for (double& v : p.tensor.mutable_data()) v += rng.uniform(-0.1, 0.1);
  const std::vector<Example> examples = toy_batch(rng, options.ablation == Ablation::FullyConnectedGrounding);
  const std::vector<Batch> batches = make_batches(examples, 1000, 0);

  model.parameters().zero_grad();
  {
    Tape tape;
    ForwardContext ctx{tape};
    tape.backward(batch_loss(ctx, model, examples, batches.front()));
  }

  GradCheckReport report;
  report.ablation = options.ablation;
  for (auto& p : model.parameters().entries()) {
    const std::string group = parameter_group(p.name);
    auto it = std::find_if(report.groups.begin(), report.groups.end(), [&](const GroupError& g) { return g.group == group; });
    if (it == report.groups.end()) {
      report.groups.push_back({group, 0.0, p.name, 0, 0});
      it = report.groups.end() - 1;
    }
    auto data = p.tensor.mutable_data();
    const auto grad = p.tensor.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + options.step;
      const double up = eval_loss(model, examples, batches.front());
      data[i] = orig - options.step;
      const double down = eval_loss(model, examples, batches.front());
      data[i] = orig;
      const double err = grad_rel_error(grad[i], (up - down) / (2.0 * options.step));
      if (it->scalars == 0 || err > it->max_rel_error) {
        it->max_rel_error = err;
        it->worst_parameter = p.name;
        it->worst_index = i;
      }
      ++it->scalars;
    }
  }
  report.worst = report.groups.front();
  for (const auto& g : report.groups)
    if (g.max_rel_error > report.worst.max_rel_error) report.worst = g;
  report.passed = std::all_of(report.groups.begin(), report.groups.end(),
                              [&](const GroupError& g) { return g.max_rel_error < options.tolerance; });
  return report;
}

}  // namespace gmnmt

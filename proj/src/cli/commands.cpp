#include "gmnmt/cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "gmnmt/cli/bleu.hpp"
#include "gmnmt/cli/checkpoint.hpp"
#include "gmnmt/cli/grad_check.hpp"
#include "gmnmt/cli/run_config.hpp"
#include "gmnmt/core/errors.hpp"
#include "gmnmt/graph/synthetic.hpp"
#include "gmnmt/model/search.hpp"

namespace gmnmt {

namespace {

namespace fs = std::filesystem;

struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model and ablation flags shared by train, translate and params.
struct ModelFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::size_t> d_model, d_ff, heads, encoder_layers, decoder_layers, feature_dim;
  std::optional<double> dropout;
  bool no_inter_modal_fusion = false;
  bool fully_connected_grounding = false;
  bool unified_parameters = false;
  std::optional<std::string> decoder_attend;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value configuration file");
    app->add_option("--set", sets, "override one configuration key (key=value)");
    app->add_option("--d-model", d_model);
    app->add_option("--d-ff", d_ff);
    app->add_option("--heads", heads);
    app->add_option("--encoder-layers", encoder_layers);
    app->add_option("--decoder-layers", decoder_layers);
    app->add_option("--feature-dim", feature_dim);
    app->add_option("--dropout", dropout);
    app->add_flag("--no-inter-modal-fusion", no_inter_modal_fusion, "skip gated cross-modal fusion in the encoder");
    app->add_flag("--fully-connected-grounding", fully_connected_grounding, "connect every token to every object");
    app->add_flag("--unified-parameters", unified_parameters, "share textual weights with visual nodes");
    app->add_option("--decoder-attend", decoder_attend, "textual | visual | both")
        ->check(CLI::IsMember({"textual", "visual", "both"}));
  }

  void apply(RunConfig& c) const {
    if (!config_file.empty()) apply_config_file(c, config_file);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (d_model) c.set("d_model", std::to_string(*d_model));
    if (d_ff) c.set("d_ff", std::to_string(*d_ff));
    if (heads) c.set("n_heads", std::to_string(*heads));
    if (encoder_layers) c.set("encoder_layers", std::to_string(*encoder_layers));
    if (decoder_layers) c.set("decoder_layers", std::to_string(*decoder_layers));
    if (feature_dim) c.set("feature_dim", std::to_string(*feature_dim));
    if (dropout) c.encoder.dropout = c.decoder.dropout = *dropout;
    if (no_inter_modal_fusion) c.encoder.inter_modal_fusion = false;
    if (fully_connected_grounding) c.fully_connected_grounding = true;
    if (unified_parameters) c.encoder.unified_parameters = true;
    if (decoder_attend) c.decoder.attend = parse_decoder_attend(*decoder_attend);
  }
};

std::vector<RawExample> read_data(const fs::path& path, std::size_t feature_dim) {
  if (path.empty()) throw ConfigError("no dataset path given");
  if (!fs::exists(path)) throw DataError("data file not found: " + path.string());
  try {
    return read_jsonl(path, feature_dim);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<Example> to_examples(const std::vector<RawExample>& raw, const Vocabulary& sv, const Vocabulary& tv,
                                 const RunConfig& c) {
  std::vector<Example> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(make_example(r, sv, tv, c.graph_options()));
  return out;
}

void check_visual_attend(const RunConfig& c, const std::vector<Example>& examples, const std::string& what) {
  if (c.decoder.attend != DecoderAttend::Visual) return;
  std::size_t empty = 0;
  for (const auto& e : examples) empty += e.graph.visual_size() == 0;
  if (empty > 0)
    throw ConfigError("--decoder-attend visual needs objects in every sentence, but " + std::to_string(empty) + " of " +
                      std::to_string(examples.size()) + " " + what + " sentences have none");
}

void print_parameter_report(std::ostream& out, const ParameterStore& store) {
  const auto groups = parameter_report(store);
  std::size_t width = 0;
  for (const auto& g : groups) width = std::max(width, g.group.size());
  out << "trainable parameters: " << store.scalar_count() << " in " << store.entries().size() << " tensors\n";
  for (const auto& g : groups)
    out << "  " << std::left << std::setw(static_cast<int>(width)) << g.group << std::right << "  tensors "
        << std::setw(3) << g.tensors << "  scalars " << g.scalars << "\n";
}

fs::path checkpoint_file(const fs::path& p) { return fs::is_directory(p) ? p / "model.ckpt" : p; }

std::map<std::string, std::string> snapshot(const RunConfig& c, const ModelConfig& m) {
  auto e = c.model_entries();
  e["source_vocab"] = std::to_string(m.source_vocab);
  e["target_vocab"] = std::to_string(m.target_vocab);
  return e;
}

std::size_t vocab_entry(const std::map<std::string, std::string>& cfg, const std::string& key) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) throw CheckpointMismatch("checkpoint config lacks " + key);
  try {
    return std::stoul(it->second);
  } catch (const std::exception&) {
    throw CheckpointMismatch("checkpoint config has a malformed " + key);
  }
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  ModelFlags model;
  std::string train_path, valid_path, checkpoint_dir;
  std::optional<std::uint64_t> seed, init_seed;
  std::optional<std::size_t> max_steps, warmup_steps, batch_tokens, checkpoint_every;
  std::optional<double> lr_scale, clip_norm;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig c;
  a.model.apply(c);
  if (!a.train_path.empty()) c.train_data = a.train_path;
  if (!a.valid_path.empty()) c.valid_data = a.valid_path;
  if (!a.checkpoint_dir.empty()) c.checkpoint_dir = a.checkpoint_dir;
  if (a.seed) c.train.seed = *a.seed;
  if (a.init_seed) c.init_seed = *a.init_seed;
  if (a.max_steps) c.train.max_steps = *a.max_steps;
  if (a.warmup_steps) c.train.warmup_steps = *a.warmup_steps;
  if (a.batch_tokens) c.train.batch_tokens = *a.batch_tokens;
  if (a.checkpoint_every) c.train.checkpoint_every = *a.checkpoint_every;
  if (a.lr_scale) c.train.lr_scale = *a.lr_scale;
  if (a.clip_norm) c.train.clip_norm = *a.clip_norm;
  c.validate();

  const auto raw = read_data(c.train_data, c.encoder.feature_dim);
  if (raw.empty()) throw DataError(c.train_data.string() + " contains no examples");
  std::vector<std::vector<std::string>> src, tgt;
  for (const auto& r : raw) {
    src.push_back(r.source);
    tgt.push_back(r.target);
  }
  const Vocabulary sv = Vocabulary::build(src, c.min_count);
  const Vocabulary tv = Vocabulary::build(tgt, c.min_count);
  const auto examples = to_examples(raw, sv, tv, c);
  check_visual_attend(c, examples, "training");
  std::vector<Example> valid;
  if (!c.valid_data.empty()) {
    valid = to_examples(read_data(c.valid_data, c.encoder.feature_dim), sv, tv, c);
    check_visual_attend(c, valid, "validation");
  }

  const ModelConfig mc = c.model_config(sv.size(), tv.size());
  Model model(mc, c.init_seed);
  Adam optimizer(model.parameters(), c.train.adam);
  print_parameter_report(out, model.parameters());

  fs::create_directories(c.checkpoint_dir);
  sv.save(c.checkpoint_dir / "src.vocab");
  tv.save(c.checkpoint_dir / "tgt.vocab");
  {
    std::ofstream cfg(c.checkpoint_dir / "run.cfg");
    cfg << format_key_values(c.entries());
  }
  std::ofstream csv(c.checkpoint_dir / "loss.csv", std::ios::trunc);
  csv << "step,lr,loss\n";
  const auto snap = snapshot(c, mc);

  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& s) {
    char line[96];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", s.step, s.lr, s.loss);
    csv << line;
  };
  hooks.on_checkpoint = [&](std::size_t step) {
    const Checkpoint ck = make_checkpoint(model, snap, &optimizer);
    if (c.train.checkpoint_every > 0 && step % c.train.checkpoint_every == 0)
      write_checkpoint(c.checkpoint_dir / ("step-" + std::to_string(step) + ".ckpt"), ck);
    if (step == c.train.max_steps) write_checkpoint(c.checkpoint_dir / "model.ckpt", ck);
  };
  try {
    train(model, optimizer, examples, c.train, hooks);
  } catch (const NumericalError& e) {
    std::ofstream dump(c.checkpoint_dir / "bad_batch.txt");
    dump << e.what();
    throw;
  }
  if (c.train.max_steps == 0) write_checkpoint(c.checkpoint_dir / "model.ckpt", make_checkpoint(model, snap, &optimizer));
  csv.close();

  char line[96];
  if (!valid.empty())
    std::snprintf(line, sizeof line, "validation loss: %.6f\n", evaluate_loss(model, valid, c.train.batch_tokens));
  else
    std::snprintf(line, sizeof line, "training loss: %.6f\n", evaluate_loss(model, examples, c.train.batch_tokens));
  out << line;
  return kExitOk;
}

// ---------------------------------------------------------------- translate

struct TranslateArgs {
  ModelFlags model;
  std::string checkpoint, input, introspect;
  std::size_t beam = 1;
  std::size_t max_len = 0;
};

int cmd_translate(const TranslateArgs& a, std::ostream& out) {
  const fs::path ck_path = checkpoint_file(a.checkpoint);
  if (!fs::exists(ck_path)) throw DataError("checkpoint not found: " + ck_path.string());
  const Checkpoint ck = read_checkpoint(ck_path);
  RunConfig c;
  for (const auto& [k, v] : ck.config)
    if (k != "source_vocab" && k != "target_vocab") c.set(k, v);
  a.model.apply(c);
  c.validate();

  const fs::path dir = ck_path.parent_path();
  const Vocabulary sv = Vocabulary::load(dir / "src.vocab");
  const Vocabulary tv = Vocabulary::load(dir / "tgt.vocab");
  if (sv.size() != vocab_entry(ck.config, "source_vocab") || tv.size() != vocab_entry(ck.config, "target_vocab"))
    throw CheckpointMismatch("vocabulary files in " + dir.string() + " do not match the checkpoint");
  Model model(c.model_config(sv.size(), tv.size()), c.init_seed);
  load_parameters(model, ck);

  if (a.beam < 1) throw ConfigError("--beam must be at least 1");
  const auto raw = read_data(a.input, c.encoder.feature_dim);
  std::ofstream introspect;
  if (!a.introspect.empty()) {
    introspect.open(a.introspect, std::ios::trunc);
    if (!introspect) throw DataError("cannot write " + a.introspect);
  }
  for (const auto& r : raw) {
    const Example ex = make_example(r, sv, tv, c.graph_options());
    const std::size_t max_len = a.max_len > 0 ? a.max_len : default_max_len(ex.graph.text_size());
    const auto ids = a.beam == 1 ? greedy_decode(model, ex.graph, max_len) : beam_decode(model, ex.graph, a.beam, max_len);
    out << tv.decode(ids) << "\n";
    if (introspect.is_open()) {
      Tape tape(false);
      ForwardContext ctx{tape};
      EncoderTrace trace;
      model.encode(ctx, ex.graph, &trace);
      introspect << trace_to_json(trace) << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const std::string& hyp, const std::string& ref, std::ostream& out) {
  for (const auto& p : {hyp, ref})
    if (!fs::exists(p)) throw DataError("file not found: " + p);
  const auto h = read_lines(hyp);
  const auto r = read_lines(ref);
  if (h.size() != r.size())
    throw EvaluationError("hypotheses have " + std::to_string(h.size()) + " lines but references have " +
                          std::to_string(r.size()));
  out << format_bleu(corpus_bleu(h, r)) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- grad-check

int cmd_grad_check(std::uint64_t seed, double tolerance, const std::vector<std::string>& ablations, std::ostream& out) {
  std::vector<Ablation> runs;
  if (ablations.empty()) runs.push_back(Ablation::None);
  for (const auto& name : ablations) {
    if (name == "all") {
      runs.push_back(Ablation::None);
      for (Ablation x : all_ablations()) runs.push_back(x);
    } else {
      runs.push_back(parse_ablation(name));
    }
  }
  bool ok = true;
  for (Ablation ab : runs) {
    const GradCheckReport rep = run_grad_check({seed, tolerance, ab});
    out << "grad-check ablation=" << to_string(ab) << " tolerance=" << tolerance << "\n";
    std::size_t width = 0;
    for (const auto& g : rep.groups) width = std::max(width, g.group.size());
    for (const auto& g : rep.groups) {
      char err[32];
      std::snprintf(err, sizeof err, "%.3e", g.max_rel_error);
      out << "  " << std::left << std::setw(static_cast<int>(width)) << g.group << std::right << "  scalars "
          << std::setw(6) << g.scalars << "  max_rel_error " << err << (g.max_rel_error < tolerance ? "" : "  FAIL")
          << "\n";
    }
    char worst[32];
    std::snprintf(worst, sizeof worst, "%.3e", rep.worst.max_rel_error);
    if (rep.passed) {
      out << "PASS worst " << worst << " at " << rep.worst.worst_parameter << "[" << rep.worst.worst_index << "]\n";
    } else {
      out << "FAIL worst " << worst << " at " << rep.worst.worst_parameter << "[" << rep.worst.worst_index << "]\n";
      ok = false;
    }
  }
  return ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- inspect-graph

int cmd_inspect_graph(const std::string& data, std::size_t line, bool fully_connected, std::size_t feature_dim,
                      std::ostream& out) {
  const auto raw = read_data(data, feature_dim);
  if (line < 1 || line > raw.size())
    throw DataError("line " + std::to_string(line) + " out of range: " + data + " has " + std::to_string(raw.size()) +
                    " examples");
  const RawExample& ex = raw[line - 1];
  Vocabulary v;
  for (const auto& w : ex.source) v.add(w);
  const auto ids = v.encode(ex.source);
  const MultiModalGraph g = fully_connected ? build_fully_connected_graph(ids, ex.groundings, feature_dim)
                                            : build_graph(ids, ex.groundings, feature_dim);
  out << "textual nodes: " << g.text_size() << "\n";
  out << "visual nodes: " << g.visual_size() << "\n";
  out << "inter-modal edges: " << g.edges().size() << "\n";
  out << "edges:";
  for (const auto& e : g.edges()) out << " " << e.text << "-" << e.object;
  out << "\n";
  for (std::size_t i = 0; i < g.text_size(); ++i) {
    out << "token " << i << " " << ex.source[i] << ":";
    const auto nb = g.neighbors_visual(i);
    if (nb.empty()) out << " -";
    for (std::size_t o : nb) out << " " << o;
    out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- params

int cmd_params(const ModelFlags& flags, std::size_t source_vocab, std::size_t target_vocab, std::ostream& out) {
  RunConfig c;
  flags.apply(c);
  c.validate();
  Model model(c.model_config(source_vocab, target_vocab), c.init_seed);
  print_parameter_report(out, model.parameters());
  return kExitOk;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const std::string& path, const SyntheticOptions& opt, bool figure_one, std::ostream& out) {
  const auto examples = figure_one ? std::vector<RawExample>{figure_one_example(opt.seed, opt.feature_dim)}
                                   : make_copy_corpus(opt);
  write_jsonl(path, examples);
  out << "wrote " << examples.size() << " examples to " << path << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-based multimodal fusion encoder for neural machine translation", "gmnmt"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write checkpoints");
  train_args.model.attach(train_cmd);
  train_cmd->add_option("--train", train_args.train_path, "training JSONL");
  train_cmd->add_option("--valid", train_args.valid_path, "validation JSONL");
  train_cmd->add_option("--checkpoint-dir", train_args.checkpoint_dir);
  train_cmd->add_option("--seed", train_args.seed, "batching and dropout seed");
  train_cmd->add_option("--init-seed", train_args.init_seed, "parameter initialization seed");
  train_cmd->add_option("--max-steps", train_args.max_steps);
  train_cmd->add_option("--warmup-steps", train_args.warmup_steps);
  train_cmd->add_option("--batch-tokens", train_args.batch_tokens);
  train_cmd->add_option("--checkpoint-every", train_args.checkpoint_every);
  train_cmd->add_option("--lr-scale", train_args.lr_scale);
  train_cmd->add_option("--clip-norm", train_args.clip_norm);

  TranslateArgs tr;
  CLI::App* translate_cmd = app.add_subcommand("translate", "translate a JSONL file with a trained checkpoint");
  tr.model.attach(translate_cmd);
  translate_cmd->add_option("--checkpoint", tr.checkpoint, "checkpoint file or directory")->required();
  translate_cmd->add_option("--input", tr.input, "JSONL input")->required();
  translate_cmd->add_option("--beam", tr.beam, "beam size (1 = greedy)");
  translate_cmd->add_option("--max-len", tr.max_len, "output length limit (default 2 x source + 10)");
  translate_cmd->add_option("--introspect", tr.introspect, "write per-layer encoder traces as JSON lines");

  std::string hyp, ref;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "corpus BLEU-4 of hypotheses against references");
  eval_cmd->add_option("--hyp", hyp)->required();
  eval_cmd->add_option("--ref", ref)->required();

  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  std::vector<std::string> gc_ablations;
  CLI::App* gc_cmd = app.add_subcommand("grad-check", "finite-difference check of all parameter gradients");
  gc_cmd->add_option("--seed", gc_seed);
  gc_cmd->add_option("--tolerance", gc_tol);
  gc_cmd->add_option("--ablation", gc_ablations,
                     "none, no-inter-modal-fusion, fully-connected-grounding, unified-parameters, "
                     "decoder-attend-visual, decoder-attend-both, or all");

  std::string ig_data;
  std::size_t ig_line = 1;
  bool ig_full = false;
  std::size_t ig_dim = kVisualFeatureDim;
  CLI::App* ig_cmd = app.add_subcommand("inspect-graph", "print the multimodal graph of one dataset line");
  ig_cmd->add_option("--data", ig_data)->required();
  ig_cmd->add_option("--line", ig_line, "1-based example index");
  ig_cmd->add_flag("--fully-connected-grounding", ig_full);
  ig_cmd->add_option("--feature-dim", ig_dim);

  ModelFlags params_flags;
  std::size_t pv_src = 50, pv_tgt = 50;
  CLI::App* params_cmd = app.add_subcommand("params", "report trainable parameters per group");
  params_flags.attach(params_cmd);
  params_cmd->add_option("--source-vocab", pv_src);
  params_cmd->add_option("--target-vocab", pv_tgt);

  std::string synth_out;
  SyntheticOptions synth_opt;
  bool synth_figure = false;
  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic grounded copy-task corpus");
  synth_cmd->add_option("--out", synth_out)->required();
  synth_cmd->add_option("--pairs", synth_opt.pairs);
  synth_cmd->add_option("--word-types", synth_opt.word_types);
  synth_cmd->add_option("--seed", synth_opt.seed);
  synth_cmd->add_option("--feature-dim", synth_opt.feature_dim);
  synth_cmd->add_flag("--figure-one", synth_figure, "write only the 'two boys' example");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, out);
    if (*translate_cmd) return cmd_translate(tr, out);
    if (*eval_cmd) return cmd_evaluate(hyp, ref, out);
    if (*gc_cmd) return cmd_grad_check(gc_seed, gc_tol, gc_ablations, out);
    if (*ig_cmd) return cmd_inspect_graph(ig_data, ig_line, ig_full, ig_dim, out);
    if (*params_cmd) return cmd_params(params_flags, pv_src, pv_tgt, out);
    if (*synth_cmd) return cmd_synth(synth_out, synth_opt, synth_figure, out);
  } catch (const CheckpointMismatch& e) {
    err << "checkpoint mismatch: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const EvaluationError& e) {
    err << "evaluation error: " << e.what() << "\n";
    return kExitEvaluation;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DataError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace gmnmt

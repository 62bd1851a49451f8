// Command-line front end. Exit codes: 0 success, 1 input/validation error,
// 2 internal error. Diagnostics go to stderr; data goes to stdout or files.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "iur/corpus.hpp"
#include "iur/graph.hpp"
#include "iur/labels.hpp"
#include "iur/llmaug.hpp"
#include "iur/metrics.hpp"
#include "iur/model.hpp"
#include "iur/train.hpp"
#include "json.hpp"

using namespace iur;

namespace {

TokenizeMode parse_mode(const std::string& m) {
  if (m == "word") return TokenizeMode::Word;
  if (m == "char") return TokenizeMode::Char;
  throw InputError("unknown tokenize mode '" + m + "' (word|char)");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write to " + path);
  return os;
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

// ----------------------------------------------------------------- convert

struct ConvertOpts {
  std::string in, out, mode = "word", parses;
  bool json = false;
};

void run_convert(const ConvertOpts& o) {
  auto samples = load_corpus(o.in, parse_mode(o.mode));
  if (!o.parses.empty()) attach_parses(samples, o.parses);
  save_corpus(samples, o.out);
  if (o.json) {
    nlohmann::json j{{"samples", samples.size()}};
    std::cout << j.dump() << "\n";
  } else {
    std::cerr << "wrote " << samples.size() << " samples to " << o.out << "\n";
  }
}

// ------------------------------------------------------------------- synth

struct SynthOpts {
  std::string out;
  SynthConfig cfg;
  bool json = false;
};

void run_synth(const SynthOpts& o) {
  auto samples = generate_synthetic(o.cfg);
  save_corpus(samples, o.out);
  if (o.json) {
    nlohmann::json j{{"samples", samples.size()}, {"seed", o.cfg.seed}};
    std::cout << j.dump() << "\n";
  } else {
    std::cerr << "wrote " << samples.size() << " synthetic samples to " << o.out << "\n";
  }
}

// ----------------------------------------------------------- derive-labels

struct DeriveOpts {
  std::string in, out, mode = "word";
  bool json = false;
};

void run_derive(const DeriveOpts& o) {
  auto samples = load_corpus(o.in, parse_mode(o.mode));
  long non_extractive = 0;
  for (auto& s : samples) {
    LabelDiagnostics diag;
    derive_labels(s, &diag);
    if (!diag.extractive) ++non_extractive;
  }
  save_corpus(samples, o.out);
  if (o.json) {
    nlohmann::json j{{"samples", samples.size()}, {"non_extractive", non_extractive}};
    std::cout << j.dump() << "\n";
  } else {
    std::cerr << "labeled " << samples.size() << " samples (" << non_extractive
              << " with non-extractive spans) -> " << o.out << "\n";
  }
}

// ------------------------------------------------------------------- check

struct CheckOpts {
  std::string in, mode = "word";
  bool json = false;
};

void run_check(const CheckOpts& o) {
  auto samples = load_corpus(o.in, parse_mode(o.mode));
  long bad = 0;
  nlohmann::json report = nlohmann::json::array();
  for (size_t i = 0; i < samples.size(); ++i) {
    auto violations = check_consistency(samples[i]);
    if (violations.empty()) continue;
    ++bad;
    if (o.json) {
      nlohmann::json vs = nlohmann::json::array();
      for (const auto& v : violations)
        vs.push_back({{"position", v.position}, {"message", v.message}});
      report.push_back({{"sample", i}, {"violations", vs}});
    } else {
      for (const auto& v : violations)
        std::cout << "sample " << i << " pos " << v.position << ": " << v.message << "\n";
    }
  }
  if (o.json) std::cout << report.dump() << "\n";
  std::cerr << bad << " of " << samples.size() << " samples have violations\n";
  if (bad > 0) throw InputError("consistency check failed");
}

// ------------------------------------------------------------ augment-edit

struct AugEditOpts {
  std::string in, out, mode = "word", directions = "both", pronoun_file;
  bool no_originals = false, json = false;
};

void run_augment_edit(const AugEditOpts& o) {
  if (o.directions != "both" && o.directions != "c2e" && o.directions != "e2c")
    throw InputError("unknown direction '" + o.directions + "' (both|c2e|e2c)");
  auto samples = load_corpus(o.in, parse_mode(o.mode));
  std::vector<std::string> pronouns =
      o.pronoun_file.empty() ? default_pronoun_lexicon() : load_pronoun_lexicon(o.pronoun_file);

  std::vector<Sample> out;
  if (!o.no_originals) out = samples;
  long c2e = 0, e2c = 0;
  for (const auto& s : samples) {
    if (o.directions == "both" || o.directions == "c2e") {
      if (auto a = augment_coref_to_ellipsis(s, pronouns)) {
        out.push_back(std::move(*a));
        ++c2e;
      }
    }
    if (o.directions == "both" || o.directions == "e2c") {
      if (auto a = augment_ellipsis_to_coref(s, pronouns)) {
        out.push_back(std::move(*a));
        ++e2c;
      }
    }
  }
  save_corpus(out, o.out);
  if (o.json) {
    nlohmann::json j{{"input", samples.size()},
                     {"coref_to_ellipsis", c2e},
                     {"ellipsis_to_coref", e2c},
                     {"written", out.size()}};
    std::cout << j.dump() << "\n";
  } else {
    std::cerr << "augmented " << samples.size() << " samples: " << c2e << " coref->ellipsis, "
              << e2c << " ellipsis->coref -> " << o.out << "\n";
  }
}

// ------------------------------------------------------------- augment-llm

struct AugLlmOpts {
  std::string in, out, mode = "word", template_file;
  LlmConfig cfg;
  bool mock = false, no_originals = false, json = false;
};

void run_augment_llm(AugLlmOpts o) {
  auto samples = load_corpus(o.in, parse_mode(o.mode));
  PromptTemplate tmpl = o.template_file.empty() ? PromptTemplate::defaults()
                                                : PromptTemplate::from_json_file(o.template_file);

  std::unique_ptr<Transport> transport;
  if (o.mock) {
    transport = std::make_unique<EchoTransport>();
    o.cfg.require_auth = false;
  } else {
    transport = std::make_unique<HttpTransport>();
  }

  auto results = augment_batch(samples, tmpl, *transport, o.cfg);

  std::vector<Sample> out;
  if (!o.no_originals) out = samples;
  long accepted = 0, rejected = 0;
  for (size_t i = 0; i < results.size(); ++i) {
    if (results[i].status == AugmentStatus::Accepted) {
      out.push_back(apply_augmentation(samples[i], results[i]));
      ++accepted;
    } else {
      ++rejected;
      std::cerr << "sample " << i << " rejected: " << results[i].reason << "\n";
    }
  }
  save_corpus(out, o.out);
  if (o.json) {
    nlohmann::json j{{"accepted", accepted}, {"rejected", rejected}, {"written", out.size()}};
    std::cout << j.dump() << "\n";
  } else {
    std::cerr << "llm augmentation: " << accepted << " accepted, " << rejected << " rejected -> "
              << o.out << "\n";
  }
}

// ------------------------------------------------------------- build-graph

struct GraphOpts {
  std::string in, mode = "word", dump;
  int index = 0;
};

void run_build_graph(const GraphOpts& o) {
  auto samples = load_corpus(o.in, parse_mode(o.mode));
  if (o.index < 0 || (size_t)o.index >= samples.size())
    throw InputError("--index " + std::to_string(o.index) + " out of range (corpus has " +
                     std::to_string(samples.size()) + " samples)");
  Sample& s = samples[o.index];
  ensure_parses(s);
  auto lin = linearize(s.dialogue);
  auto g = build_graph(s.dialogue, lin);
  auto problems = validate_graph(g);
  if (!problems.empty()) {
    std::string msg = "graph invariants violated:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
  std::string json = graph_to_json(g);
  if (o.dump.empty()) {
    std::cout << json << "\n";
  } else {
    open_out(o.dump) << json << "\n";
    std::cerr << "graph for sample " << o.index << " -> " << o.dump << "\n";
  }
}

// ------------------------------------------------------------------- train

struct TrainOpts {
  std::string train_file, dev_file, config_file, log_file, mode = "word";
  bool json = false;
  // optionals so a config file value survives unless the flag was given
  std::optional<double> alpha1, alpha2, lr, tau_d, dropout;
  std::optional<int> warmup, epochs, batch_size, d_u, enc_layers, dec_layers, heads, rgcn_layers,
      max_len, ffn_mult, label_hidden;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> optimizer, ckpt_dir, label_mode, guidance_grad;
  std::optional<bool> augment_edit;
};

void run_train(const TrainOpts& o) {
  TrainConfig tc;
  ModelConfig mc;
  if (!o.config_file.empty()) {
    for (const auto& [k, v] : parse_kv_file(o.config_file)) {
      if (!apply_train_key(tc, k, v) && !apply_model_key(mc, k, v))
        throw InputError(o.config_file + ": unknown config key '" + k + "'");
    }
  }
  // flags win over the config file
  if (o.alpha1) tc.alpha1 = *o.alpha1;
  if (o.alpha2) tc.alpha2 = *o.alpha2;
  if (o.lr) tc.learning_rate = *o.lr;
  if (o.warmup) tc.warmup_epochs = *o.warmup;
  if (o.epochs) tc.epochs = *o.epochs;
  if (o.batch_size) tc.batch_size = *o.batch_size;
  if (o.seed) tc.seed = *o.seed;
  if (o.optimizer) tc.optimizer = *o.optimizer;
  if (o.ckpt_dir) tc.checkpoint_dir = *o.ckpt_dir;
  if (o.augment_edit) tc.augment_edit = *o.augment_edit;
  if (o.d_u) mc.d_u = *o.d_u;
  if (o.enc_layers) mc.enc_layers = *o.enc_layers;
  if (o.dec_layers) mc.dec_layers = *o.dec_layers;
  if (o.heads) mc.heads = *o.heads;
  if (o.rgcn_layers) mc.rgcn_layers = *o.rgcn_layers;
  if (o.max_len) mc.max_len = *o.max_len;
  if (o.ffn_mult) mc.ffn_mult = *o.ffn_mult;
  if (o.label_hidden) mc.label_hidden = *o.label_hidden;
  if (o.tau_d) mc.tau_d = *o.tau_d;
  if (o.dropout) mc.dropout = *o.dropout;
  if (o.label_mode) {
    auto m = label_mode_from(*o.label_mode);
    if (!m) throw InputError("unknown label mode '" + *o.label_mode + "'");
    mc.label_mode = *m;
  }
  if (o.guidance_grad) {
    auto g = guidance_grad_from(*o.guidance_grad);
    if (!g) throw InputError("unknown guidance gradient mode '" + *o.guidance_grad + "'");
    mc.guidance_grad = *g;
  }
  tc.validate();

  auto train_set = load_corpus(o.train_file, parse_mode(o.mode));
  std::vector<Sample> dev_set;
  if (!o.dev_file.empty()) dev_set = load_corpus(o.dev_file, parse_mode(o.mode));

  Vocab vocab = Vocab::build(train_set);
  mc.vocab_size = vocab.size();
  mc.validate();

  Model model(mc, tc.seed);
  std::string log_path = o.log_file.empty() ? tc.checkpoint_dir + "/train_log.jsonl" : o.log_file;
  std::filesystem::create_directories(tc.checkpoint_dir);
  std::ofstream log = open_out(log_path);

  auto result = train(model, std::move(train_set), std::move(dev_set), vocab, tc, &log);

  if (o.json) {
    nlohmann::json j{{"final_checkpoint", result.final_checkpoint},
                     {"best_checkpoint", result.best_checkpoint},
                     {"best_dev_em", result.best_dev_em},
                     {"epochs", result.log.epochs.size()},
                     {"log", log_path}};
    std::cout << j.dump() << "\n";
  } else {
    std::cerr << "trained " << result.log.epochs.size() << " epochs";
    if (result.best_dev_em >= 0) std::cerr << ", best dev EM " << result.best_dev_em;
    std::cerr << "\nfinal checkpoint: " << result.final_checkpoint << "\n";
    if (!result.best_checkpoint.empty())
      std::cerr << "best checkpoint:  " << result.best_checkpoint << "\n";
  }
}

// ----------------------------------------------------------------- rewrite

struct RewriteOpts {
  std::string ckpt, in, out, mode = "word", strategy = "greedy";
  int beam_k = 4;
  bool no_guidance = false, json = false;
};

void run_rewrite(const RewriteOpts& o) {
  DecodeStrategy strat;
  if (o.strategy == "greedy") strat = DecodeStrategy::Greedy;
  else if (o.strategy == "beam") strat = DecodeStrategy::Beam;
  else throw InputError("unknown strategy '" + o.strategy + "' (greedy|beam)");

  auto ckpt = load_checkpoint(o.ckpt);
  Model model = model_from_checkpoint(ckpt);
  auto samples = load_corpus(o.in, parse_mode(o.mode));

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!o.out.empty()) {
    file = open_out(o.out);
    os = &file;
  }

  for (size_t i = 0; i < samples.size(); ++i) {
    auto es = prepare_sample(samples[i], ckpt.vocab, ckpt.config);
    std::vector<int> ids;
    if (o.no_guidance) {
      std::vector<double> zeros(es.input_ids.size(), 0.0);
      ids = model.generate(es, strat, o.beam_k, &zeros);
    } else {
      ids = model.generate(es, strat, o.beam_k);
    }
    auto toks = ids_to_tokens(ids, ckpt.vocab);
    if (o.json) {
      nlohmann::json j{{"index", i}, {"rewritten", join_tokens(toks)}, {"tokens", toks}};
      (*os) << j.dump() << "\n";
    } else {
      (*os) << join_tokens(toks) << "\n";
    }
  }
  if (!o.out.empty()) std::cerr << "rewrote " << samples.size() << " samples -> " << o.out << "\n";
}

// ---------------------------------------------------------------- evaluate

struct EvalOpts {
  std::string corpus, hyp, ckpt, mode = "word", strategy = "greedy";
  int beam_k = 4;
  bool compare_guidance = false, json = false;
};

std::vector<TokenSeq> decode_corpus(Model& model, const Checkpoint& ckpt,
                                    std::vector<Sample>& samples, DecodeStrategy strat,
                                    int beam_k, bool guidance_off) {
  std::vector<TokenSeq> cands;
  cands.reserve(samples.size());
  for (auto& s : samples) {
    auto es = prepare_sample(s, ckpt.vocab, ckpt.config);
    std::vector<int> ids;
    if (guidance_off) {
      std::vector<double> zeros(es.input_ids.size(), 0.0);
      ids = model.generate(es, strat, beam_k, &zeros);
    } else {
      ids = model.generate(es, strat, beam_k);
    }
    cands.push_back(ids_to_tokens(ids, ckpt.vocab));
  }
  return cands;
}

void run_evaluate(const EvalOpts& o) {
  if (o.hyp.empty() == o.ckpt.empty())
    throw InputError("pass exactly one of --hyp (scored file) or --ckpt (decode a model)");
  if (o.compare_guidance && o.ckpt.empty())
    throw InputError("--compare-guidance needs --ckpt");

  DecodeStrategy strat;
  if (o.strategy == "greedy") strat = DecodeStrategy::Greedy;
  else if (o.strategy == "beam") strat = DecodeStrategy::Beam;
  else throw InputError("unknown strategy '" + o.strategy + "' (greedy|beam)");

  auto samples = load_corpus(o.corpus, parse_mode(o.mode));
  std::vector<TokenSeq> refs, incs;
  for (const auto& s : samples) {
    TokenSeq ref, inc;
    for (const auto& t : s.rewritten.tokens) ref.push_back(t.text);
    for (const auto& t : s.dialogue.incomplete.tokens) inc.push_back(t.text);
    refs.push_back(std::move(ref));
    incs.push_back(std::move(inc));
  }

  if (!o.hyp.empty()) {
    std::ifstream in(o.hyp);
    if (!in) throw InputError("cannot open hypothesis file: " + o.hyp);
    std::vector<TokenSeq> cands;
    std::string line;
    while (std::getline(in, line)) {
      TokenSeq toks;
      for (const auto& t : tokenize(line, parse_mode(o.mode))) toks.push_back(t.text);
      cands.push_back(std::move(toks));
    }
    if (cands.size() != refs.size())
      throw InputError("hypothesis file has " + std::to_string(cands.size()) +
                       " lines, corpus has " + std::to_string(refs.size()) + " samples");
    auto rep = evaluate_all(cands, refs, incs);
    std::cout << (o.json ? report_to_json(rep) + "\n" : report_to_table(rep));
    return;
  }

  auto ckpt = load_checkpoint(o.ckpt);
  Model model = model_from_checkpoint(ckpt);

  auto guided = evaluate_all(decode_corpus(model, ckpt, samples, strat, o.beam_k, false), refs,
                             incs);
  if (!o.compare_guidance) {
    std::cout << (o.json ? report_to_json(guided) + "\n" : report_to_table(guided));
    return;
  }

  auto unguided = evaluate_all(decode_corpus(model, ckpt, samples, strat, o.beam_k, true), refs,
                               incs);
  const double drop = unguided.redundant - guided.redundant;
  const bool inversion = guided.redundant > unguided.redundant;
  if (o.json) {
    nlohmann::json j{{"guided", nlohmann::json::parse(report_to_json(guided))},
                     {"unguided", nlohmann::json::parse(report_to_json(unguided))},
                     {"redundant_rate_guided", guided.redundant},
                     {"redundant_rate_unguided", unguided.redundant},
                     {"redundant_rate_drop", drop},
                     {"inversion", inversion}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "== guided ==\n" << report_to_table(guided);
    std::cout << "== guidance disabled (lambda = 0) ==\n" << report_to_table(unguided);
    std::cout << "redundant rate: guided " << guided.redundant << " vs unguided "
              << unguided.redundant << " (drop " << drop << ")\n";
    if (inversion)
      std::cout << "note: inversion, guided redundant rate is higher than unguided\n";
  }
}

// ---------------------------------------------------------------- gradcheck

struct GradOpts {
  std::string model = "tiny", guidance = "both";
  std::uint64_t seed = 7;
  int samples = 2;
  double eps = 1e-5, threshold = 1e-4;
  bool json = false;
};

double gradcheck_once(GuidanceGrad gg, const GradOpts& o, nlohmann::json* out) {
  ModelConfig mc;
  if (o.model == "tiny") {
    mc.d_u = 8;
    mc.heads = 2;
    mc.enc_layers = 1;
    mc.dec_layers = 1;
    mc.rgcn_layers = 1;
    mc.ffn_mult = 2;
  } else if (o.model == "small") {
    mc.d_u = 16;
    mc.heads = 4;
    mc.enc_layers = 2;
    mc.dec_layers = 2;
    mc.rgcn_layers = 2;
    mc.ffn_mult = 2;
  } else {
    throw InputError("unknown --model '" + o.model + "' (tiny|small)");
  }
  mc.guidance_grad = gg;
  mc.dropout = 0.0;

  SynthConfig sc;
  sc.num_samples = o.samples;
  sc.seed = o.seed;
  auto data = generate_synthetic(sc);
  Vocab vocab = Vocab::build(data);
  mc.vocab_size = vocab.size();
  mc.validate();

  Model model(mc, o.seed);
  model.set_training(false);
  std::vector<EncodedSample> enc;
  for (auto& s : data) enc.push_back(prepare_sample(s, vocab, mc));

  // Detached guidance treats lambda as a constant, so the finite-difference
  // reference freezes it at the base parameters.
  std::vector<std::vector<double>> frozen;
  if (gg == GuidanceGrad::Detach) {
    for (const auto& es : enc) {
      auto out_base = model.forward_joint(es, 1.0, 1.0);
      const Tensor& lam = out_base.lambda->value;
      frozen.emplace_back(lam.data(), lam.data() + lam.size());
    }
  }

  auto forward = [&]() -> Value {
    Value total;
    for (size_t i = 0; i < enc.size(); ++i) {
      auto out = model.forward_joint(enc[i], 1.0, 1.0,
                                     gg == GuidanceGrad::Detach ? &frozen[i] : nullptr);
      Value term = scale(out.joint, 1.0 / (double)enc.size());
      total = total ? add(total, term) : term;
    }
    return total;
  };

  auto res = grad_check(forward, model.params(), o.eps);
  if (out) {
    (*out)["mode"] = to_string(gg);
    (*out)["max_rel_err"] = res.max_rel_err;
    (*out)["worst_param"] = res.worst.param;
    (*out)["worst_index"] = res.worst.flat_index;
    (*out)["coords_checked"] = res.coords_checked;
  } else {
    std::cout << to_string(gg) << ": max rel err " << res.max_rel_err << " (param "
              << res.worst.param << "[" << res.worst.flat_index << "], "
              << res.coords_checked << " coordinates)\n";
  }
  return res.max_rel_err;
}

void run_gradcheck(const GradOpts& o) {
  std::vector<GuidanceGrad> modes;
  if (o.guidance == "both") modes = {GuidanceGrad::Flow, GuidanceGrad::Detach};
  else if (o.guidance == "flow") modes = {GuidanceGrad::Flow};
  else if (o.guidance == "detach") modes = {GuidanceGrad::Detach};
  else throw InputError("unknown --guidance-grad '" + o.guidance + "' (flow|detach|both)");

  double worst = 0.0;
  nlohmann::json lines = nlohmann::json::array();
  for (auto gg : modes) {
    nlohmann::json entry;
    worst = std::max(worst, gradcheck_once(gg, o, o.json ? &entry : nullptr));
    if (o.json) lines.push_back(entry);
  }
  if (o.json) {
    nlohmann::json j{{"modes", lines}, {"max_rel_err", worst}, {"threshold", o.threshold},
                     {"pass", worst < o.threshold}};
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "overall max rel err " << worst << (worst < o.threshold ? " < " : " >= ")
              << o.threshold << "\n";
  }
  if (!(worst < o.threshold)) throw InputError("gradient check exceeded threshold");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rewrites incomplete dialogue utterances, guided by edit-operation labels"};
  app.require_subcommand(1);
  std::function<void()> task;

  auto co = std::make_shared<ConvertOpts>();
  auto* convert = app.add_subcommand("convert", "Validate and canonicalize a JSONL corpus");
  convert->add_option("input", co->in, "input JSONL")->required();
  convert->add_option("output", co->out, "output JSONL")->required();
  convert->add_option("--tokenize-mode", co->mode, "word|char");
  convert->add_option("--parses", co->parses, "CoNLL-U file with one parse per utterance");
  convert->add_flag("--json", co->json, "machine-readable summary on stdout");
  convert->callback([co, &task] { task = [co] { run_convert(*co); }; });

  auto so = std::make_shared<SynthOpts>();
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dialogue corpus");
  synth->add_option("output", so->out, "output JSONL")->required();
  synth->add_option("--num", so->cfg.num_samples, "sample count");
  synth->add_option("--seed", so->cfg.seed, "RNG seed");
  synth->add_option("--coref-ratio", so->cfg.coref_ratio, "fraction of coreference samples");
  synth->add_flag("--json", so->json, "machine-readable summary on stdout");
  synth->callback([so, &task] { task = [so] { run_synth(*so); }; });

  auto dopt = std::make_shared<DeriveOpts>();
  auto* derive = app.add_subcommand("derive-labels", "Derive edit-operation labels");
  derive->add_option("input", dopt->in, "input JSONL")->required();
  derive->add_option("output", dopt->out, "output JSONL with labels")->required();
  derive->add_option("--tokenize-mode", dopt->mode, "word|char");
  derive->add_flag("--json", dopt->json, "machine-readable summary on stdout");
  derive->callback([dopt, &task] { task = [dopt] { run_derive(*dopt); }; });

  auto cko = std::make_shared<CheckOpts>();
  auto* check = app.add_subcommand("check", "Check label consistency for a labeled corpus");
  check->add_option("input", cko->in, "input JSONL")->required();
  check->add_option("--tokenize-mode", cko->mode, "word|char");
  check->add_flag("--json", cko->json, "violations as JSON on stdout");
  check->callback([cko, &task] { task = [cko] { run_check(*cko); }; });

  auto ae = std::make_shared<AugEditOpts>();
  auto* aedit = app.add_subcommand("augment-edit", "Edit-based coref/ellipsis augmentation");
  aedit->add_option("input", ae->in, "input JSONL")->required();
  aedit->add_option("output", ae->out, "output JSONL")->required();
  aedit->add_option("--directions", ae->directions, "both|c2e|e2c");
  aedit->add_option("--pronouns", ae->pronoun_file, "pronoun lexicon, one per line");
  aedit->add_option("--tokenize-mode", ae->mode, "word|char");
  aedit->add_flag("--no-originals", ae->no_originals, "write only augmented samples");
  aedit->add_flag("--json", ae->json, "machine-readable summary on stdout");
  aedit->callback([ae, &task] { task = [ae] { run_augment_edit(*ae); }; });

  auto al = std::make_shared<AugLlmOpts>();
  auto* allm = app.add_subcommand("augment-llm", "LLM-based history augmentation");
  allm->add_option("input", al->in, "input JSONL")->required();
  allm->add_option("output", al->out, "output JSONL")->required();
  allm->add_option("--endpoint", al->cfg.endpoint, "chat-completion endpoint URL");
  allm->add_option("--model-name", al->cfg.model, "model name sent in requests");
  allm->add_option("--cap", al->cfg.concurrency_cap, "max concurrent requests");
  allm->add_option("--max-retries", al->cfg.max_retries, "retries after the first attempt");
  allm->add_option("--backoff-ms", al->cfg.backoff_initial_ms, "initial retry backoff");
  allm->add_option("--template", al->template_file, "prompt template JSON");
  allm->add_option("--tokenize-mode", al->mode, "word|char");
  allm->add_flag("--mock", al->mock, "use the offline echo transport (no auth, no network)");
  allm->add_flag("--no-originals", al->no_originals, "write only augmented samples");
  allm->add_flag("--json", al->json, "machine-readable summary on stdout");
  allm->callback([al, &task] { task = [al] { run_augment_llm(*al); }; });

  auto go = std::make_shared<GraphOpts>();
  auto* bgraph = app.add_subcommand("build-graph", "Build the dialogue graph for one sample");
  bgraph->add_option("input", go->in, "input JSONL")->required();
  bgraph->add_option("--index", go->index, "sample index");
  bgraph->add_option("--dump", go->dump, "write relation->edge-list JSON here (default stdout)");
  bgraph->add_option("--tokenize-mode", go->mode, "word|char");
  bgraph->callback([go, &task] { task = [go] { run_build_graph(*go); }; });

  auto to = std::make_shared<TrainOpts>();
  auto* tr = app.add_subcommand("train", "Train the joint rewriting model");
  tr->add_option("train", to->train_file, "training JSONL")->required();
  tr->add_option("--dev", to->dev_file, "dev JSONL for per-epoch EM");
  tr->add_option("--config", to->config_file, "key = value config file (flags win)");
  tr->add_option("--log", to->log_file, "epoch log JSONL (default <ckpt-dir>/train_log.jsonl)");
  tr->add_option("--tokenize-mode", to->mode, "word|char");
  tr->add_option("--alpha1", to->alpha1, "generation loss weight");
  tr->add_option("--alpha2", to->alpha2, "labeling loss weight");
  tr->add_option("--warmup", to->warmup, "generation-only warm-up epochs");
  tr->add_option("--epochs", to->epochs, "training epochs");
  tr->add_option("--batch-size", to->batch_size, "samples per optimizer step");
  tr->add_option("--lr", to->lr, "learning rate");
  tr->add_option("--seed", to->seed, "seed for init, shuffling, dropout");
  tr->add_option("--optimizer", to->optimizer, "adam|sgd");
  tr->add_option("--ckpt-dir", to->ckpt_dir, "checkpoint directory");
  tr->add_option("--augment-edit", to->augment_edit, "append edit-augmented variants (true|false)");
  tr->add_option("--d-u", to->d_u, "model width");
  tr->add_option("--enc-layers", to->enc_layers, "encoder layers");
  tr->add_option("--dec-layers", to->dec_layers, "decoder layers");
  tr->add_option("--heads", to->heads, "attention heads");
  tr->add_option("--rgcn-layers", to->rgcn_layers, "graph message-passing layers");
  tr->add_option("--max-len", to->max_len, "max stream/decoder length");
  tr->add_option("--ffn-mult", to->ffn_mult, "feed-forward width multiplier");
  tr->add_option("--label-hidden", to->label_hidden, "label head hidden width");
  tr->add_option("--tau-d", to->tau_d, "attention temperature floor");
  tr->add_option("--dropout", to->dropout, "dropout probability");
  tr->add_option("--label-mode", to->label_mode, "soft|onehot|merged");
  tr->add_option("--guidance-grad", to->guidance_grad, "flow|detach");
  tr->add_flag("--json", to->json, "machine-readable summary on stdout");
  tr->callback([to, &task] { task = [to] { run_train(*to); }; });

  auto ro = std::make_shared<RewriteOpts>();
  auto* rw = app.add_subcommand("rewrite", "Decode rewritten utterances from a checkpoint");
  rw->add_option("checkpoint", ro->ckpt, "model checkpoint")->required();
  rw->add_option("input", ro->in, "input JSONL (references ignored)")->required();
  rw->add_option("--out", ro->out, "output file (default stdout)");
  rw->add_option("--strategy", ro->strategy, "greedy|beam");
  rw->add_option("--beam-k", ro->beam_k, "beam width");
  rw->add_option("--tokenize-mode", ro->mode, "word|char");
  rw->add_flag("--no-guidance", ro->no_guidance, "force lambda = 0 (guidance disabled)");
  rw->add_flag("--json", ro->json, "JSONL records instead of plain lines");
  rw->callback([ro, &task] { task = [ro] { run_rewrite(*ro); }; });

  auto eo = std::make_shared<EvalOpts>();
  auto* ev = app.add_subcommand("evaluate", "Score hypotheses or decode-and-score a checkpoint");
  ev->add_option("--corpus", eo->corpus, "reference JSONL")->required();
  ev->add_option("--hyp", eo->hyp, "hypothesis file, one utterance per line");
  ev->add_option("--ckpt", eo->ckpt, "checkpoint to decode");
  ev->add_option("--strategy", eo->strategy, "greedy|beam");
  ev->add_option("--beam-k", eo->beam_k, "beam width");
  ev->add_option("--tokenize-mode", eo->mode, "word|char");
  ev->add_flag("--compare-guidance", eo->compare_guidance,
               "also decode with lambda = 0 and report the redundant-rate gap");
  ev->add_flag("--json", eo->json, "JSON report on stdout");
  ev->callback([eo, &task] { task = [eo] { run_evaluate(*eo); }; });

  auto gro = std::make_shared<GradOpts>();
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the joint loss");
  gc->add_option("--model", gro->model, "tiny|small");
  gc->add_option("--guidance-grad", gro->guidance, "flow|detach|both");
  gc->add_option("--seed", gro->seed, "seed for data and parameters");
  gc->add_option("--samples", gro->samples, "synthetic samples in the batch");
  gc->add_option("--eps", gro->eps, "finite-difference step");
  gc->add_option("--threshold", gro->threshold, "pass bound on max relative error");
  gc->add_flag("--json", gro->json, "JSON result on stdout");
  gc->callback([gro, &task] { task = [gro] { run_gradcheck(*gro); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (task) task();
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

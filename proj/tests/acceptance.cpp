// Gate suite. One line per criterion, exit 0 only when every binding
// criterion holds. Tolerances are pinned in the code on purpose: loosening
// them is a code change, not a flag.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iur/autodiff.hpp"
#include "iur/corpus.hpp"
#include "iur/graph.hpp"
#include "iur/labels.hpp"
#include "iur/llmaug.hpp"
#include "iur/metrics.hpp"
#include "iur/model.hpp"
#include "iur/train.hpp"

#include "oracles.hpp"
#include "util.hpp"

using namespace iur;
using Clock = std::chrono::steady_clock;

namespace {

struct Gate {
  std::string name;
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

std::vector<std::string> texts(const std::vector<Token>& ts) {
  std::vector<std::string> out;
  for (const auto& t : ts) out.push_back(t.text);
  return out;
}

std::vector<Token> make_tokens(const std::vector<std::string>& words) {
  std::vector<Token> out;
  for (size_t i = 0; i < words.size(); ++i) {
    Token t;
    t.text = words[i];
    t.index = (int)i;
    out.push_back(std::move(t));
  }
  return out;
}

TokenSeq split_ws(const std::string& s) {
  TokenSeq out;
  std::istringstream is(s);
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Sample fixture_sample() {
  auto samples = load_corpus(testutil::data_path("tolstoy.jsonl"));
  attach_parses(samples, testutil::data_path("tolstoy.conllu"));
  return samples.at(0);
}

// ------------------------------------------------------------- criterion 1

Gate label_fidelity() {
  Gate g{"edit labels on the three-turn pronoun dialogue"};
  Sample s = fixture_sample();
  derive_labels(s);

  using L = EditLabel;
  const std::vector<L> want = {
      L::NA, L::NA, L::NA, L::NA, L::IN, L::IN, L::NA,   // [S1] Do you know Anna Karenina ?
      L::NA, L::NA, L::NA, L::NW, L::NA,                 // [S2] Who is Tolstoy ?
      L::NA, L::RP, L::NA, L::NA, L::NA, L::NA,          // [S1] He is the author .
  };
  if (!s.labels || s.labels->size() != want.size()) {
    g.detail = "label sequence missing or wrong length";
    return g;
  }
  int hits = 0;
  for (size_t i = 0; i < want.size(); ++i)
    if ((*s.labels)[i] == want[i]) ++hits;
  g.pass = hits == (int)want.size();
  g.detail = std::to_string(hits) + "/" + std::to_string(want.size()) + " positions";
  return g;
}

// ------------------------------------------------------------- criterion 2

Gate alignment_roundtrip() {
  Gate g{"alignment round-trip on 1000 random pairs"};
  static const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g", "h"};
  std::mt19937_64 gen(2026);
  auto rand_tokens = [&]() {
    std::vector<std::string> out;
    int len = (int)(gen() % 11);
    for (int i = 0; i < len; ++i) out.push_back(words[gen() % words.size()]);
    return out;
  };

  int ok = 0;
  const int total = 1000;
  for (int t = 0; t < total; ++t) {
    auto u_words = rand_tokens();
    auto v_words = rand_tokens();
    auto u = make_tokens(u_words);
    auto v = make_tokens(v_words);
    if (apply_script(u, align(u, v)) == v_words) ++ok;
  }
  g.pass = ok == total;
  g.detail = std::to_string(ok) + "/" + std::to_string(total) + " exact";
  return g;
}

// ------------------------------------------------------------- criterion 3

Gate consistency_sweep() {
  Gate g{"label consistency on 1000 synthetic samples"};
  SynthConfig sc;
  sc.num_samples = 1000;
  sc.seed = 909;
  auto samples = generate_synthetic(sc);
  int ok = 0;
  for (auto& s : samples) {
    derive_labels(s);
    if (check_consistency(s).empty()) ++ok;
  }
  g.pass = ok == (int)samples.size();
  g.detail = std::to_string(ok) + "/" + std::to_string(samples.size()) + " clean";
  return g;
}

// ------------------------------------------------------------- criterion 4

Tensor rand_tensor(std::vector<int> shape, std::mt19937_64& gen, double sd = 0.5) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<double> data((size_t)n);
  for (auto& v : data) v = dist(gen);
  return Tensor::from(std::move(shape), std::move(data));
}

Gate gradient_soundness() {
  Gate g{"gradient soundness: graph layer, guided attention, label head, joint"};
  const double kEps = 1e-5;
  const double kTol = 1e-4;
  const double kBudgetSeconds = 120.0;
  auto t0 = Clock::now();

  SynthConfig sc;
  sc.num_samples = 2;
  sc.seed = 7;
  auto data = generate_synthetic(sc);
  Vocab vocab = Vocab::build(data);

  ModelConfig mc;
  mc.d_u = 8;
  mc.heads = 2;
  mc.enc_layers = 1;
  mc.dec_layers = 1;
  mc.rgcn_layers = 1;
  mc.ffn_mult = 2;
  mc.max_len = 48;
  mc.vocab_size = vocab.size();
  mc.validate();

  Model model(mc, 7);
  model.set_training(false);
  std::vector<EncodedSample> enc;
  for (auto& s : data) enc.push_back(prepare_sample(s, vocab, mc));

  std::mt19937_64 gen(40);
  double worst = 0.0;
  std::string worst_where;
  auto note = [&](const char* where, const GradCheckResult& r) {
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_where = where;
    }
  };

  // Relational message passing in isolation: a constant input keeps every
  // gradient path inside the graph layer.
  {
    const int k = (int)enc[0].input_ids.size();
    Tensor h0 = rand_tensor({k, mc.d_u}, gen);
    Tensor w = rand_tensor({k, mc.d_u}, gen);
    auto forward = [&]() {
      return sum_all(mul(model.contextualize(constant(h0), enc[0].graph), constant(w)));
    };
    note("graph layer", grad_check(forward, model.params(), kEps));
  }

  // The attention rescale as a free-standing function, with both the raw
  // scores and the per-position weights treated as parameters.
  {
    ParamStore local;
    Value raw = local.create("raw", rand_tensor({3, 5}, gen));
    Value lam = local.create("lam", Tensor::from({5}, {0.15, 0.7, 0.4, 0.05, 0.9}));
    Tensor w = rand_tensor({3, 5}, gen);
    auto forward = [&]() {
      return sum_all(mul(Model::guided_attention_weights(raw, lam, 1.0), constant(w)));
    };
    note("guided attention", grad_check(forward, local, kEps));
  }

  // Label head in isolation, through its own cross-entropy.
  {
    const int k = (int)enc[0].input_ids.size();
    Tensor h0 = rand_tensor({k, mc.d_u}, gen);
    std::vector<double> mask((size_t)k, 1.0);
    auto forward = [&]() {
      return Model::eol_loss(model.label_distribution(constant(h0)), enc[0].gold_labels,
                             mask);
    };
    note("label head", grad_check(forward, model.params(), kEps));
  }

  // Full joint loss over the two-sample batch, once per guidance mode. The
  // detached mode treats the guidance vector as a constant, so its numeric
  // reference freezes the vector at the base parameters.
  for (GuidanceGrad gg : {GuidanceGrad::Flow, GuidanceGrad::Detach}) {
    ModelConfig mg = mc;
    mg.guidance_grad = gg;
    Model m(mg, 7);
    m.set_training(false);

    std::vector<std::vector<double>> frozen;
    if (gg == GuidanceGrad::Detach) {
      for (const auto& es : enc) {
        auto base = m.forward_joint(es, 1.0, 1.0);
        const Tensor& lam = base.lambda->value;
        frozen.emplace_back(lam.data(), lam.data() + lam.size());
      }
    }
    auto forward = [&]() -> Value {
      Value total;
      for (size_t i = 0; i < enc.size(); ++i) {
        auto out = m.forward_joint(enc[i], 1.0, 1.0,
                                   gg == GuidanceGrad::Detach ? &frozen[i] : nullptr);
        Value term = scale(out.joint, 1.0 / (double)enc.size());
        total = total ? add(total, term) : term;
      }
      return total;
    };
    note(gg == GuidanceGrad::Flow ? "joint, flowing guidance" : "joint, detached guidance",
         grad_check(forward, m.params(), kEps));
  }

  double elapsed = seconds_since(t0);
  g.pass = worst < kTol && elapsed < kBudgetSeconds;
  g.detail = "max rel err " + fmt(worst, 8) + " (" + worst_where + "), " +
             fmt(elapsed, 1) + "s";
  return g;
}

// ------------------------------------------------------------- criterion 5

Gate guided_attention_values() {
  Gate g{"attention rescale closed-form values and guidance-off identity"};
  const double kTolValue = 1e-4;
  const double kTolIdentity = 1e-12;

  Value raw = constant(Tensor::from({1, 2}, {1.0, 1.0}));
  Value lam = constant(Tensor::from({2}, {0.0, 1.0}));
  Tensor w = Model::guided_attention_weights(raw, lam, 1.0)->value;
  bool values_ok = std::abs(w.at(0) - 0.2689) <= kTolValue &&
                   std::abs(w.at(1) - 0.7311) <= kTolValue;

  // Zero guidance must reproduce plain softmax attention exactly.
  std::mt19937_64 gen(50);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    Tensor raw_t = rand_tensor({4, 6}, gen, 1.5);
    Value zeros = constant(Tensor::zeros({6}));
    Tensor guided = Model::guided_attention_weights(constant(raw_t), zeros, 1.0)->value;
    Tensor plain = softmax_rows(constant(raw_t))->value;
    for (std::int64_t i = 0; i < guided.size(); ++i)
      worst = std::max(worst, std::abs(guided.at(i) - plain.at(i)));
  }

  g.pass = values_ok && worst <= kTolIdentity;
  g.detail = "weights [" + fmt(w.at(0)) + ", " + fmt(w.at(1)) + "], zero-guidance gap " +
             fmt(worst, 16);
  return g;
}

// ------------------------------------------------------------- criterion 6

Gate metric_oracle() {
  Gate g{"generation metrics vs. brute-force oracle on 500 random corpora"};
  const double kTol = 1e-9;

  static const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
  std::mt19937_64 gen(2468);
  auto seq = [&](int max_len) {
    TokenSeq s;
    int len = (int)(gen() % (max_len + 1));
    for (int i = 0; i < len; ++i) s.push_back(vocab[gen() % vocab.size()]);
    return s;
  };

  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    std::vector<TokenSeq> cands, refs, incs;
    int samples = 1 + (int)(gen() % 4);
    for (int i = 0; i < samples; ++i) {
      cands.push_back(seq(8));
      refs.push_back(seq(8));
      incs.push_back(seq(6));
    }
    for (int n : {1, 2, 4})
      worst = std::max(worst, std::abs(bleu_n(cands, refs, n) - oracle::bleu(cands, refs, n)));
    for (int n : {1, 2, 3}) {
      RestorationScore got = restoration_fn(cands, refs, incs, n);
      oracle::Prf want = oracle::restoration(cands, refs, incs, n);
      worst = std::max({worst, std::abs(got.precision - want.p), std::abs(got.recall - want.r),
                        std::abs(got.f1 - want.f)});
    }
  }

  // Fixture: restoring "Tolstoy" but not "of Anna Karenina" scores F1 0.4.
  RestorationScore fx = restoration_fn({split_ws("Tolstoy is the author .")},
                                       {split_ws("Tolstoy is the author of Anna Karenina .")},
                                       {split_ws("He is the author .")}, 1);
  bool fixture_ok = std::abs(fx.f1 - 0.4) <= kTol;

  g.pass = worst <= kTol && fixture_ok;
  g.detail = "max oracle gap " + fmt(worst, 12) + ", fixture F1 " + fmt(fx.f1, 4);
  return g;
}

// ------------------------------------------------------------- criterion 7

Gate schedule_fidelity() {
  Gate g{"loss weight schedule: three warm-up epochs, then joint"};
  TrainConfig tc;
  bool ok = tc.warmup_epochs == 3 && tc.alpha1 == 1.0 && tc.alpha2 == 1.0;
  for (int e = 0; e < 3; ++e) ok = ok && schedule(e, tc) == std::make_pair(1.0, 0.0);
  for (int e = 3; e < 10; ++e) ok = ok && schedule(e, tc) == std::make_pair(1.0, 1.0);

  // Custom weights keep the same on/off shape.
  TrainConfig tw;
  tw.alpha1 = 0.7;
  tw.alpha2 = 1.3;
  ok = ok && schedule(2, tw) == std::make_pair(0.7, 0.0) &&
       schedule(3, tw) == std::make_pair(0.7, 1.3);

  ModelConfig mc;
  ok = ok && mc.tau_d == 1.0;

  g.pass = ok;
  g.detail = "epochs 0-2 weight (1,0), 3+ weight (1,1), temperature floor 1";
  return g;
}

// ------------------------------------------------------- criteria 8 and 9

struct TrainedRuns {
  bool trained = false;
  double dev_em = -1.0;
  double seconds_a = 0.0, seconds_b = 0.0;
  bool identical = false;
  std::string final_ckpt;
  std::string mid_ckpt;  // part-trained family member, for the diagnostic
  std::string error;
};

TrainedRuns run_desk_scale(const testutil::TempDir& tmp) {
  TrainedRuns out;
  SynthConfig sc;
  sc.num_samples = 2200;
  sc.seed = 808;
  auto all = generate_synthetic(sc);
  std::vector<Sample> train_set(all.begin(), all.begin() + 2000);
  std::vector<Sample> dev_set(all.begin() + 2000, all.end());
  Vocab vocab = Vocab::build(train_set);

  ModelConfig mc;
  mc.d_u = 64;
  mc.enc_layers = 2;
  mc.dec_layers = 2;
  mc.heads = 4;
  mc.rgcn_layers = 2;
  mc.max_len = 48;
  mc.vocab_size = vocab.size();

  TrainConfig tc;
  tc.epochs = 10;
  tc.warmup_epochs = 1;
  tc.batch_size = 16;
  tc.learning_rate = 1e-3;
  tc.seed = 11;

  auto run = [&](const std::string& dir, double& seconds) {
    TrainConfig cfg = tc;
    cfg.checkpoint_dir = tmp.file(dir);
    Model model(mc, cfg.seed);
    auto t0 = Clock::now();
    TrainResult r = train(model, train_set, dev_set, vocab, cfg);
    seconds = seconds_since(t0);
    return r;
  };

  TrainResult a = run("run_a", out.seconds_a);
  TrainResult b = run("run_b", out.seconds_b);

  out.trained = true;
  out.dev_em = a.log.epochs.empty() ? -1.0 : a.log.epochs.back().dev_em;
  std::string bytes_a = slurp(a.final_checkpoint);
  std::string bytes_b = slurp(b.final_checkpoint);
  out.identical = !bytes_a.empty() && bytes_a == bytes_b;
  out.final_ckpt = a.final_checkpoint;
  out.mid_ckpt = tmp.file("run_a") + "/epoch_5.ckpt";

  // Criterion 9 reads checkpoints back, so keep run_a on disk; the TempDir
  // cleans everything up when the suite exits.
  return out;
}

Gate desk_scale_training(const TrainedRuns& r) {
  Gate g{"desk-scale training to exact-match 0.90 with reproducible checkpoints"};
  const double kMinEm = 0.90;
  const double kBudgetSeconds = 1800.0;
  if (!r.trained) {
    g.detail = r.error.empty() ? "training did not run" : r.error;
    return g;
  }
  g.pass = r.dev_em >= kMinEm && r.seconds_a <= kBudgetSeconds && r.identical;
  g.detail = "held-out EM " + fmt(r.dev_em, 3) + ", " + fmt(r.seconds_a, 1) + "s and " +
             fmt(r.seconds_b, 1) + "s per run, checkpoints " +
             (r.identical ? "byte-identical" : "DIFFER");
  return g;
}

Gate guidance_diagnostic(const TrainedRuns& r) {
  Gate g{"guidance on/off redundancy report from one checkpoint"};
  if (!r.trained) {
    g.detail = "no checkpoint to evaluate";
    return g;
  }

  // A part-trained family member keeps the report informative: at full
  // convergence both decodes are exact and both rates are zero.
  std::string path = std::ifstream(r.mid_ckpt).good() ? r.mid_ckpt : r.final_ckpt;
  Checkpoint ck = load_checkpoint(path);
  Model model = model_from_checkpoint(ck);
  model.set_training(false);

  SynthConfig sc;
  sc.num_samples = 2200;
  sc.seed = 808;
  auto all = generate_synthetic(sc);
  std::vector<Sample> dev(all.begin() + 2000, all.end());
  std::vector<EncodedSample> enc;
  for (auto& s : dev) enc.push_back(prepare_sample(s, ck.vocab, model.config()));

  MetricReport guided = evaluate_dev(model, enc, dev, ck.vocab, false);
  MetricReport plain = evaluate_dev(model, enc, dev, ck.vocab, true);
  double drop = plain.redundant - guided.redundant;

  // Direction check only: the report must exist, an inversion is surfaced
  // but does not gate the suite.
  g.pass = true;
  g.detail = "redundant rate guided " + fmt(guided.redundant) + ", disabled " +
             fmt(plain.redundant) + ", drop " + fmt(drop);
  if (guided.redundant > plain.redundant) g.detail += " (inversion: guided runs higher)";
  return g;
}

// ------------------------------------------------------------ criterion 10

Gate augmentation_integrity() {
  Gate g{"augmentations preserve the reference and prompts carry the instruction"};

  // Edit-based sweeps: the reference must never move.
  SynthConfig sc;
  sc.num_samples = 500;
  sc.seed = 510;
  auto samples = generate_synthetic(sc);
  int applied_del = 0, applied_ins = 0, preserved = 0, applicable = 0;
  for (auto& s : samples) {
    derive_labels(s);
    for (int dir = 0; dir < 2; ++dir) {
      auto aug = dir == 0 ? augment_coref_to_ellipsis(s) : augment_ellipsis_to_coref(s);
      if (!aug) continue;
      ++applicable;
      (dir == 0 ? applied_del : applied_ins)++;
      if (texts(aug->rewritten.tokens) == texts(s.rewritten.tokens) &&
          aug->rewritten.text == s.rewritten.text)
        ++preserved;
    }
  }
  bool sweep_ok = applicable > 0 && applied_del > 0 && applied_ins > 0 &&
                  preserved == applicable;

  // Mock transport: well-formed responses accepted, count mismatches not.
  Sample fx = fixture_sample();
  std::string well_formed;
  for (size_t i = 0; i < fx.dialogue.history.size(); ++i) {
    if (i) well_formed += "; ";
    well_formed += fx.dialogue.history[i].text;
  }
  bool accepts = parse_and_validate(well_formed, fx).status == AugmentStatus::Accepted;
  bool accepts_with_tail =
      parse_and_validate(well_formed + "; " + fx.dialogue.incomplete.text, fx).status ==
      AugmentStatus::Accepted;
  bool rejects = parse_and_validate(fx.dialogue.history[0].text, fx).status ==
                 AugmentStatus::Rejected;

  // Every outgoing request must embed the instruction at the top of the
  // prompt, checked on the wire rather than in the builder.
  std::mutex mu;
  std::vector<std::string> bodies;
  EchoTransport echo;
  FnTransport recorder([&](const std::string& url, const std::string& body) {
    {
      std::lock_guard<std::mutex> lock(mu);
      bodies.push_back(body);
    }
    return echo.post(url, body, {});
  });

  LlmConfig cfg;
  cfg.require_auth = false;
  cfg.backoff_initial_ms = 0.0;
  std::vector<Sample> batch(samples.begin(), samples.begin() + 20);
  auto results = augment_batch(batch, PromptTemplate::defaults(), recorder, cfg);

  int instructed = 0, accepted_echo = 0;
  for (const auto& body : bodies) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) continue;
    std::string content = j.at("messages").at(0).at("content").get<std::string>();
    if (content.rfind(kAugmentInstruction, 0) == 0) ++instructed;
  }
  for (const auto& r : results)
    if (r.status == AugmentStatus::Accepted) ++accepted_echo;
  bool wire_ok = bodies.size() == batch.size() && instructed == (int)bodies.size() &&
                 accepted_echo == (int)batch.size();

  g.pass = sweep_ok && accepts && accepts_with_tail && rejects && wire_ok;
  g.detail = std::to_string(preserved) + "/" + std::to_string(applicable) +
             " references preserved, mock " + (accepts && accepts_with_tail ? "accepts" : "MISSES") +
             "/" + (rejects ? "rejects" : "ADMITS") + ", " + std::to_string(instructed) + "/" +
             std::to_string(bodies.size()) + " prompts instructed";
  return g;
}

Gate guarded(const char* name, Gate (*fn)()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return Gate{name, false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  auto t0 = Clock::now();
  std::vector<Gate> gates;
  gates.push_back(guarded("edit labels on the three-turn pronoun dialogue", label_fidelity));
  gates.push_back(guarded("alignment round-trip on 1000 random pairs", alignment_roundtrip));
  gates.push_back(guarded("label consistency on 1000 synthetic samples", consistency_sweep));
  gates.push_back(guarded("gradient soundness: graph layer, guided attention, label head, joint",
                          gradient_soundness));
  gates.push_back(guarded("attention rescale closed-form values and guidance-off identity",
                          guided_attention_values));
  gates.push_back(guarded("generation metrics vs. brute-force oracle on 500 random corpora",
                          metric_oracle));
  gates.push_back(guarded("loss weight schedule: three warm-up epochs, then joint",
                          schedule_fidelity));

  testutil::TempDir tmp;
  TrainedRuns runs;
  try {
    runs = run_desk_scale(tmp);
  } catch (const std::exception& e) {
    runs.error = std::string("exception: ") + e.what();
  }
  gates.push_back(desk_scale_training(runs));
  try {
    gates.push_back(guidance_diagnostic(runs));
  } catch (const std::exception& e) {
    gates.push_back({"guidance on/off redundancy report from one checkpoint", false,
                     std::string("exception: ") + e.what()});
  }
  gates.push_back(guarded("augmentations preserve the reference and prompts carry the instruction",
                          augmentation_integrity));

  int failed = 0;
  for (size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    if (!g.pass) ++failed;
    std::printf("%s  %2zu  %s (%s)\n", g.pass ? "PASS" : "FAIL", i + 1, g.name.c_str(),
                g.detail.c_str());
  }
  std::printf("%s: %zu/%zu criteria in %.1fs\n", failed == 0 ? "ACCEPTED" : "REJECTED",
              gates.size() - failed, gates.size(), seconds_since(t0));
  return failed == 0 ? 0 : 1;
}

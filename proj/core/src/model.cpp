#include "iur/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

namespace iur {

using json = nlohmann::json;

const char* to_string(LabelMode m) {
  switch (m) {
    case LabelMode::Soft: return "soft";
    case LabelMode::OneHot: return "onehot";
    case LabelMode::Merged: return "merged";
  }
  return "soft";
}

const char* to_string(GuidanceGrad g) {
  return g == GuidanceGrad::Flow ? "flow" : "detach";
}

std::optional<LabelMode> label_mode_from(std::string_view s) {
  if (s == "soft") return LabelMode::Soft;
  if (s == "onehot") return LabelMode::OneHot;
  if (s == "merged") return LabelMode::Merged;
  return std::nullopt;
}

std::optional<GuidanceGrad> guidance_grad_from(std::string_view s) {
  if (s == "flow") return GuidanceGrad::Flow;
  if (s == "detach") return GuidanceGrad::Detach;
  return std::nullopt;
}

void ModelConfig::validate() const {
  if (d_u <= 0 || heads <= 0 || d_u % heads != 0)
    throw InputError("d_u must be positive and divisible by heads");
  if (enc_layers < 0 || dec_layers < 0 || rgcn_layers < 0)
    throw InputError("layer counts must be non-negative");
  if (vocab_size <= 4) throw InputError("vocab_size must exceed the reserved ids");
  if (max_len < 1) throw InputError("max_len must be at least 1");
  if (ffn_mult < 1) throw InputError("ffn_mult must be at least 1");
  if (tau_d <= 0.0) throw InputError("tau_d must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw InputError("dropout must lie in [0,1)");
}

std::string model_config_to_json(const ModelConfig& cfg) {
  json j{{"d_u", cfg.d_u},
         {"enc_layers", cfg.enc_layers},
         {"dec_layers", cfg.dec_layers},
         {"heads", cfg.heads},
         {"rgcn_layers", cfg.rgcn_layers},
         {"vocab_size", cfg.vocab_size},
         {"max_len", cfg.max_len},
         {"ffn_mult", cfg.ffn_mult},
         {"label_hidden", cfg.label_hidden},
         {"tau_d", cfg.tau_d},
         {"dropout", cfg.dropout},
         {"label_mode", to_string(cfg.label_mode)},
         {"guidance_grad", to_string(cfg.guidance_grad)}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig cfg;
  cfg.d_u = j.at("d_u").get<int>();
  cfg.enc_layers = j.at("enc_layers").get<int>();
  cfg.dec_layers = j.at("dec_layers").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.rgcn_layers = j.at("rgcn_layers").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.ffn_mult = j.at("ffn_mult").get<int>();
  cfg.label_hidden = j.at("label_hidden").get<int>();
  cfg.tau_d = j.at("tau_d").get<double>();
  cfg.dropout = j.at("dropout").get<double>();
  auto lm = label_mode_from(j.at("label_mode").get<std::string>());
  auto gg = guidance_grad_from(j.at("guidance_grad").get<std::string>());
  if (!lm || !gg) throw InputError("checkpoint config has unknown mode strings");
  cfg.label_mode = *lm;
  cfg.guidance_grad = *gg;
  return cfg;
}

// ----------------------------------------------------------- prepare input

EncodedSample prepare_sample(Sample& s, const Vocab& vocab, const ModelConfig& cfg,
                             const PosLexicon& lex) {
  ensure_parses(s, lex);
  LinearizedDialogue lin = linearize(s.dialogue);
  if (lin.size() > cfg.max_len)
    throw InputError("dialogue stream length " + std::to_string(lin.size()) +
                     " exceeds max_len " + std::to_string(cfg.max_len));

  EncodedSample es;
  es.graph = build_graph(s.dialogue, lin);
  es.input_ids.reserve(lin.size());
  for (const auto& t : lin.tokens) es.input_ids.push_back(vocab.id(t));

  if (!s.labels) derive_labels(s);
  if (static_cast<int>(s.labels->size()) != lin.size())
    throw InputError("label count does not match the linearized stream");
  es.gold_labels.reserve(lin.size());
  for (EditLabel l : *s.labels) {
    int cls = static_cast<int>(l);
    if (cfg.label_mode == LabelMode::Merged) cls = l == EditLabel::NA ? 0 : 1;
    es.gold_labels.push_back(cls);
  }

  const int t_len = static_cast<int>(s.rewritten.tokens.size()) + 1;
  if (t_len > cfg.max_len)
    throw InputError("rewritten length " + std::to_string(t_len) + " exceeds max_len " +
                     std::to_string(cfg.max_len));
  es.decoder_in.push_back(Vocab::kBos);
  for (const auto& t : s.rewritten.tokens) {
    int id = vocab.id(t.text);
    es.decoder_in.push_back(id);
    es.targets.push_back(id);
  }
  es.targets.push_back(Vocab::kEos);
  return es;
}

// ------------------------------------------------------------------- model

namespace {

// Box-Muller over a raw mt19937_64 stream; identical on every platform.
struct InitRng {
  std::mt19937_64 gen;
  explicit InitRng(std::uint64_t seed) : gen(seed) {}
  double uniform() { return ((gen() >> 11) + 1.0) * 0x1.0p-53; }  // (0, 1]
  double normal() {
    double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

Tensor normal_init(InitRng& rng, std::vector<int> shape, double std_dev) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal() * std_dev;
  return t;
}

Tensor sinusoidal_positions(int max_len, int d) {
  Tensor pe({max_len, d});
  for (int pos = 0; pos < max_len; ++pos)
    for (int i = 0; i < d; ++i) {
      double angle = pos / std::pow(10000.0, 2.0 * (i / 2) / d);
      pe.at(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  pos_enc_ = sinusoidal_positions(cfg_.max_len, cfg_.d_u);
  InitRng rng(seed);
  const int d = cfg_.d_u;
  const int f = d * cfg_.ffn_mult;
  const double w_std = 1.0 / std::sqrt(static_cast<double>(d));

  auto attn_params = [&](const std::string& prefix) {
    for (const char* n : {"wq", "wk", "wv", "wo"})
      params_.create(prefix + "." + n, normal_init(rng, {d, d}, w_std));
    for (const char* n : {"bq", "bk", "bv", "bo"})
      params_.create(prefix + "." + n, Tensor::zeros({d}));
  };
  auto ln_params = [&](const std::string& prefix) {
    params_.create(prefix + ".g", Tensor::full({d}, 1.0));
    params_.create(prefix + ".b", Tensor::zeros({d}));
  };
  auto ffn_params = [&](const std::string& prefix) {
    params_.create(prefix + ".w1", normal_init(rng, {d, f}, w_std));
    params_.create(prefix + ".b1", Tensor::zeros({f}));
    params_.create(prefix + ".w2", normal_init(rng, {f, d}, 1.0 / std::sqrt(f)));
    params_.create(prefix + ".b2", Tensor::zeros({d}));
  };

  params_.create("embed", normal_init(rng, {cfg_.vocab_size, d}, 0.1));
  for (int i = 0; i < cfg_.enc_layers; ++i) {
    const std::string base = "enc." + std::to_string(i);
    attn_params(base + ".attn");
    ln_params(base + ".ln1");
    ffn_params(base + ".ffn");
    ln_params(base + ".ln2");
  }
  const double r_std = w_std / kNumRelations;
  for (int l = 0; l < cfg_.rgcn_layers; ++l)
    for (int r = 0; r < kNumRelations; ++r) {
      const std::string base = "rgcn." + std::to_string(l) + "." + std::to_string(r);
      params_.create(base + ".w", normal_init(rng, {d, d}, r_std));
      params_.create(base + ".b", Tensor::zeros({d}));
    }
  const int lh = cfg_.label_hidden_dim();
  params_.create("label.w1", normal_init(rng, {d, lh}, w_std));
  params_.create("label.b1", Tensor::zeros({lh}));
  params_.create("label.w2",
                 normal_init(rng, {lh, cfg_.num_label_classes()}, 1.0 / std::sqrt(lh)));
  params_.create("label.b2", Tensor::zeros({cfg_.num_label_classes()}));
  for (int i = 0; i < cfg_.dec_layers; ++i) {
    const std::string base = "dec." + std::to_string(i);
    attn_params(base + ".self");
    ln_params(base + ".ln1");
    attn_params(base + ".cross");
    ln_params(base + ".ln2");
    ffn_params(base + ".ffn");
    ln_params(base + ".ln3");
  }
  params_.create("out.w", normal_init(rng, {d, cfg_.vocab_size}, w_std));
  params_.create("out.b", Tensor::zeros({cfg_.vocab_size}));
}

Value Model::maybe_dropout(Value x) {
  if (!training_ || cfg_.dropout == 0.0) return x;
  return dropout(x, cfg_.dropout, dropout_seed_++);
}

Value Model::embed_with_positions(const std::vector<int>& ids) {
  if (ids.empty()) throw InputError("empty token sequence");
  if (static_cast<int>(ids.size()) > cfg_.max_len)
    throw InputError("sequence length " + std::to_string(ids.size()) + " exceeds max_len " +
                     std::to_string(cfg_.max_len));
  for (int id : ids)
    if (id < 0 || id >= cfg_.vocab_size)
      throw InputError("token id " + std::to_string(id) + " outside vocabulary");
  Value e = embedding_lookup(p("embed"), ids);
  const int n = static_cast<int>(ids.size());
  Tensor pe({n, cfg_.d_u});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < cfg_.d_u; ++j) pe.at(i, j) = pos_enc_.at(i, j);
  return add(e, constant(std::move(pe)));
}

Value Model::attention(const std::string& prefix, Value xq, Value xkv,
                       const Tensor* add_mask, const Value* guide_w) {
  const int d = cfg_.d_u;
  const int dh = d / cfg_.heads;
  Value q = add_rowvec(matmul(xq, p(prefix + ".wq")), p(prefix + ".bq"));
  Value k = add_rowvec(matmul(xkv, p(prefix + ".wk")), p(prefix + ".bk"));
  Value v = add_rowvec(matmul(xkv, p(prefix + ".wv")), p(prefix + ".bv"));
  std::vector<Value> heads_out;
  heads_out.reserve(cfg_.heads);
  for (int h = 0; h < cfg_.heads; ++h) {
    Value qh = slice_cols(q, h * dh, (h + 1) * dh);
    Value kh = slice_cols(k, h * dh, (h + 1) * dh);
    Value vh = slice_cols(v, h * dh, (h + 1) * dh);
    Value scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(dh));
    if (guide_w) scores = mul_rowvec(scores, *guide_w);  // pre-softmax rescale
    if (add_mask) scores = add(scores, constant(*add_mask));
    Value attn = softmax_rows(scores);
    heads_out.push_back(matmul(attn, vh));
  }
  Value ctx = concat(heads_out, 1);
  return add_rowvec(matmul(ctx, p(prefix + ".wo")), p(prefix + ".bo"));
}

Value Model::ffn(const std::string& prefix, Value x) {
  Value h = relu(add_rowvec(matmul(x, p(prefix + ".w1")), p(prefix + ".b1")));
  return add_rowvec(matmul(h, p(prefix + ".w2")), p(prefix + ".b2"));
}

Value Model::encode(const std::vector<int>& ids) {
  Value x = embed_with_positions(ids);
  for (int i = 0; i < cfg_.enc_layers; ++i) {
    const std::string base = "enc." + std::to_string(i);
    Value a = maybe_dropout(attention(base + ".attn", x, x, nullptr, nullptr));
    x = layer_norm(add(x, a), p(base + ".ln1.g"), p(base + ".ln1.b"));
    Value f = maybe_dropout(ffn(base + ".ffn", x));
    x = layer_norm(add(x, f), p(base + ".ln2.g"), p(base + ".ln2.b"));
  }
  return x;
}

Value Model::contextualize(Value h_enc, const DialogueGraph& g) {
  const int k = h_enc->value.rows();
  if (g.num_nodes != k)
    throw InputError("graph has " + std::to_string(g.num_nodes) + " nodes, stream has " +
                     std::to_string(k));
  Value s = h_enc;
  for (int l = 0; l < cfg_.rgcn_layers; ++l) {
    Value acc;
    for (int r = 0; r < kNumRelations; ++r) {
      Tensor adj({k, k});
      for (auto [dst, src] : g.edges[r]) adj.at(dst, src) = 1.0;
      const std::string base = "rgcn." + std::to_string(l) + "." + std::to_string(r);
      Value m = matmul(constant(std::move(adj)), s);
      Value t = add_rowvec(matmul(m, p(base + ".w")), p(base + ".b"));
      acc = acc ? add(acc, t) : t;
    }
    s = relu(acc);
  }
  return scale(add(s, h_enc), 0.5);
}

Value Model::label_distribution(Value h_hat) {
  Value h = tanh_v(add_rowvec(matmul(h_hat, p("label.w1")), p("label.b1")));
  Value logits = add_rowvec(matmul(h, p("label.w2")), p("label.b2"));
  return softmax_rows(logits);
}

Value Model::guidance_weights(Value label_dist) {
  const int k = label_dist->value.rows();
  Value lam;
  switch (cfg_.label_mode) {
    case LabelMode::Soft:
      lam = add_scalar(neg(reshape(slice_cols(label_dist, 0, 1), {k})), 1.0);
      break;
    case LabelMode::Merged:
      lam = reshape(slice_cols(label_dist, 1, 2), {k});
      break;
    case LabelMode::OneHot: {
      // argmax is piecewise constant, so the weight never carries gradient
      Tensor t({k});
      const int c = label_dist->value.cols();
      for (int i = 0; i < k; ++i) {
        int best = 0;
        for (int j = 1; j < c; ++j)
          if (label_dist->value.at(i, j) > label_dist->value.at(i, best)) best = j;
        t.at(i) = best == 0 ? 0.0 : 1.0;
      }
      return constant(std::move(t));
    }
  }
  return cfg_.guidance_grad == GuidanceGrad::Detach ? detach(lam) : lam;
}

Value Model::guided_attention_weights(Value raw_scores, Value lambda, double tau_d) {
  return softmax_rows(mul_rowvec(raw_scores, add_scalar(lambda, tau_d)));
}

Value Model::decode_train(const std::vector<int>& dec_in, Value h_hat, Value lambda) {
  if (lambda->value.rank() != 1 || lambda->value.shape()[0] != h_hat->value.rows())
    throw InputError("guidance vector does not match the encoded stream");
  Value x = embed_with_positions(dec_in);
  const int t = static_cast<int>(dec_in.size());
  Tensor causal({t, t});
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) causal.at(i, j) = -1e30;
  Value guide = add_scalar(lambda, cfg_.tau_d);
  for (int i = 0; i < cfg_.dec_layers; ++i) {
    const std::string base = "dec." + std::to_string(i);
    Value a = maybe_dropout(attention(base + ".self", x, x, &causal, nullptr));
    x = layer_norm(add(x, a), p(base + ".ln1.g"), p(base + ".ln1.b"));
    Value c = maybe_dropout(attention(base + ".cross", x, h_hat, nullptr, &guide));
    x = layer_norm(add(x, c), p(base + ".ln2.g"), p(base + ".ln2.b"));
    Value f = maybe_dropout(ffn(base + ".ffn", x));
    x = layer_norm(add(x, f), p(base + ".ln3.g"), p(base + ".ln3.b"));
  }
  return add_rowvec(matmul(x, p("out.w")), p("out.b"));
}

Value Model::eol_loss(Value label_dist, const std::vector<int>& gold,
                      const std::vector<double>& mask) {
  if (gold.size() != mask.size() ||
      static_cast<int>(gold.size()) != label_dist->value.rows())
    throw InputError("label loss inputs disagree on sequence length");
  double denom = 0.0;
  for (double m : mask) denom += m;
  if (denom <= 0.0) throw InputError("label loss mask excludes every position");
  Value logp = pick(log_v(label_dist), gold);
  Value masked = mul(logp, constant(Tensor::from({static_cast<int>(mask.size())}, mask)));
  return neg(scale(sum_all(masked), 1.0 / denom));
}

Value Model::gen_loss(Value logits, const std::vector<int>& targets) {
  if (static_cast<int>(targets.size()) != logits->value.rows())
    throw InputError("generation loss needs one target per decoder position");
  Value logp = pick(log_v(softmax_rows(logits)), targets);
  return neg(mean_all(logp));
}

Model::JointOut Model::forward_joint(const EncodedSample& es, double alpha1, double alpha2,
                                     const std::vector<double>* lambda_override) {
  JointOut out;
  Value h = encode(es.input_ids);
  Value h_hat = contextualize(h, es.graph);
  out.label_dist = label_distribution(h_hat);
  if (lambda_override) {
    if (lambda_override->size() != es.input_ids.size())
      throw InputError("guidance override length does not match the stream");
    out.lambda = constant(
        Tensor::from({static_cast<int>(lambda_override->size())}, *lambda_override));
  } else {
    out.lambda = guidance_weights(out.label_dist);
  }
  Value logits = decode_train(es.decoder_in, h_hat, out.lambda);
  out.gen = gen_loss(logits, es.targets);
  std::vector<double> mask(es.gold_labels.size(), 1.0);
  out.eol = eol_loss(out.label_dist, es.gold_labels, mask);
  out.joint = add(scale(out.gen, alpha1), scale(out.eol, alpha2));
  return out;
}

std::vector<int> Model::generate(const EncodedSample& es, DecodeStrategy strategy,
                                 int beam_k, const std::vector<double>* lambda_override) {
  const bool was_training = training_;
  training_ = false;
  struct Restore {
    Model* m;
    bool v;
    ~Restore() { m->training_ = v; }
  } restore{this, was_training};

  Value h = encode(es.input_ids);
  Value h_hat = contextualize(h, es.graph);
  Value lambda;
  if (lambda_override) {
    if (lambda_override->size() != es.input_ids.size())
      throw InputError("guidance override length does not match the stream");
    lambda = constant(
        Tensor::from({static_cast<int>(lambda_override->size())}, *lambda_override));
  } else {
    lambda = guidance_weights(label_distribution(h_hat));
  }

  const int budget = cfg_.max_len - 1;  // BOS occupies one slot
  if (budget <= 0) return {};
  if (strategy == DecodeStrategy::Greedy) beam_k = 1;
  if (beam_k < 1) throw InputError("beam width must be at least 1");

  struct Beam {
    std::vector<int> seq;  // starts with BOS
    double logp = 0.0;
    bool done = false;
    double score() const {
      int n = static_cast<int>(seq.size()) - 1;
      return logp / std::max(1, n);  // length-normalized
    }
  };
  std::vector<Beam> beams{{{Vocab::kBos}, 0.0, false}};

  for (int step = 0; step < budget; ++step) {
    bool all_done = true;
    for (const auto& b : beams)
      if (!b.done) { all_done = false; break; }
    if (all_done) break;

    std::vector<Beam> candidates;
    for (const auto& b : beams) {
      if (b.done) { candidates.push_back(b); continue; }
      Value logits = decode_train(b.seq, h_hat, lambda);
      const int rows = logits->value.rows();
      Value logp_row = log_v(softmax_rows(slice_rows(logits, rows - 1, rows)));
      // top-k token ids by log-prob, ties to the smaller id
      std::vector<int> ids(cfg_.vocab_size);
      for (int i = 0; i < cfg_.vocab_size; ++i) ids[i] = i;
      const Tensor& row = logp_row->value;
      std::partial_sort(ids.begin(), ids.begin() + std::min(beam_k, cfg_.vocab_size),
                        ids.end(), [&](int x, int y) {
                          if (row.at(0, x) != row.at(0, y)) return row.at(0, x) > row.at(0, y);
                          return x < y;
                        });
      for (int i = 0; i < std::min(beam_k, cfg_.vocab_size); ++i) {
        Beam nb = b;
        nb.logp += row.at(0, ids[i]);
        if (ids[i] == Vocab::kEos) {
          nb.done = true;
        } else {
          nb.seq.push_back(ids[i]);
          if (static_cast<int>(nb.seq.size()) - 1 >= budget) nb.done = true;
        }
        candidates.push_back(std::move(nb));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Beam& x, const Beam& y) { return x.score() > y.score(); });
    if (static_cast<int>(candidates.size()) > beam_k) candidates.resize(beam_k);
    beams = std::move(candidates);
  }

  const Beam* best = nullptr;
  for (const auto& b : beams) {
    if (!best || b.score() > best->score()) best = &b;
  }
  std::vector<int> out(best->seq.begin() + 1, best->seq.end());
  return out;
}

}  // namespace iur

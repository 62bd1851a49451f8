#include "iur/train.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "iur/labels.hpp"
#include "json.hpp"

namespace iur {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InputError("config key '" + key + "': not a number: '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long l = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return (int)l;
  } catch (const std::exception&) {
    throw InputError("config key '" + key + "': not an integer: '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw InputError("config key '" + key + "': not an unsigned integer: '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InputError("config key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace

void TrainConfig::validate() const {
  if (alpha1 < 0 || alpha2 < 0) throw InputError("loss weights must be >= 0");
  if (warmup_epochs < 0) throw InputError("warmup_epochs must be >= 0");
  if (epochs < 0) throw InputError("epochs must be >= 0");
  if (warmup_epochs > epochs) throw InputError("warmup_epochs must not exceed epochs");
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (!(learning_rate > 0)) throw InputError("learning_rate must be > 0");
  if (optimizer != "adam" && optimizer != "sgd")
    throw InputError("optimizer must be 'adam' or 'sgd', got '" + optimizer + "'");
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw InputError(path + ":" + std::to_string(lineno) + ": empty key");
    if (kv.count(key))
      throw InputError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

bool apply_train_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "alpha1") cfg.alpha1 = to_double(key, value);
  else if (key == "alpha2") cfg.alpha2 = to_double(key, value);
  else if (key == "warmup_epochs") cfg.warmup_epochs = to_int(key, value);
  else if (key == "epochs") cfg.epochs = to_int(key, value);
  else if (key == "batch_size") cfg.batch_size = to_int(key, value);
  else if (key == "learning_rate") cfg.learning_rate = to_double(key, value);
  else if (key == "seed") cfg.seed = to_u64(key, value);
  else if (key == "optimizer") cfg.optimizer = value;
  else if (key == "adam_beta1") cfg.adam_beta1 = to_double(key, value);
  else if (key == "adam_beta2") cfg.adam_beta2 = to_double(key, value);
  else if (key == "adam_eps") cfg.adam_eps = to_double(key, value);
  else if (key == "augment_edit") cfg.augment_edit = to_bool(key, value);
  else if (key == "checkpoint_dir") cfg.checkpoint_dir = value;
  else return false;
  return true;
}

bool apply_model_key(ModelConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "d_u") cfg.d_u = to_int(key, value);
  else if (key == "enc_layers") cfg.enc_layers = to_int(key, value);
  else if (key == "dec_layers") cfg.dec_layers = to_int(key, value);
  else if (key == "heads") cfg.heads = to_int(key, value);
  else if (key == "rgcn_layers") cfg.rgcn_layers = to_int(key, value);
  else if (key == "max_len") cfg.max_len = to_int(key, value);
  else if (key == "ffn_mult") cfg.ffn_mult = to_int(key, value);
  else if (key == "label_hidden") cfg.label_hidden = to_int(key, value);
  else if (key == "tau_d") cfg.tau_d = to_double(key, value);
  else if (key == "dropout") cfg.dropout = to_double(key, value);
  else if (key == "label_mode") {
    auto m = label_mode_from(value);
    if (!m) throw InputError("config key 'label_mode': unknown mode '" + value + "'");
    cfg.label_mode = *m;
  } else if (key == "guidance_grad") {
    auto g = guidance_grad_from(value);
    if (!g) throw InputError("config key 'guidance_grad': unknown mode '" + value + "'");
    cfg.guidance_grad = *g;
  } else return false;
  return true;
}

std::pair<double, double> schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw InputError("epoch must be >= 0");
  return {cfg.alpha1, epoch < cfg.warmup_epochs ? 0.0 : cfg.alpha2};
}

std::string epoch_stats_to_json(const EpochStats& s) {
  nlohmann::json j;
  j["epoch"] = s.epoch;
  j["l_gen"] = s.l_gen;
  j["l_eol"] = s.l_eol;
  j["joint"] = s.joint;
  j["label_acc"] = s.label_acc;
  j["alpha1_eff"] = s.alpha1_eff;
  j["alpha2_eff"] = s.alpha2_eff;
  if (s.dev_em >= 0) j["dev_em"] = s.dev_em;
  else j["dev_em"] = nullptr;
  j["wall_seconds"] = s.wall_seconds;
  return j.dump();
}

std::string train_log_to_jsonl(const TrainLog& log) {
  std::string out;
  for (const auto& e : log.epochs) {
    out += epoch_stats_to_json(e);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------- optimizer

Optimizer::Optimizer(const TrainConfig& cfg, ParamStore& params) : cfg_(cfg), params_(&params) {
  if (cfg_.optimizer == "adam") {
    for (const auto& [name, v] : params.all()) {
      m_[name] = Tensor::zeros(v->value.shape());
      v_[name] = Tensor::zeros(v->value.shape());
    }
  }
}

void Optimizer::step() {
  ++t_;
  const double lr = cfg_.learning_rate;
  for (const auto& [name, val] : params_->all()) {
    Node& n = *val;
    n.ensure_grad();  // missing gradient counts as zero
    const std::int64_t sz = n.value.size();
    if (cfg_.optimizer == "sgd") {
      for (std::int64_t i = 0; i < sz; ++i) n.value.data()[i] -= lr * n.grad.data()[i];
      continue;
    }
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, (double)t_);
    const double c2 = 1.0 - std::pow(b2, (double)t_);
    for (std::int64_t i = 0; i < sz; ++i) {
      const double g = n.grad.data()[i];
      m.data()[i] = b1 * m.data()[i] + (1.0 - b1) * g;
      v.data()[i] = b2 * v.data()[i] + (1.0 - b2) * g * g;
      const double mhat = m.data()[i] / c1;
      const double vhat = v.data()[i] / c2;
      n.value.data()[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
    }
  }
}

// -------------------------------------------------------------- checkpoints

static_assert(std::endian::native == std::endian::little,
              "checkpoint format stores raw little-endian doubles");

namespace {

constexpr char kMagic[8] = {'I', 'U', 'R', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_raw(std::ofstream& os, const void* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), (std::streamsize)n);
}

void read_raw(std::ifstream& is, void* p, std::size_t n, const std::string& what) {
  is.read(reinterpret_cast<char*>(p), (std::streamsize)n);
  if ((std::size_t)is.gcount() != n) throw InputError("checkpoint truncated while reading " + what);
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const Vocab& vocab) {
  nlohmann::json meta;
  meta["model"] = nlohmann::json::parse(model_config_to_json(model.config()));
  meta["vocab"] = nlohmann::json::parse(vocab.to_json());
  auto& plist = meta["params"] = nlohmann::json::array();
  for (const auto& [name, v] : model.params().all()) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = v->value.shape();
    plist.push_back(std::move(e));
  }
  const std::string meta_str = meta.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot write checkpoint: " + path);
  write_raw(os, kMagic, sizeof(kMagic));
  std::uint32_t ver = kCheckpointVersion;
  write_raw(os, &ver, sizeof(ver));
  std::uint64_t len = meta_str.size();
  write_raw(os, &len, sizeof(len));
  write_raw(os, meta_str.data(), meta_str.size());
  for (const auto& [name, v] : model.params().all()) {
    write_raw(os, v->value.data(), (std::size_t)v->value.size() * sizeof(double));
  }
  if (!os) throw InputError("write failed for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open checkpoint: " + path);

  char magic[8];
  read_raw(is, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw InputError("not a checkpoint file: " + path);
  std::uint32_t ver = 0;
  read_raw(is, &ver, sizeof(ver), "version");
  if (ver != kCheckpointVersion)
    throw InputError("unsupported checkpoint version " + std::to_string(ver) + " (expected " +
                     std::to_string(kCheckpointVersion) + "): " + path);
  std::uint64_t len = 0;
  read_raw(is, &len, sizeof(len), "metadata length");
  std::string meta_str(len, '\0');
  read_raw(is, meta_str.data(), len, "metadata");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("checkpoint metadata is not valid JSON: " + std::string(e.what()));
  }
  if (!meta.contains("model") || !meta.contains("vocab") || !meta.contains("params"))
    throw InputError("checkpoint metadata missing model/vocab/params");

  Checkpoint c;
  c.config = model_config_from_json(meta["model"].dump());
  c.vocab = Vocab::from_json(meta["vocab"].dump());
  for (const auto& e : meta["params"]) {
    std::string name = e.at("name").get<std::string>();
    std::vector<int> shape = e.at("shape").get<std::vector<int>>();
    Tensor t(shape);
    read_raw(is, t.data(), (std::size_t)t.size() * sizeof(double), "parameter " + name);
    if (c.params.count(name)) throw InputError("duplicate parameter in checkpoint: " + name);
    c.params[name] = std::move(t);
  }
  char extra;
  if (is.read(&extra, 1).gcount() != 0)
    throw InputError("checkpoint has trailing bytes after last parameter: " + path);
  return c;
}

Model model_from_checkpoint(const Checkpoint& c) {
  Model m(c.config, 0);
  const auto& live = m.params().all();
  if (live.size() != c.params.size())
    throw InputError("checkpoint parameter count " + std::to_string(c.params.size()) +
                     " does not match model (" + std::to_string(live.size()) + ")");
  for (const auto& [name, v] : live) {
    auto it = c.params.find(name);
    if (it == c.params.end()) throw InputError("checkpoint is missing parameter: " + name);
    if (!v->value.same_shape(it->second))
      throw InputError("checkpoint parameter " + name + " has shape " + it->second.shape_str() +
                       ", model expects " + v->value.shape_str());
    v->value = it->second;
  }
  return m;
}

// ---------------------------------------------------------------- training

std::vector<std::string> ids_to_tokens(const std::vector<int>& ids, const Vocab& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab.token(id));
  return out;
}

MetricReport evaluate_dev(Model& model, const std::vector<EncodedSample>& encoded,
                          const std::vector<Sample>& samples, const Vocab& vocab,
                          bool guidance_off) {
  if (encoded.size() != samples.size())
    throw InputError("evaluate_dev: encoded/sample count mismatch");
  std::vector<TokenSeq> cands, refs, incs;
  cands.reserve(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    std::vector<int> ids;
    if (guidance_off) {
      std::vector<double> zeros(encoded[i].input_ids.size(), 0.0);
      ids = model.generate(encoded[i], DecodeStrategy::Greedy, 1, &zeros);
    } else {
      ids = model.generate(encoded[i], DecodeStrategy::Greedy, 1);
    }
    cands.push_back(ids_to_tokens(ids, vocab));
    TokenSeq ref, inc;
    for (const auto& t : samples[i].rewritten.tokens) ref.push_back(t.text);
    for (const auto& t : samples[i].dialogue.incomplete.tokens) inc.push_back(t.text);
    refs.push_back(std::move(ref));
    incs.push_back(std::move(inc));
  }
  return evaluate_all(cands, refs, incs);
}

namespace {

struct LabelAccuracy {
  long correct = 0, total = 0;
  void accumulate(const Tensor& dist, const std::vector<int>& gold) {
    for (int r = 0; r < dist.rows(); ++r) {
      int best = 0;
      for (int c = 1; c < dist.cols(); ++c)
        if (dist.at(r, c) > dist.at(r, best)) best = c;
      if (best == gold[r]) ++correct;
      ++total;
    }
  }
  double value() const { return total > 0 ? (double)correct / total : 0.0; }
};

void dump_batch(const std::string& path, const std::vector<Sample>& samples,
                const std::vector<size_t>& batch) {
  std::ofstream os(path, std::ios::trunc);
  for (size_t idx : batch) os << sample_to_json(samples[idx]) << "\n";
}

}  // namespace

TrainResult train(Model& model, std::vector<Sample> train_set, std::vector<Sample> dev_set,
                  const Vocab& vocab, const TrainConfig& cfg, std::ostream* log_lines) {
  cfg.validate();
  if (train_set.empty()) throw InputError("training set is empty");

  if (cfg.augment_edit) {
    const size_t n = train_set.size();
    for (size_t i = 0; i < n; ++i) {
      if (auto a = augment_coref_to_ellipsis(train_set[i])) train_set.push_back(std::move(*a));
      if (auto b = augment_ellipsis_to_coref(train_set[i])) train_set.push_back(std::move(*b));
    }
  }

  std::vector<EncodedSample> enc_train;
  enc_train.reserve(train_set.size());
  for (auto& s : train_set) enc_train.push_back(prepare_sample(s, vocab, model.config()));
  std::vector<EncodedSample> enc_dev;
  enc_dev.reserve(dev_set.size());
  for (auto& s : dev_set) enc_dev.push_back(prepare_sample(s, vocab, model.config()));

  std::filesystem::create_directories(cfg.checkpoint_dir);
  std::mt19937_64 rng(cfg.seed);
  Optimizer opt(cfg, model.params());
  model.set_training(true);

  TrainResult result;
  std::vector<size_t> order(enc_train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto [a1, a2] = schedule(epoch, cfg);

    // Fisher-Yates with an explicit modulo reduction: the shuffle must not
    // depend on the standard library's distribution implementation.
    for (size_t i = order.size() - 1; i > 0; --i) {
      size_t j = (size_t)(rng() % (i + 1));
      std::swap(order[i], order[j]);
    }

    double sum_gen = 0, sum_eol = 0, sum_joint = 0;
    LabelAccuracy acc;

    for (size_t b0 = 0; b0 < order.size(); b0 += (size_t)cfg.batch_size) {
      const size_t b1 = std::min(order.size(), b0 + (size_t)cfg.batch_size);
      std::vector<size_t> batch(order.begin() + b0, order.begin() + b1);
      const double inv = 1.0 / (double)batch.size();

      model.params().zero_grad();
      for (size_t idx : batch) {
        Tape tape;
        auto out = model.forward_joint(enc_train[idx], a1, a2);
        const double joint = out.joint->value.at(0);
        if (!std::isfinite(joint)) {
          const std::string dump = cfg.checkpoint_dir + "/nonfinite_batch.jsonl";
          dump_batch(dump, train_set, batch);
          throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", sample " + std::to_string(idx) + "; batch dumped to " +
                                   dump);
        }
        sum_gen += out.gen->value.at(0);
        sum_eol += out.eol->value.at(0);
        sum_joint += joint;
        acc.accumulate(out.label_dist->value, enc_train[idx].gold_labels);
        tape.backward(scale(out.joint, inv));
      }
      opt.step();
    }

    EpochStats st;
    st.epoch = epoch;
    st.l_gen = sum_gen / (double)enc_train.size();
    st.l_eol = sum_eol / (double)enc_train.size();
    st.joint = sum_joint / (double)enc_train.size();
    st.label_acc = acc.value();
    st.alpha1_eff = a1;
    st.alpha2_eff = a2;

    if (!enc_dev.empty()) {
      st.dev_em = evaluate_dev(model, enc_dev, dev_set, vocab).em;
    }

    const std::string epoch_path = cfg.checkpoint_dir + "/epoch_" + std::to_string(epoch) + ".ckpt";
    save_checkpoint(epoch_path, model, vocab);
    result.final_checkpoint = epoch_path;
    if (st.dev_em >= 0 && st.dev_em > result.best_dev_em) {
      result.best_dev_em = st.dev_em;
      result.best_checkpoint = cfg.checkpoint_dir + "/best.ckpt";
      save_checkpoint(result.best_checkpoint, model, vocab);
    }

    st.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(st);
    if (log_lines) {
      (*log_lines) << epoch_stats_to_json(st) << "\n";
      log_lines->flush();
    }
  }

  model.set_training(false);
  return result;
}

}  // namespace iur

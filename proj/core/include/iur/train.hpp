#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "iur/corpus.hpp"
#include "iur/metrics.hpp"
#include "iur/model.hpp"

namespace iur {

struct TrainConfig {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  int warmup_epochs = 3;
  int epochs = 10;
  int batch_size = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::string optimizer = "adam";  // "adam" | "sgd"
  // Adam constants are part of the artifact contract so reruns stay
  // bit-identical across builds.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool augment_edit = false;  // append edit-based variants of the train set
  std::string checkpoint_dir = "checkpoints";

  void validate() const;
};

// Config files are `key = value` lines, '#' starts a comment. Appliers
// return false on unknown keys so callers can overlay TrainConfig and
// ModelConfig keys from one file and reject typos.
std::map<std::string, std::string> parse_kv_file(const std::string& path);
bool apply_train_key(TrainConfig& cfg, const std::string& key, const std::string& value);
bool apply_model_key(ModelConfig& cfg, const std::string& key, const std::string& value);

// Loss weights in effect at an epoch: (alpha1, 0) while warming up, then
// (alpha1, alpha2). Pure function.
std::pair<double, double> schedule(int epoch, const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double l_gen = 0.0;
  double l_eol = 0.0;  // logged during warm-up too, just not applied
  double joint = 0.0;
  double label_acc = 0.0;
  double alpha1_eff = 0.0;
  double alpha2_eff = 0.0;
  double dev_em = -1.0;  // -1 when there is no dev set
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

std::string epoch_stats_to_json(const EpochStats& s);
std::string train_log_to_jsonl(const TrainLog& log);

// Adam or plain SGD over a ParamStore. Missing gradients count as zero so a
// step is a pure function of (state, grads).
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, ParamStore& params);
  void step();

 private:
  TrainConfig cfg_;
  ParamStore* params_;
  long t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

// ------------------------------------------------------------- checkpoints
// Binary container: magic "IURCKPT\n", u32 format version, u64 metadata
// length, metadata JSON {model, vocab, params:[{name, shape}]}, then each
// parameter's doubles raw little-endian in metadata order. See
// docs/checkpoint.md.

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  std::map<std::string, Tensor> params;
};

void save_checkpoint(const std::string& path, const Model& model, const Vocab& vocab);
Checkpoint load_checkpoint(const std::string& path);

// Fresh model with the checkpoint's config and parameters.
Model model_from_checkpoint(const Checkpoint& c);

// --------------------------------------------------------------- training

struct TrainResult {
  TrainLog log;
  std::string final_checkpoint;
  std::string best_checkpoint;  // empty without a dev set
  double best_dev_em = -1.0;
};

// Greedy-decodes every sample and scores against the references.
// guidance_off forces lambda = 0 (guidance disabled) for the decode.
MetricReport evaluate_dev(Model& model, const std::vector<EncodedSample>& encoded,
                          const std::vector<Sample>& samples, const Vocab& vocab,
                          bool guidance_off = false);

std::vector<std::string> ids_to_tokens(const std::vector<int>& ids, const Vocab& vocab);

// Single-threaded joint training. Deterministic for a fixed seed: data
// order, dropout, and optimizer state depend only on (config, corpus).
// Checkpoints land in cfg.checkpoint_dir: epoch_<N>.ckpt each epoch plus
// best.ckpt whenever dev EM improves. A non-finite loss aborts after
// dumping the offending batch next to the checkpoints.
TrainResult train(Model& model, std::vector<Sample> train_set, std::vector<Sample> dev_set,
                  const Vocab& vocab, const TrainConfig& cfg,
                  std::ostream* log_lines = nullptr);

}  // namespace iur

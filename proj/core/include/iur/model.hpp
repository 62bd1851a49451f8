#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iur/autodiff.hpp"
#include "iur/corpus.hpp"
#include "iur/graph.hpp"
#include "iur/labels.hpp"

namespace iur {

// soft: lambda_i = 1 - P(NA). onehot: 0/1 by argmax. merged: two-way head
// {untouched, edited} with lambda_i = P(edited).
enum class LabelMode { Soft, OneHot, Merged };
// flow: generation gradients reach the label head through lambda.
// detach: lambda acts as a constant during backprop.
enum class GuidanceGrad { Flow, Detach };
enum class DecodeStrategy { Greedy, Beam };

const char* to_string(LabelMode m);
const char* to_string(GuidanceGrad g);
std::optional<LabelMode> label_mode_from(std::string_view s);
std::optional<GuidanceGrad> guidance_grad_from(std::string_view s);

struct ModelConfig {
  int d_u = 64;         // shared model width, divisible by heads
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 4;
  int rgcn_layers = 2;  // message-passing depth I; 0 bypasses the graph
  int vocab_size = 0;
  int max_len = 64;     // bound on stream length and decoder length (BOS included)
  int ffn_mult = 2;
  int label_hidden = 0;  // 0 means d_u
  double tau_d = 1.0;    // attention temperature floor
  double dropout = 0.0;
  LabelMode label_mode = LabelMode::Soft;
  GuidanceGrad guidance_grad = GuidanceGrad::Flow;

  int num_label_classes() const { return label_mode == LabelMode::Merged ? 2 : 4; }
  int label_hidden_dim() const { return label_hidden > 0 ? label_hidden : d_u; }
  void validate() const;
};

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

// A sample turned into model inputs. gold_labels are class indices in the
// active label mode; merged collapses RP/NW/IN into class 1.
struct EncodedSample {
  std::vector<int> input_ids;    // linearized stream, markers included
  std::vector<int> gold_labels;  // one per stream position
  DialogueGraph graph;
  std::vector<int> decoder_in;   // BOS + rewritten tokens
  std::vector<int> targets;      // rewritten tokens + EOS
};

// Tokenizes nothing: the sample must already carry tokens. Missing parses
// fall back to the heuristic parser; missing labels are derived.
EncodedSample prepare_sample(Sample& s, const Vocab& vocab, const ModelConfig& cfg,
                             const PosLexicon& lex = PosLexicon::default_english());

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  void set_training(bool on) { training_ = on; }

  // Token embeddings + sinusoidal positions through the self-attention
  // stack. Rejects out-of-vocabulary ids and streams longer than max_len.
  Value encode(const std::vector<int>& ids);

  // Relational message passing over h (ReLU updates, one weight and bias
  // per relation per layer, bias added once per relation) followed by the
  // elementwise mean with the encoder states.
  Value contextualize(Value h_enc, const DialogueGraph& g);

  Value label_distribution(Value h_hat);  // [K, C] row-stochastic

  // Per-position guidance weight in [0,1] under the active label mode.
  // Returns a gradient-carrying value unless the config detaches it.
  Value guidance_weights(Value label_dist);

  // Teacher-forced decoder pass; cross-attention logits are rescaled by
  // (tau_d + lambda_i) before softmax in every layer and head.
  Value decode_train(const std::vector<int>& dec_in, Value h_hat, Value lambda);

  struct JointOut {
    Value joint, gen, eol;
    Value label_dist;
    Value lambda;
  };
  // lambda_override, when set, replaces the guidance vector (still computes
  // the label distribution and its loss). Used for guidance-off evaluation
  // and for freezing lambda.
  JointOut forward_joint(const EncodedSample& es, double alpha1, double alpha2,
                         const std::vector<double>* lambda_override = nullptr);

  std::vector<int> generate(const EncodedSample& es, DecodeStrategy strategy,
                            int beam_k = 4,
                            const std::vector<double>* lambda_override = nullptr);

  static Value eol_loss(Value label_dist, const std::vector<int>& gold,
                        const std::vector<double>& mask);
  static Value gen_loss(Value logits, const std::vector<int>& targets);

  // softmax over (tau_d + lambda_i) * score_{j,i}; the rescale happens
  // before normalization, so lambda == 0 reproduces plain attention.
  static Value guided_attention_weights(Value raw_scores, Value lambda, double tau_d);

 private:
  ModelConfig cfg_;
  ParamStore params_;
  Tensor pos_enc_;  // [max_len, d_u]
  bool training_ = true;
  std::uint64_t dropout_seed_ = 0;

  Value p(const std::string& name) const { return params_.get(name); }
  Value maybe_dropout(Value x);
  Value attention(const std::string& prefix, Value xq, Value xkv, const Tensor* add_mask,
                  const Value* guide_w);
  Value ffn(const std::string& prefix, Value x);
  Value embed_with_positions(const std::vector<int>& ids);
};

}  // namespace iur

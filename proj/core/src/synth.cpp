#include <random>
#include <string>
#include <vector>

#include "iur/corpus.hpp"

namespace iur {

namespace {

const std::vector<std::string> kEntities = {"Alice", "Bob",   "Carol", "David",
                                            "Erin",  "Frank", "Grace", "Henry"};
const std::vector<std::string> kVerbs = {"likes", "visited", "knows",
                                         "met",   "reads",   "wrote"};
const std::vector<std::string> kObjects = {"the book",   "the movie",  "the report",
                                           "the garden", "the museum", "the song"};
const std::vector<std::string> kPronouns = {"he", "she", "it", "they"};

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  // explicit reductions keep the stream identical across standard libraries
  int pick(int n) { return static_cast<int>(gen() % static_cast<std::uint64_t>(n)); }
  double uniform() { return (gen() >> 11) * 0x1.0p-53; }
};

Utterance make_utt(int speaker, std::string text) {
  Utterance u;
  u.speaker = speaker;
  u.text = std::move(text);
  return u;
}

}  // namespace

std::vector<Sample> generate_synthetic(const SynthConfig& cfg) {
  if (cfg.num_samples < 0) throw InputError("num_samples must be non-negative");
  if (cfg.coref_ratio < 0.0 || cfg.coref_ratio > 1.0)
    throw InputError("coref_ratio must lie in [0, 1]");
  const int ne = std::min<int>(std::max(cfg.num_entities, 1), kEntities.size());
  const int nv = std::min<int>(std::max(cfg.num_verbs, 1), kVerbs.size());
  const int no = std::min<int>(std::max(cfg.num_objects, 1), kObjects.size());

  Rng rng(cfg.seed);
  std::vector<Sample> out;
  out.reserve(cfg.num_samples);

  for (int i = 0; i < cfg.num_samples; ++i) {
    const bool coref = rng.uniform() < cfg.coref_ratio;
    Sample s;
    s.origin = Origin::Synthetic;

    if (coref) {
      const std::string& x = kEntities[rng.pick(ne)];
      const std::string& v1 = kVerbs[rng.pick(nv)];
      const std::string& v2 = kVerbs[rng.pick(nv)];
      const std::string& o1 = kObjects[rng.pick(no)];
      const std::string& o2 = kObjects[rng.pick(no)];
      const std::string& pron = kPronouns[rng.pick(4)];
      const int variant = rng.pick(3);
      if (variant == 0) {
        const std::string& x2 = kEntities[rng.pick(ne)];
        s.dialogue.history.push_back(make_utt(0, "do you know " + x2 + "?"));
        s.dialogue.history.push_back(make_utt(1, x + " " + v1 + " " + o1 + "."));
        s.dialogue.incomplete = make_utt(0, pron + " " + v2 + " " + o2 + ".");
      } else if (variant == 1) {
        s.dialogue.history.push_back(make_utt(0, "do you know " + x + "?"));
        s.dialogue.history.push_back(make_utt(1, "i met " + x + "."));
        s.dialogue.incomplete = make_utt(0, pron + " " + v2 + " " + o2 + ".");
      } else {
        s.dialogue.history.push_back(make_utt(0, x + " " + v1 + " " + o1 + "."));
        s.dialogue.incomplete = make_utt(1, pron + " " + v2 + " " + o2 + ".");
      }
      s.rewritten = make_utt(s.dialogue.incomplete.speaker, x + " " + v2 + " " + o2 + ".");
    } else {
      const std::string& y = kEntities[rng.pick(ne)];
      const std::string& z = kEntities[rng.pick(ne)];
      const std::string& v1 = kVerbs[rng.pick(nv)];
      const std::string& v2 = kVerbs[rng.pick(nv)];
      const std::string& o = kObjects[rng.pick(no)];
      const int variant = rng.pick(2);
      if (variant == 0) {
        s.dialogue.history.push_back(make_utt(0, "have you seen " + o + "?"));
        s.dialogue.history.push_back(make_utt(1, y + " " + v1 + " " + o + "."));
        s.dialogue.incomplete = make_utt(0, z + " " + v2 + ".");
      } else {
        s.dialogue.history.push_back(make_utt(0, y + " " + v1 + " " + o + "."));
        s.dialogue.incomplete = make_utt(1, z + " " + v2 + ".");
      }
      s.rewritten = make_utt(s.dialogue.incomplete.speaker, z + " " + v2 + " " + o + ".");
    }

    tokenize_sample(s, TokenizeMode::Word);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace iur

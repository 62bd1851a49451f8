#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "iur/edit_label.hpp"

namespace iur {

// Thrown for malformed user input (files, schemas, flag values).
// Anything else escaping a module is treated as an internal error.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Pos { Noun, Pron, Verb, Other };

const char* to_string(Pos p);

struct Token {
  std::string text;
  int index = 0;  // position within the owning utterance
  std::optional<Pos> pos;
  std::optional<int> global_index;  // position in the linearized stream
};

// heads[i] is the index of token i's head within the utterance, -1 for root.
struct ParseTree {
  std::vector<int> heads;
};

struct Utterance {
  int speaker = 0;
  std::string text;  // original surface form, preserved through IO
  std::vector<Token> tokens;
  std::optional<ParseTree> parse;
};

struct Dialogue {
  std::vector<Utterance> history;
  Utterance incomplete;

  int num_utterances() const { return static_cast<int>(history.size()) + 1; }
  const Utterance& utterance(int i) const {
    return i < static_cast<int>(history.size()) ? history[i] : incomplete;
  }
  Utterance& utterance(int i) {
    return i < static_cast<int>(history.size()) ? history[i] : incomplete;
  }
};

enum class Origin { Original, EditAugmented, LlmAugmented, Synthetic };

const char* to_string(Origin o);
std::optional<Origin> origin_from(std::string_view s);

struct Sample {
  Dialogue dialogue;
  Utterance rewritten;  // speaker mirrors the incomplete utterance
  std::optional<std::vector<EditLabel>> labels;  // aligned to the linearized stream
  std::optional<Origin> origin;                  // absent means original
  std::string extra_json;  // unknown record fields, kept verbatim for round-trips
};

// ---------------------------------------------------------------- tokenize

enum class TokenizeMode { Word, Char };

// Word mode splits on whitespace and detaches leading/trailing ASCII
// punctuation into separate tokens. Char mode emits one token per UTF-8
// code point, skipping whitespace.
std::vector<Token> tokenize(std::string_view text, TokenizeMode mode = TokenizeMode::Word);

void tokenize_utterance(Utterance& u, TokenizeMode mode = TokenizeMode::Word);
void tokenize_sample(Sample& s, TokenizeMode mode = TokenizeMode::Word);

// --------------------------------------------------------------- linearize

std::string speaker_marker(int speaker);  // "[S3]" for speaker 3

struct StreamPosition {
  int utterance = 0;     // 0..N-1, the last one is the incomplete utterance
  int token_index = -1;  // within the utterance, -1 for a speaker marker
  bool is_speaker_marker = false;
};

struct LinearizedDialogue {
  std::vector<std::string> tokens;  // surface forms, markers included
  std::vector<StreamPosition> provenance;
  std::vector<int> marker_position;  // stream position of each utterance's marker
  std::vector<int> token_offset;     // stream position of each utterance's first token

  int size() const { return static_cast<int>(tokens.size()); }
  int position_of(int utt, int tok) const { return token_offset[utt] + tok; }
};

// Emits "[S_i] tokens-of-u_i" for every utterance in order and assigns
// global_index on the dialogue's tokens.
LinearizedDialogue linearize(Dialogue& d);

// --------------------------------------------------------------------- POS

struct PosLexicon {
  std::set<std::string> pronouns;  // compared lowercase
  std::set<std::string> verbs;

  static const PosLexicon& default_english();
  Pos tag(std::string_view token) const;
};

void assign_pos(Utterance& u, const PosLexicon& lex = PosLexicon::default_english());
void assign_pos(Sample& s, const PosLexicon& lex = PosLexicon::default_english());

// Ordered pronoun list used by the edit augmenters; first entry is the
// default insertion choice.
std::vector<std::string> default_pronoun_lexicon();
std::vector<std::string> load_pronoun_lexicon(const std::string& path);

// ------------------------------------------------------------------ parses

// Deterministic fallback parse: root is the first VERB (middle token when
// no verb is tagged); every other token heads its neighbor toward the root.
void heuristic_parse(Utterance& u);

// Tags POS and fills missing parses heuristically for all dialogue
// utterances of the sample (the rewritten utterance carries no parse).
void ensure_parses(Sample& s, const PosLexicon& lex = PosLexicon::default_english());

// Reads a CoNLL-U style file (columns ID FORM _ UPOS ... HEAD ...) holding
// one sentence block per dialogue utterance in corpus order and attaches
// heads + POS. Token count or surface mismatches raise InputError.
void attach_parses(std::vector<Sample>& samples, const std::string& path);

// --------------------------------------------------------------- corpus IO

// JSONL, one record per line:
//   {"history":[{"speaker":0,"text":...}...],
//    "incomplete":{"speaker":1,"text":...},
//    "rewritten":"...", "labels":[...]?, "origin":"..."?}
// Unknown fields are preserved verbatim. Malformed records raise InputError
// naming the 1-based line number.
std::vector<Sample> load_corpus(const std::string& path, TokenizeMode mode = TokenizeMode::Word);
void save_corpus(const std::vector<Sample>& samples, const std::string& path);

std::string sample_to_json(const Sample& s);
Sample sample_from_json(const std::string& line, TokenizeMode mode, int line_no = 0);

// ------------------------------------------------------------------- vocab

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocab();

  // Deterministic: reserved ids, then markers for every speaker seen
  // (ascending), then all stream + rewritten token texts sorted.
  static Vocab build(const std::vector<Sample>& samples);

  int id(std::string_view text) const;  // kUnk when absent
  const std::string& token(int id) const;
  bool contains(std::string_view text) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const std::vector<Token>& toks) const;

  std::string to_json() const;
  static Vocab from_json(const std::string& j);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> index_;
  void push(const std::string& t);
};

// --------------------------------------------------------------- synthetic

struct SynthConfig {
  int num_samples = 100;
  std::uint64_t seed = 0;
  double coref_ratio = 0.5;  // fraction of coreference samples, rest ellipsis
  int num_entities = 8;      // grammar slice sizes, capped at the closed lists
  int num_verbs = 6;
  int num_objects = 6;
};

// Seeded template grammar over a closed vocabulary. Every sample is
// extractive: all restored tokens occur verbatim in the history.
std::vector<Sample> generate_synthetic(const SynthConfig& cfg);

}  // namespace iur

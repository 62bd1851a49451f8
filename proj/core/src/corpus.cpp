#include "iur/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace iur {

using json = nlohmann::json;

const char* to_string(Pos p) {
  switch (p) {
    case Pos::Noun: return "NOUN";
    case Pos::Pron: return "PRON";
    case Pos::Verb: return "VERB";
    case Pos::Other: return "OTHER";
  }
  return "OTHER";
}

const char* to_string(Origin o) {
  switch (o) {
    case Origin::Original: return "original";
    case Origin::EditAugmented: return "edit-augmented";
    case Origin::LlmAugmented: return "llm-augmented";
    case Origin::Synthetic: return "synthetic";
  }
  return "original";
}

std::optional<Origin> origin_from(std::string_view s) {
  if (s == "original") return Origin::Original;
  if (s == "edit-augmented") return Origin::EditAugmented;
  if (s == "llm-augmented") return Origin::LlmAugmented;
  if (s == "synthetic") return Origin::Synthetic;
  return std::nullopt;
}

// ---------------------------------------------------------------- tokenize

static bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }
static bool is_space(unsigned char c) { return std::isspace(c) != 0; }

static int utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;  // stray continuation byte, keep moving
}

std::vector<Token> tokenize(std::string_view text, TokenizeMode mode) {
  std::vector<std::string> out;
  if (mode == TokenizeMode::Char) {
    size_t i = 0;
    while (i < text.size()) {
      unsigned char c = text[i];
      if (is_space(c)) { ++i; continue; }
      size_t n = std::min<size_t>(utf8_len(c), text.size() - i);
      out.emplace_back(text.substr(i, n));
      i += n;
    }
  } else {
    size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && is_space(text[i])) ++i;
      size_t j = i;
      while (j < text.size() && !is_space(text[j])) ++j;
      if (j > i) {
        std::string_view chunk = text.substr(i, j - i);
        size_t l = 0, r = chunk.size();
        while (l < r && is_ascii_punct(chunk[l])) ++l;
        size_t m = r;
        while (m > l && is_ascii_punct(chunk[m - 1])) --m;
        for (size_t k = 0; k < l; ++k) out.emplace_back(1, chunk[k]);
        if (m > l) out.emplace_back(chunk.substr(l, m - l));
        for (size_t k = m; k < r; ++k) out.emplace_back(1, chunk[k]);
      }
      i = j;
    }
  }
  std::vector<Token> toks(out.size());
  for (size_t k = 0; k < out.size(); ++k) {
    toks[k].text = std::move(out[k]);
    toks[k].index = static_cast<int>(k);
  }
  return toks;
}

void tokenize_utterance(Utterance& u, TokenizeMode mode) { u.tokens = tokenize(u.text, mode); }

void tokenize_sample(Sample& s, TokenizeMode mode) {
  for (auto& u : s.dialogue.history) tokenize_utterance(u, mode);
  tokenize_utterance(s.dialogue.incomplete, mode);
  tokenize_utterance(s.rewritten, mode);
}

// --------------------------------------------------------------- linearize

std::string speaker_marker(int speaker) { return "[S" + std::to_string(speaker) + "]"; }

LinearizedDialogue linearize(Dialogue& d) {
  LinearizedDialogue lin;
  const int n = d.num_utterances();
  lin.marker_position.resize(n);
  lin.token_offset.resize(n);
  for (int ui = 0; ui < n; ++ui) {
    Utterance& u = d.utterance(ui);
    lin.marker_position[ui] = lin.size();
    lin.tokens.push_back(speaker_marker(u.speaker));
    lin.provenance.push_back({ui, -1, true});
    lin.token_offset[ui] = lin.size();
    for (auto& t : u.tokens) {
      t.global_index = lin.size();
      lin.tokens.push_back(t.text);
      lin.provenance.push_back({ui, t.index, false});
    }
  }
  return lin;
}

// --------------------------------------------------------------------- POS

static std::string lower(std::string_view s) {
  std::string r(s);
  std::transform(r.begin(), r.end(), r.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return r;
}

const PosLexicon& PosLexicon::default_english() {
  static const PosLexicon lex = [] {
    PosLexicon l;
    l.pronouns = {"i",    "you",  "he",   "she",  "it",    "we",   "they",
                  "who",  "whom", "me",   "him",  "her",   "us",   "them",
                  "this", "that", "these", "those", "mine", "yours", "his",
                  "hers", "ours", "theirs"};
    l.verbs = {"is",    "are",   "was",   "were",  "am",    "be",     "been",
               "do",    "does",  "did",   "have",  "has",   "had",    "know",
               "knows", "knew",  "like",  "likes", "liked", "visit",  "visits",
               "visited", "meet", "meets", "met",  "read",  "reads",  "wrote",
               "write", "writes", "see",  "sees",  "saw",   "seen",   "go",
               "goes",  "went",  "think", "thinks", "thought", "recommend",
               "recommends", "provide", "provides", "want", "wants",  "says",
               "said",  "say"};
    return l;
  }();
  return lex;
}

Pos PosLexicon::tag(std::string_view token) const {
  const std::string lo = lower(token);
  if (pronouns.count(lo)) return Pos::Pron;
  if (verbs.count(lo)) return Pos::Verb;
  bool alpha = !lo.empty();
  for (unsigned char c : lo)
    if (c < 128 && !std::isalpha(c)) { alpha = false; break; }
  return alpha ? Pos::Noun : Pos::Other;
}

void assign_pos(Utterance& u, const PosLexicon& lex) {
  for (auto& t : u.tokens)
    if (!t.pos) t.pos = lex.tag(t.text);
}

void assign_pos(Sample& s, const PosLexicon& lex) {
  for (auto& u : s.dialogue.history) assign_pos(u, lex);
  assign_pos(s.dialogue.incomplete, lex);
}

std::vector<std::string> default_pronoun_lexicon() {
  return {"it", "he", "she", "they", "this", "that"};
}

std::vector<std::string> load_pronoun_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open pronoun lexicon: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || is_space(line.back()))) line.pop_back();
    size_t b = 0;
    while (b < line.size() && is_space(line[b])) ++b;
    line.erase(0, b);
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  if (out.empty()) throw InputError("pronoun lexicon is empty: " + path);
  return out;
}

// ------------------------------------------------------------------ parses

void heuristic_parse(Utterance& u) {
  const int n = static_cast<int>(u.tokens.size());
  ParseTree tree;
  tree.heads.assign(n, -1);
  if (n == 0) { u.parse = tree; return; }
  int root = -1;
  for (int i = 0; i < n; ++i)
    if (u.tokens[i].pos && *u.tokens[i].pos == Pos::Verb) { root = i; break; }
  if (root < 0) root = n / 2;
  for (int i = 0; i < n; ++i) {
    if (i < root) tree.heads[i] = i + 1;
    else if (i > root) tree.heads[i] = i - 1;
  }
  u.parse = tree;
}

void ensure_parses(Sample& s, const PosLexicon& lex) {
  assign_pos(s, lex);
  for (int ui = 0; ui < s.dialogue.num_utterances(); ++ui) {
    Utterance& u = s.dialogue.utterance(ui);
    if (!u.parse) heuristic_parse(u);
  }
}

static Pos coarse_upos(std::string_view upos) {
  if (upos == "PRON") return Pos::Pron;
  if (upos == "NOUN" || upos == "PROPN") return Pos::Noun;
  if (upos == "VERB") return Pos::Verb;
  return Pos::Other;
}

void attach_parses(std::vector<Sample>& samples, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open parse file: " + path);

  struct Sent {
    std::vector<std::string> forms;
    std::vector<std::string> upos;
    std::vector<int> heads;  // 0-based, -1 root
  };
  std::vector<Sent> sents;
  Sent cur;
  std::string line;
  int line_no = 0;
  auto flush = [&] {
    if (!cur.forms.empty()) { sents.push_back(std::move(cur)); cur = {}; }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) { flush(); continue; }
    if (line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 7)
      throw InputError("parse file line " + std::to_string(line_no) +
                       ": expected at least 7 tab-separated columns");
    if (cols[0].find('-') != std::string::npos || cols[0].find('.') != std::string::npos)
      continue;  // multiword/empty nodes don't map to stream tokens
    cur.forms.push_back(cols[1]);
    cur.upos.push_back(cols[3]);
    int head;
    try {
      head = std::stoi(cols[6]);
    } catch (const std::exception&) {
      throw InputError("parse file line " + std::to_string(line_no) +
                       ": HEAD column is not an integer: " + cols[6]);
    }
    cur.heads.push_back(head - 1);  // CoNLL-U heads are 1-based, 0 = root
  }
  flush();

  size_t expected = 0;
  for (const auto& s : samples) expected += s.dialogue.num_utterances();
  if (sents.size() != expected)
    throw InputError("parse file has " + std::to_string(sents.size()) +
                     " sentences, corpus needs " + std::to_string(expected));

  size_t si = 0;
  for (size_t k = 0; k < samples.size(); ++k) {
    for (int ui = 0; ui < samples[k].dialogue.num_utterances(); ++ui, ++si) {
      Utterance& u = samples[k].dialogue.utterance(ui);
      const Sent& s = sents[si];
      if (s.forms.size() != u.tokens.size())
        throw InputError("sample " + std::to_string(k) + " utterance " +
                         std::to_string(ui) + ": parse has " +
                         std::to_string(s.forms.size()) + " tokens, utterance has " +
                         std::to_string(u.tokens.size()));
      for (size_t t = 0; t < u.tokens.size(); ++t) {
        if (s.forms[t] != u.tokens[t].text)
          throw InputError("sample " + std::to_string(k) + " utterance " +
                           std::to_string(ui) + " token " + std::to_string(t) +
                           ": parse form '" + s.forms[t] + "' != token '" +
                           u.tokens[t].text + "'");
        u.tokens[t].pos = coarse_upos(s.upos[t]);
      }
      ParseTree tree;
      tree.heads = s.heads;
      for (int h : tree.heads)
        if (h < -1 || h >= static_cast<int>(u.tokens.size()))
          throw InputError("sample " + std::to_string(k) + " utterance " +
                           std::to_string(ui) + ": head index out of range");
      u.parse = tree;
    }
  }
}

// --------------------------------------------------------------- corpus IO

static Utterance utterance_from_json(const json& j, TokenizeMode mode, int line_no,
                                     const char* what) {
  auto err = [&](const std::string& msg) {
    return InputError("line " + std::to_string(line_no) + ": " + std::string(what) +
                      ": " + msg);
  };
  if (!j.is_object()) throw err("expected an object");
  if (!j.contains("speaker") || !j["speaker"].is_number_integer())
    throw err("missing integer field 'speaker'");
  if (!j.contains("text") || !j["text"].is_string())
    throw err("missing string field 'text'");
  Utterance u;
  u.speaker = j["speaker"].get<int>();
  if (u.speaker < 0) throw err("speaker must be non-negative");
  u.text = j["text"].get<std::string>();
  tokenize_utterance(u, mode);
  return u;
}

Sample sample_from_json(const std::string& line, TokenizeMode mode, int line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw InputError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
  if (!j.is_object())
    throw InputError("line " + std::to_string(line_no) + ": record is not an object");

  auto err = [&](const std::string& msg) {
    return InputError("line " + std::to_string(line_no) + ": " + msg);
  };

  Sample s;
  if (!j.contains("history") || !j["history"].is_array())
    throw err("missing array field 'history'");
  for (const auto& h : j["history"])
    s.dialogue.history.push_back(utterance_from_json(h, mode, line_no, "history entry"));
  if (!j.contains("incomplete")) throw err("missing field 'incomplete'");
  s.dialogue.incomplete = utterance_from_json(j["incomplete"], mode, line_no, "incomplete");
  if (!j.contains("rewritten") || !j["rewritten"].is_string())
    throw err("missing string field 'rewritten'");
  s.rewritten.speaker = s.dialogue.incomplete.speaker;
  s.rewritten.text = j["rewritten"].get<std::string>();
  tokenize_utterance(s.rewritten, mode);

  if (j.contains("labels")) {
    if (!j["labels"].is_array()) throw err("'labels' must be an array of strings");
    std::vector<EditLabel> labels;
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) throw err("'labels' must be an array of strings");
      auto parsed = edit_label_from(l.get<std::string>());
      if (!parsed) throw err("unknown label '" + l.get<std::string>() + "'");
      labels.push_back(*parsed);
    }
    int k = s.dialogue.num_utterances();
    for (int ui = 0; ui < s.dialogue.num_utterances(); ++ui)
      k += static_cast<int>(s.dialogue.utterance(ui).tokens.size());
    if (static_cast<int>(labels.size()) != k)
      throw err("labels length " + std::to_string(labels.size()) +
                " != linearized stream length " + std::to_string(k));
    s.labels = std::move(labels);
  }
  if (j.contains("origin")) {
    if (!j["origin"].is_string()) throw err("'origin' must be a string");
    auto o = origin_from(j["origin"].get<std::string>());
    if (!o) throw err("unknown origin '" + j["origin"].get<std::string>() + "'");
    s.origin = o;
  }

  json extra = json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key != "history" && key != "incomplete" && key != "rewritten" &&
        key != "labels" && key != "origin")
      extra[key] = it.value();
  }
  if (!extra.empty()) s.extra_json = extra.dump();
  return s;
}

std::string sample_to_json(const Sample& s) {
  json j = json::object();
  json hist = json::array();
  for (const auto& u : s.dialogue.history)
    hist.push_back({{"speaker", u.speaker}, {"text", u.text}});
  j["history"] = std::move(hist);
  j["incomplete"] = {{"speaker", s.dialogue.incomplete.speaker},
                     {"text", s.dialogue.incomplete.text}};
  j["rewritten"] = s.rewritten.text;
  if (s.labels) {
    json labels = json::array();
    for (EditLabel l : *s.labels) labels.push_back(to_string(l));
    j["labels"] = std::move(labels);
  }
  if (s.origin) j["origin"] = to_string(*s.origin);
  if (!s.extra_json.empty()) {
    json extra = json::parse(s.extra_json);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  }
  return j.dump();
}

std::vector<Sample> load_corpus(const std::string& path, TokenizeMode mode) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus: " + path);
  std::vector<Sample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = true;
    for (unsigned char c : line)
      if (!is_space(c)) { blank = false; break; }
    if (blank) continue;
    out.push_back(sample_from_json(line, mode, line_no));
  }
  return out;
}

void save_corpus(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write corpus: " + path);
  for (const auto& s : samples) out << sample_to_json(s) << '\n';
}

// ------------------------------------------------------------------- vocab

Vocab::Vocab() {
  push("[PAD]");
  push("[BOS]");
  push("[EOS]");
  push("[UNK]");
}

void Vocab::push(const std::string& t) {
  if (index_.count(t)) return;
  index_[t] = static_cast<int>(tokens_.size());
  tokens_.push_back(t);
}

Vocab Vocab::build(const std::vector<Sample>& samples) {
  Vocab v;
  std::set<int> speakers;
  std::set<std::string> words;
  for (const auto& s : samples) {
    for (int ui = 0; ui < s.dialogue.num_utterances(); ++ui) {
      const Utterance& u = s.dialogue.utterance(ui);
      speakers.insert(u.speaker);
      for (const auto& t : u.tokens) words.insert(t.text);
    }
    for (const auto& t : s.rewritten.tokens) words.insert(t.text);
  }
  for (int sp : speakers) v.push(speaker_marker(sp));
  for (const auto& w : words) v.push(w);
  return v;
}

int Vocab::id(std::string_view text) const {
  auto it = index_.find(text);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view text) const { return index_.count(text) > 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocab id out of range");
  return tokens_[id];
}

std::vector<int> Vocab::encode(const std::vector<Token>& toks) const {
  std::vector<int> ids(toks.size());
  for (size_t i = 0; i < toks.size(); ++i) ids[i] = id(toks[i].text);
  return ids;
}

std::string Vocab::to_json() const {
  json j = json::array();
  for (const auto& t : tokens_) j.push_back(t);
  return j.dump();
}

Vocab Vocab::from_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_array() || j.size() < 4) throw InputError("vocab payload is not a token array");
  Vocab v;
  for (size_t i = 4; i < j.size(); ++i) v.push(j[i].get<std::string>());
  const char* reserved[] = {"[PAD]", "[BOS]", "[EOS]", "[UNK]"};
  for (int i = 0; i < 4; ++i)
    if (j[i].get<std::string>() != reserved[i])
      throw InputError("vocab payload has unexpected reserved entries");
  return v;
}

}  // namespace iur

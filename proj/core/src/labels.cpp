#include "iur/labels.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace iur {

namespace {

// Suffix LCS table: lcs[i][j] = LCS length of u[i:] vs v[j:].
std::vector<std::vector<int>> suffix_lcs(const std::vector<Token>& u,
                                         const std::vector<Token>& v) {
  const int n = static_cast<int>(u.size()), m = static_cast<int>(v.size());
  std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
  for (int i = n - 1; i >= 0; --i)
    for (int j = m - 1; j >= 0; --j)
      lcs[i][j] = u[i].text == v[j].text
                      ? lcs[i + 1][j + 1] + 1
                      : std::max(lcs[i + 1][j], lcs[i][j + 1]);
  return lcs;
}

struct Walk {
  std::vector<std::pair<int, int>> matches;
  EditScript script;
};

// Forward walk over the LCS table. Matches are taken as early in the
// incomplete utterance as optimality allows; between matches, insertions are
// emitted before deletions so the walk is fully deterministic.
Walk lcs_walk(const std::vector<Token>& u, const std::vector<Token>& v) {
  const auto lcs = suffix_lcs(u, v);
  const int n = static_cast<int>(u.size()), m = static_cast<int>(v.size());
  Walk w;
  int i = 0, j = 0;
  int del_begin = 0;                     // start of the pending deleted span
  std::vector<std::string> pending_ins;  // insertions since the last match
  auto flush = [&](int del_end) {
    if (del_end > del_begin || !pending_ins.empty()) {
      EditOp op;
      if (del_end > del_begin) {
        op.kind = EditOp::Kind::Replace;
        op.src_begin = del_begin;
        op.src_end = del_end;
      } else {
        op.kind = EditOp::Kind::Insert;
        op.src_begin = op.src_end = del_begin;
      }
      op.new_tokens = std::move(pending_ins);
      pending_ins.clear();
      w.script.ops.push_back(std::move(op));
    }
  };
  while (i < n || j < m) {
    if (i < n && j < m && u[i].text == v[j].text && lcs[i][j] == lcs[i + 1][j + 1] + 1) {
      flush(i);
      w.matches.emplace_back(i, j);
      ++i, ++j;
      del_begin = i;
    } else if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j])) {
      pending_ins.push_back(v[j].text);
      ++j;
    } else {
      ++i;  // delete u[i], span extends to the next flush
    }
  }
  flush(i);
  return w;
}

}  // namespace

EditScript align(const std::vector<Token>& incomplete, const std::vector<Token>& rewritten) {
  return lcs_walk(incomplete, rewritten).script;
}

std::vector<std::pair<int, int>> lcs_match_positions(const std::vector<Token>& incomplete,
                                                     const std::vector<Token>& rewritten) {
  return lcs_walk(incomplete, rewritten).matches;
}

std::vector<std::string> apply_script(const std::vector<Token>& incomplete,
                                      const EditScript& script) {
  const int n = static_cast<int>(incomplete.size());
  int pos = 0;
  std::vector<std::string> out;
  for (const auto& op : script.ops) {
    if (op.src_begin < pos || op.src_begin > n)
      throw InputError("edit script ops overlap or run past the utterance");
    for (; pos < op.src_begin; ++pos) out.push_back(incomplete[pos].text);
    if (op.kind == EditOp::Kind::Replace) {
      if (op.src_end <= op.src_begin || op.src_end > n)
        throw InputError("edit script Replace span is empty or out of range");
      pos = op.src_end;
    } else if (op.new_tokens.empty()) {
      throw InputError("edit script Insert carries no tokens");
    }
    for (const auto& t : op.new_tokens) out.push_back(t);
  }
  for (; pos < n; ++pos) out.push_back(incomplete[pos].text);
  return out;
}

namespace {

struct Grounder {
  const Dialogue& d;
  const LinearizedDialogue& lin;
  std::vector<EditLabel>& labels;
  LabelDiagnostics* diag;

  // Longest contiguous run of `span` present verbatim in utterance `ui`.
  // Ties prefer the leftmost start in the span, then in the utterance.
  struct Hit { int span_at = 0, utt_at = 0, len = 0; };
  Hit longest_in(const std::vector<std::string>& span, int ui) const {
    const auto& toks = d.utterance(ui).tokens;
    Hit best;
    for (size_t a = 0; a < span.size(); ++a) {
      for (size_t b = 0; b < toks.size(); ++b) {
        int len = 0;
        while (a + len < span.size() && b + len < toks.size() &&
               span[a + len] == toks[b + len].text)
          ++len;
        if (len > best.len) best = {static_cast<int>(a), static_cast<int>(b), len};
      }
    }
    return best;
  }

  void ground(const std::vector<std::string>& span, EditLabel label) {
    if (span.empty()) return;
    const int hist = static_cast<int>(d.history.size());
    for (int ui = hist - 1; ui >= 0; --ui) {
      Hit hit = longest_in(span, ui);
      if (hit.len == 0) continue;
      for (int k = 0; k < hit.len; ++k) {
        int pos = lin.position_of(ui, hit.utt_at + k);
        if (labels[pos] == EditLabel::NA) labels[pos] = label;  // first writer wins
      }
      ground({span.begin(), span.begin() + hit.span_at}, label);
      ground({span.begin() + hit.span_at + hit.len, span.end()}, label);
      return;
    }
    if (diag) {
      diag->extractive = false;
      diag->unmatched_spans.push_back(span);
    }
  }
};

}  // namespace

LabeledStream derive_labels(const Dialogue& d, const LinearizedDialogue& lin,
                            const std::vector<Token>& rewritten, LabelDiagnostics* diag) {
  LabeledStream out;
  out.labels.assign(lin.size(), EditLabel::NA);
  const int inc = static_cast<int>(d.history.size());

  EditScript script = align(d.incomplete.tokens, rewritten);
  Grounder g{d, lin, out.labels, diag};
  for (const auto& op : script.ops) {
    if (op.kind == EditOp::Kind::Replace) {
      for (int t = op.src_begin; t < op.src_end; ++t)
        out.labels[lin.position_of(inc, t)] = EditLabel::RP;
      g.ground(op.new_tokens, EditLabel::NW);
    } else {
      g.ground(op.new_tokens, EditLabel::IN);
    }
  }
  return out;
}

void derive_labels(Sample& s, LabelDiagnostics* diag) {
  LinearizedDialogue lin = linearize(s.dialogue);
  s.labels = derive_labels(s.dialogue, lin, s.rewritten.tokens, diag).labels;
}

std::vector<ConsistencyViolation> check_consistency(const Sample& s) {
  std::vector<ConsistencyViolation> out;
  if (!s.labels) {
    out.push_back({-1, "sample carries no labels"});
    return out;
  }
  Dialogue d = s.dialogue;  // local copy so linearize can assign indices
  LinearizedDialogue lin = linearize(d);
  const auto& labels = *s.labels;
  if (static_cast<int>(labels.size()) != lin.size()) {
    out.push_back({-1, "label count " + std::to_string(labels.size()) +
                           " != stream length " + std::to_string(lin.size())});
    return out;
  }
  const int inc = static_cast<int>(d.history.size());

  for (int p = 0; p < lin.size(); ++p) {
    const auto& prov = lin.provenance[p];
    if (prov.is_speaker_marker && labels[p] != EditLabel::NA)
      out.push_back({p, "speaker marker labeled " + std::string(to_string(labels[p]))});
    if (labels[p] == EditLabel::RP && prov.utterance != inc)
      out.push_back({p, "RP outside the incomplete utterance"});
    if ((labels[p] == EditLabel::NW || labels[p] == EditLabel::IN) && prov.utterance == inc)
      out.push_back({p, std::string(to_string(labels[p])) + " inside the incomplete utterance"});
  }

  // The incomplete utterance's labels are fully determined by alignment:
  // RP exactly on Replace source spans, NA elsewhere.
  EditScript script = align(d.incomplete.tokens, s.rewritten.tokens);
  std::vector<bool> replaced(d.incomplete.tokens.size(), false);
  for (const auto& op : script.ops)
    if (op.kind == EditOp::Kind::Replace)
      for (int t = op.src_begin; t < op.src_end; ++t) replaced[t] = true;
  for (size_t t = 0; t < d.incomplete.tokens.size(); ++t) {
    int p = lin.position_of(inc, static_cast<int>(t));
    if (labels[p] == EditLabel::NW || labels[p] == EditLabel::IN) continue;  // flagged above
    EditLabel expect = replaced[t] ? EditLabel::RP : EditLabel::NA;
    if (labels[p] != expect)
      out.push_back({p, std::string("incomplete token '") + d.incomplete.tokens[t].text +
                            "' should be " + to_string(expect) + ", found " +
                            to_string(labels[p])});
  }

  // NW/IN texts must fit inside the rewritten tokens that are not matched to
  // NA incomplete tokens.
  std::multiset<std::string> allowed;
  for (const auto& t : s.rewritten.tokens) allowed.insert(t.text);
  for (auto [ui, vj] : lcs_match_positions(d.incomplete.tokens, s.rewritten.tokens)) {
    int p = lin.position_of(inc, ui);
    if (labels[p] == EditLabel::NA) {
      auto it = allowed.find(s.rewritten.tokens[vj].text);
      if (it != allowed.end()) allowed.erase(it);
    }
  }
  for (int p = 0; p < lin.size(); ++p) {
    if (labels[p] != EditLabel::NW && labels[p] != EditLabel::IN) continue;
    const std::string& text = lin.tokens[p];
    auto it = allowed.find(text);
    if (it == allowed.end())
      out.push_back({p, std::string(to_string(labels[p])) + " token '" + text +
                            "' does not correspond to any restored rewritten token"});
    else
      allowed.erase(it);
  }
  return out;
}

namespace {

// Rebuilds an utterance from an edited token list; the surface form becomes
// the space-joined tokens, which re-tokenizes to the same list in word mode.
Utterance rebuild(const Utterance& base, std::vector<std::string> texts) {
  Utterance u;
  u.speaker = base.speaker;
  std::string joined;
  for (size_t i = 0; i < texts.size(); ++i) {
    if (i) joined += ' ';
    joined += texts[i];
  }
  u.text = std::move(joined);
  u.tokens.resize(texts.size());
  for (size_t i = 0; i < texts.size(); ++i) {
    u.tokens[i].text = std::move(texts[i]);
    u.tokens[i].index = static_cast<int>(i);
  }
  return u;
}

std::vector<std::string> token_texts(const std::vector<Token>& toks) {
  std::vector<std::string> out(toks.size());
  for (size_t i = 0; i < toks.size(); ++i) out[i] = toks[i].text;
  return out;
}

bool in_lexicon(const std::string& text, const std::vector<std::string>& pronouns) {
  std::string lo = text;
  std::transform(lo.begin(), lo.end(), lo.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (const auto& p : pronouns)
    if (p == lo) return true;
  return false;
}

}  // namespace

std::optional<Sample> augment_coref_to_ellipsis(const Sample& s,
                                                const std::vector<std::string>& pronouns) {
  const auto& inc = s.dialogue.incomplete.tokens;
  EditScript script = align(inc, s.rewritten.tokens);
  int victim = -1;
  for (const auto& op : script.ops) {
    if (op.kind != EditOp::Kind::Replace) continue;
    if (op.src_end - op.src_begin != 1) continue;
    const Token& t = inc[op.src_begin];
    bool pronoun = t.pos ? *t.pos == Pos::Pron : in_lexicon(t.text, pronouns);
    if (pronoun) { victim = op.src_begin; break; }
  }
  if (victim < 0) return std::nullopt;

  std::vector<std::string> texts = token_texts(inc);
  texts.erase(texts.begin() + victim);
  Sample out = s;
  out.dialogue.incomplete = rebuild(s.dialogue.incomplete, std::move(texts));
  out.origin = Origin::EditAugmented;
  out.labels.reset();
  derive_labels(out);
  return out;
}

std::optional<Sample> augment_ellipsis_to_coref(const Sample& s,
                                                const std::vector<std::string>& pronouns) {
  if (pronouns.empty()) throw InputError("pronoun lexicon is empty");
  const auto& inc = s.dialogue.incomplete.tokens;
  EditScript script = align(inc, s.rewritten.tokens);
  int anchor = -1;
  for (const auto& op : script.ops)
    if (op.kind == EditOp::Kind::Insert) { anchor = op.src_begin; break; }
  if (anchor < 0) return std::nullopt;

  std::vector<std::string> texts = token_texts(inc);
  texts.insert(texts.begin() + anchor, pronouns.front());
  Sample out = s;
  out.dialogue.incomplete = rebuild(s.dialogue.incomplete, std::move(texts));
  out.origin = Origin::EditAugmented;
  out.labels.reset();
  derive_labels(out);
  return out;
}

}  // namespace iur

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iur/corpus.hpp"
#include "iur/edit_label.hpp"

namespace iur {

// One edit over the incomplete utterance. Replace rewrites the token span
// [src_begin, src_end) as new_tokens; an empty new_tokens encodes a pure
// deletion. Insert places new_tokens into the gap before token `anchor`
// (anchor == |incomplete| appends at the end) and never deletes anything.
struct EditOp {
  enum class Kind { Replace, Insert };
  Kind kind = Kind::Replace;
  int src_begin = 0;  // Replace: span start.  Insert: anchor gap.
  int src_end = 0;    // Replace only; src_end > src_begin
  std::vector<std::string> new_tokens;
};

// Ops are ordered left to right by position and never overlap.
struct EditScript {
  std::vector<EditOp> ops;
};

// LCS alignment of incomplete -> rewritten. Ties prefer matches that occur
// earliest in the incomplete utterance, so the script is deterministic.
EditScript align(const std::vector<Token>& incomplete, const std::vector<Token>& rewritten);

// The LCS-matched (incomplete, rewritten) index pairs behind align(), in
// left-to-right order. Shared with the restoration metric.
std::vector<std::pair<int, int>> lcs_match_positions(const std::vector<Token>& incomplete,
                                                     const std::vector<Token>& rewritten);

// Inverse direction: replays a script over the incomplete utterance.
// apply_script(u, align(u, v)) == v for all token sequences u, v.
std::vector<std::string> apply_script(const std::vector<Token>& incomplete,
                                      const EditScript& script);

struct LabeledStream {
  std::vector<EditLabel> labels;  // one per linearized position, markers NA
};

struct LabelDiagnostics {
  bool extractive = true;  // false when some new span has no history match
  std::vector<std::vector<std::string>> unmatched_spans;
};

// Derives per-position labels for the linearized dialogue: RP on replaced
// incomplete tokens, NW/IN on the history tokens that supply replacement or
// inserted material. Grounding searches the most recent history utterance
// first, prefers the longest contiguous match there, then the leftmost one,
// recurses on the unmatched remainder, and never labels a position twice.
LabeledStream derive_labels(const Dialogue& d, const LinearizedDialogue& lin,
                            const std::vector<Token>& rewritten,
                            LabelDiagnostics* diag = nullptr);

// Convenience: linearizes (assigning global indices) and stores the labels
// on the sample.
void derive_labels(Sample& s, LabelDiagnostics* diag = nullptr);

struct ConsistencyViolation {
  int position = -1;  // linearized stream position, -1 for stream-level issues
  std::string message;
};

// Structural audit of a labeled sample:
//   - label sequence length equals the stream length
//   - speaker markers are NA
//   - RP only inside the incomplete utterance, NW/IN only inside history
//   - labels on the incomplete utterance agree exactly with align()
//   - NW+IN texts form a sub-multiset of the rewritten tokens that are not
//     LCS-matched to NA incomplete tokens
std::vector<ConsistencyViolation> check_consistency(const Sample& s);

// Deletes the leftmost single-token pronoun that a Replace rewrites, turning
// a coreference sample into an ellipsis sample. Returns nullopt when no edit
// applies. The rewritten utterance is never touched.
std::optional<Sample> augment_coref_to_ellipsis(
    const Sample& s, const std::vector<std::string>& pronouns = default_pronoun_lexicon());

// Inserts a lexicon pronoun at the leftmost Insert anchor, turning an
// ellipsis sample into a coreference sample. Returns nullopt when the script
// has no Insert. The rewritten utterance is never touched.
std::optional<Sample> augment_ellipsis_to_coref(
    const Sample& s, const std::vector<std::string>& pronouns = default_pronoun_lexicon());

}  // namespace iur

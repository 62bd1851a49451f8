#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "iur/corpus.hpp"

namespace iur {

// Edge relations over the linearized dialogue stream. All relations are
// symmetrized; SelfLoop exists so every node receives its own state during
// message passing.
enum class Relation : int {
  IntraUtterance = 0,   // dependency child <-> head inside one utterance
  InterUtterance = 1,   // roots of adjacent utterances
  SpeakerUtterance = 2, // speaker marker <-> its utterance root
  PseudoCoreference = 3,// pronoun in the incomplete utterance <-> PRON/NOUN elsewhere
  SelfLoop = 4,
};

inline constexpr int kNumRelations = 5;
inline constexpr std::array<Relation, kNumRelations> kAllRelations = {
    Relation::IntraUtterance, Relation::InterUtterance, Relation::SpeakerUtterance,
    Relation::PseudoCoreference, Relation::SelfLoop};

const char* to_string(Relation r);

struct DialogueGraph {
  int num_nodes = 0;
  // edges[r] holds symmetric pairs: for every (a,b) with a != b, (b,a) is
  // present too; SelfLoop holds exactly (i,i) for all i.
  std::array<std::vector<std::pair<int, int>>, kNumRelations> edges;

  const std::vector<std::pair<int, int>>& of(Relation r) const {
    return edges[static_cast<int>(r)];
  }
};

// Builds the relational graph for one dialogue. Every dialogue utterance
// must carry a parse (heads); POS tags feed PseudoCoreference and default to
// OTHER when absent. Positions refer to the linearized stream.
DialogueGraph build_graph(const Dialogue& d, const LinearizedDialogue& lin);

// Checks symmetry, self-loop coverage, and index ranges. Returns problems as
// strings; empty means valid.
std::vector<std::string> validate_graph(const DialogueGraph& g);

// JSON adjacency dump: {"intra_utterance": [[src,dst],...], ...}
std::string graph_to_json(const DialogueGraph& g);

}  // namespace iur

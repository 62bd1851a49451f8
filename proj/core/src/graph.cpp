#include "iur/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace iur {

const char* to_string(Relation r) {
  switch (r) {
    case Relation::IntraUtterance: return "intra_utterance";
    case Relation::InterUtterance: return "inter_utterance";
    case Relation::SpeakerUtterance: return "speaker_utterance";
    case Relation::PseudoCoreference: return "pseudo_coreference";
    case Relation::SelfLoop: return "self_loop";
  }
  return "self_loop";
}

namespace {

void add_symmetric(DialogueGraph& g, Relation r, int a, int b) {
  auto& e = g.edges[static_cast<int>(r)];
  e.emplace_back(a, b);
  if (a != b) e.emplace_back(b, a);
}

int root_of(const Utterance& u) {
  for (size_t i = 0; i < u.parse->heads.size(); ++i)
    if (u.parse->heads[i] == -1) return static_cast<int>(i);
  return -1;  // empty utterance
}

}  // namespace

DialogueGraph build_graph(const Dialogue& d, const LinearizedDialogue& lin) {
  const int n = d.num_utterances();
  for (int ui = 0; ui < n; ++ui)
    if (!d.utterance(ui).parse)
      throw InputError("utterance " + std::to_string(ui) +
                       " has no parse; attach one or run the heuristic parser");

  DialogueGraph g;
  g.num_nodes = lin.size();

  // dependency child <-> head, inside each utterance
  for (int ui = 0; ui < n; ++ui) {
    const Utterance& u = d.utterance(ui);
    const auto& heads = u.parse->heads;
    if (heads.size() != u.tokens.size())
      throw InputError("utterance " + std::to_string(ui) +
                       ": parse size does not match token count");
    for (size_t t = 0; t < heads.size(); ++t) {
      if (heads[t] < 0) continue;
      add_symmetric(g, Relation::IntraUtterance, lin.position_of(ui, static_cast<int>(t)),
                    lin.position_of(ui, heads[t]));
    }
  }

  // roots of adjacent utterances
  int prev_root = -1;
  for (int ui = 0; ui < n; ++ui) {
    int r = root_of(d.utterance(ui));
    int pos = r < 0 ? -1 : lin.position_of(ui, r);
    if (prev_root >= 0 && pos >= 0)
      add_symmetric(g, Relation::InterUtterance, prev_root, pos);
    if (pos >= 0) prev_root = pos;
  }

  // marker <-> root of its own utterance
  for (int ui = 0; ui < n; ++ui) {
    int r = root_of(d.utterance(ui));
    if (r >= 0)
      add_symmetric(g, Relation::SpeakerUtterance, lin.marker_position[ui],
                    lin.position_of(ui, r));
  }

  // pronouns of the incomplete utterance <-> PRON/NOUN tokens elsewhere
  const int inc = n - 1;
  for (const Token& p : d.incomplete.tokens) {
    if (!p.pos || *p.pos != Pos::Pron) continue;
    int ppos = lin.position_of(inc, p.index);
    for (int ui = 0; ui < n - 1; ++ui) {
      for (const Token& q : d.utterance(ui).tokens) {
        if (!q.pos || (*q.pos != Pos::Pron && *q.pos != Pos::Noun)) continue;
        add_symmetric(g, Relation::PseudoCoreference, ppos, lin.position_of(ui, q.index));
      }
    }
  }

  for (int i = 0; i < g.num_nodes; ++i) add_symmetric(g, Relation::SelfLoop, i, i);

  for (auto& edges : g.edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  }
  return g;
}

std::vector<std::string> validate_graph(const DialogueGraph& g) {
  std::vector<std::string> problems;
  for (Relation r : kAllRelations) {
    std::set<std::pair<int, int>> seen(g.of(r).begin(), g.of(r).end());
    if (seen.size() != g.of(r).size())
      problems.push_back(std::string(to_string(r)) + ": duplicate edges");
    for (auto [a, b] : g.of(r)) {
      if (a < 0 || a >= g.num_nodes || b < 0 || b >= g.num_nodes) {
        problems.push_back(std::string(to_string(r)) + ": edge (" + std::to_string(a) +
                           "," + std::to_string(b) + ") out of range");
        continue;
      }
      if (!seen.count({b, a}))
        problems.push_back(std::string(to_string(r)) + ": edge (" + std::to_string(a) +
                           "," + std::to_string(b) + ") has no mirror");
    }
    if (r == Relation::SelfLoop) {
      if (static_cast<int>(seen.size()) != g.num_nodes)
        problems.push_back("self_loop: expected exactly one loop per node");
      for (auto [a, b] : seen)
        if (a != b)
          problems.push_back("self_loop: non-diagonal edge (" + std::to_string(a) + "," +
                             std::to_string(b) + ")");
    }
  }
  return problems;
}

std::string graph_to_json(const DialogueGraph& g) {
  std::ostringstream os;
  os << '{';
  bool first_rel = true;
  for (Relation r : kAllRelations) {
    if (!first_rel) os << ',';
    first_rel = false;
    os << '"' << to_string(r) << "\":[";
    // sorted copy: the dump is for humans and diff tools
    auto edges = g.of(r);
    std::sort(edges.begin(), edges.end());
    bool first = true;
    for (auto [a, b] : edges) {
      if (!first) os << ',';
      first = false;
      os << '[' << a << ',' << b << ']';
    }
    os << ']';
  }
  os << '}';
  return os.str();
}

}  // namespace iur

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "iur/corpus.hpp"
#include "iur/graph.hpp"
#include "util.hpp"

using namespace iur;

using Edge = std::pair<int, int>;

static std::set<Edge> edge_set(const DialogueGraph& g, Relation r) {
  return {g.of(r).begin(), g.of(r).end()};
}

// Independent rule sweep used to cross-check build_graph's edge counts.
static std::array<std::set<Edge>, kNumRelations> sweep_edges(const Dialogue& d,
                                                             const LinearizedDialogue& lin) {
  std::array<std::set<Edge>, kNumRelations> out;
  auto put = [&](Relation r, int a, int b) {
    out[(int)r].insert({a, b});
    out[(int)r].insert({b, a});
  };
  const int n = d.num_utterances();
  std::vector<int> roots(n, -1);
  for (int ui = 0; ui < n; ++ui) {
    const auto& u = d.utterance(ui);
    for (size_t t = 0; t < u.parse->heads.size(); ++t) {
      int h = u.parse->heads[t];
      if (h == -1)
        roots[ui] = lin.position_of(ui, (int)t);
      else
        put(Relation::IntraUtterance, lin.position_of(ui, (int)t), lin.position_of(ui, h));
    }
  }
  for (int ui = 0; ui + 1 < n; ++ui)
    if (roots[ui] >= 0 && roots[ui + 1] >= 0)
      put(Relation::InterUtterance, roots[ui], roots[ui + 1]);
  for (int ui = 0; ui < n; ++ui)
    if (roots[ui] >= 0) put(Relation::SpeakerUtterance, lin.marker_position[ui], roots[ui]);
  for (const auto& p : d.incomplete.tokens) {
    if (!p.pos || *p.pos != Pos::Pron) continue;
    for (int ui = 0; ui < n - 1; ++ui)
      for (const auto& q : d.utterance(ui).tokens)
        if (q.pos && (*q.pos == Pos::Pron || *q.pos == Pos::Noun))
          put(Relation::PseudoCoreference, lin.position_of(n - 1, p.index),
              lin.position_of(ui, q.index));
  }
  for (int i = 0; i < lin.size(); ++i) out[(int)Relation::SelfLoop].insert({i, i});
  return out;
}

TEST_CASE("reference dialogue graph enumerates every relation correctly") {
  auto samples = load_corpus(testutil::data_path("tolstoy.jsonl"));
  attach_parses(samples, testutil::data_path("tolstoy.conllu"));
  Sample& s = samples[0];
  auto lin = linearize(s.dialogue);
  DialogueGraph g = build_graph(s.dialogue, lin);

  CHECK(g.num_nodes == 18);
  CHECK(validate_graph(g).empty());

  // stream: 0=[S1] 1=Do 2=you 3=know 4=Anna 5=Karenina 6=? 7=[S2] 8=Who
  //         9=is 10=Tolstoy 11=? 12=[S1] 13=He 14=is 15=the 16=author 17=.
  CHECK(edge_set(g, Relation::InterUtterance) ==
        std::set<Edge>{{3, 9}, {9, 3}, {9, 14}, {14, 9}});

  CHECK(edge_set(g, Relation::SpeakerUtterance) ==
        std::set<Edge>{{0, 3}, {3, 0}, {7, 9}, {9, 7}, {12, 14}, {14, 12}});

  // He (13) links to PRON/NOUN tokens of the two history turns:
  // you(2), Anna(4), Karenina(5), Who(8), Tolstoy(10)
  CHECK(edge_set(g, Relation::PseudoCoreference) ==
        std::set<Edge>{{13, 2}, {2, 13}, {13, 4}, {4, 13}, {13, 5}, {5, 13},
                       {13, 8}, {8, 13}, {13, 10}, {10, 13}});

  // one child-head pair per non-root token, symmetrized
  std::set<Edge> intra = {{1, 3}, {2, 3}, {4, 5}, {5, 3}, {6, 3},   // turn 1
                          {8, 9}, {10, 9}, {11, 9},                 // turn 2
                          {13, 14}, {15, 16}, {16, 14}, {17, 14}};  // incomplete
  std::set<Edge> intra_sym;
  for (auto [a, b] : intra) {
    intra_sym.insert({a, b});
    intra_sym.insert({b, a});
  }
  CHECK(edge_set(g, Relation::IntraUtterance) == intra_sym);

  std::set<Edge> loops;
  for (int i = 0; i < 18; ++i) loops.insert({i, i});
  CHECK(edge_set(g, Relation::SelfLoop) == loops);
}

TEST_CASE("single utterance dialogue has no inter-utterance edges") {
  Dialogue d;
  d.incomplete.speaker = 0;
  d.incomplete.text = "Alice met Bob .";
  tokenize_utterance(d.incomplete);
  assign_pos(d.incomplete);
  heuristic_parse(d.incomplete);
  auto lin = linearize(d);
  DialogueGraph g = build_graph(d, lin);

  CHECK(g.of(Relation::InterUtterance).empty());
  CHECK(g.of(Relation::PseudoCoreference).empty());  // no other utterances to link
  CHECK(g.of(Relation::SpeakerUtterance).size() == 2);
  CHECK(validate_graph(g).empty());
}

TEST_CASE("incomplete utterance without pronouns yields no pseudo-coreference") {
  testutil::TempDir tmp;
  std::string p = tmp.write("s.jsonl",
      R"({"history":[{"speaker":0,"text":"Alice met Bob ."}],)"
      R"("incomplete":{"speaker":1,"text":"Carol left ."},"rewritten":"Carol left ."})"
      "\n");
  Sample s = load_corpus(p)[0];
  ensure_parses(s);
  auto lin = linearize(s.dialogue);
  DialogueGraph g = build_graph(s.dialogue, lin);
  CHECK(g.of(Relation::PseudoCoreference).empty());
  CHECK(validate_graph(g).empty());
}

TEST_CASE("build_graph requires parses") {
  auto samples = load_corpus(testutil::data_path("tolstoy.jsonl"));
  auto lin = linearize(samples[0].dialogue);
  CHECK_THROWS_WITH_AS(build_graph(samples[0].dialogue, lin),
                       doctest::Contains("utterance 0"), InputError);
}

TEST_CASE("validate_graph flags each invariant break") {
  auto samples = load_corpus(testutil::data_path("tolstoy.jsonl"));
  attach_parses(samples, testutil::data_path("tolstoy.conllu"));
  auto lin = linearize(samples[0].dialogue);
  DialogueGraph g = build_graph(samples[0].dialogue, lin);
  REQUIRE(validate_graph(g).empty());

  SUBCASE("asymmetric edge") {
    g.edges[(int)Relation::InterUtterance].push_back({3, 14});
    auto problems = validate_graph(g);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("no mirror") != std::string::npos);
  }
  SUBCASE("out-of-range endpoint") {
    g.edges[(int)Relation::IntraUtterance].push_back({99, 3});
    CHECK(!validate_graph(g).empty());
  }
  SUBCASE("duplicate edge") {
    auto& e = g.edges[(int)Relation::SpeakerUtterance];
    e.push_back(e.front());
    CHECK(!validate_graph(g).empty());
  }
  SUBCASE("missing self loop") {
    g.edges[(int)Relation::SelfLoop].pop_back();
    CHECK(!validate_graph(g).empty());
  }
  SUBCASE("off-diagonal self loop") {
    auto& e = g.edges[(int)Relation::SelfLoop];
    e.pop_back();
    e.push_back({0, 1});
    e.push_back({1, 0});
    CHECK(!validate_graph(g).empty());
  }
}

TEST_CASE("graph construction matches an independent rule sweep") {
  SynthConfig cfg;
  cfg.num_samples = 100;
  cfg.seed = 31;
  auto samples = generate_synthetic(cfg);
  for (auto& s : samples) {
    ensure_parses(s);
    auto lin = linearize(s.dialogue);
    DialogueGraph g = build_graph(s.dialogue, lin);
    CHECK(validate_graph(g).empty());

    auto expect = sweep_edges(s.dialogue, lin);
    for (Relation r : kAllRelations) {
      CHECK(edge_set(g, r) == expect[(int)r]);
      CHECK(g.of(r).size() == expect[(int)r].size());
    }
  }
}

TEST_CASE("graph dump is valid JSON with per-relation adjacency") {
  auto samples = load_corpus(testutil::data_path("tolstoy.jsonl"));
  attach_parses(samples, testutil::data_path("tolstoy.conllu"));
  auto lin = linearize(samples[0].dialogue);
  DialogueGraph g = build_graph(samples[0].dialogue, lin);

  auto j = nlohmann::json::parse(graph_to_json(g));
  REQUIRE(j.is_object());
  for (Relation r : kAllRelations) {
    REQUIRE(j.contains(to_string(r)));
    const auto& arr = j[to_string(r)];
    REQUIRE(arr.is_array());
    CHECK(arr.size() == g.of(r).size());
    std::set<Edge> dumped;
    for (const auto& e : arr) dumped.insert({e[0].get<int>(), e[1].get<int>()});
    CHECK(dumped == edge_set(g, r));
  }
  CHECK(j["self_loop"].size() == 18);
}

TEST_CASE("graph build is deterministic") {
  auto samples = load_corpus(testutil::data_path("tolstoy.jsonl"));
  attach_parses(samples, testutil::data_path("tolstoy.conllu"));
  auto lin = linearize(samples[0].dialogue);
  CHECK(graph_to_json(build_graph(samples[0].dialogue, lin)) ==
        graph_to_json(build_graph(samples[0].dialogue, lin)));
}

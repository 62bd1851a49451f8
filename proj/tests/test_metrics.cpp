#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "iur/corpus.hpp"
#include "iur/metrics.hpp"
#include "oracles.hpp"

using namespace iur;

namespace {

TokenSeq toks(const std::string& text) {
  TokenSeq out;
  std::istringstream is(text);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

struct RandomCorpora {
  std::vector<TokenSeq> cands, refs, incs;
};

// Small vocabulary and short sequences so clipped counts, ties, and empty
// sequences all occur often.
RandomCorpora random_case(std::mt19937_64& gen) {
  static const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
  auto seq = [&](int max_len) {
    TokenSeq s;
    int len = (int)(gen() % (max_len + 1));
    for (int i = 0; i < len; ++i) s.push_back(vocab[gen() % vocab.size()]);
    return s;
  };
  RandomCorpora rc;
  int samples = 1 + (int)(gen() % 4);
  for (int i = 0; i < samples; ++i) {
    rc.cands.push_back(seq(8));
    rc.refs.push_back(seq(8));
    rc.incs.push_back(seq(6));
  }
  return rc;
}

}  // namespace

TEST_CASE("bleu agrees with the brute-force oracle on 500 random corpora") {
  std::mt19937_64 gen(1001);
  for (int t = 0; t < 500; ++t) {
    auto rc = random_case(gen);
    for (int n : {1, 2, 4}) {
      double got = bleu_n(rc.cands, rc.refs, n);
      double want = oracle::bleu(rc.cands, rc.refs, n);
      CHECK(std::abs(got - want) <= 1e-9);
    }
  }
}

TEST_CASE("rouge agrees with the brute-force oracle on 500 random corpora") {
  std::mt19937_64 gen(1002);
  for (int t = 0; t < 500; ++t) {
    auto rc = random_case(gen);
    for (int n : {1, 2}) {
      CHECK(std::abs(rouge_n(rc.cands, rc.refs, n) - oracle::rouge_n(rc.cands, rc.refs, n)) <=
            1e-9);
    }
    CHECK(std::abs(rouge_l(rc.cands, rc.refs) - oracle::rouge_l(rc.cands, rc.refs)) <= 1e-9);
  }
}

TEST_CASE("restoration agrees with the brute-force oracle on 500 random corpora") {
  std::mt19937_64 gen(1003);
  for (int t = 0; t < 500; ++t) {
    auto rc = random_case(gen);
    for (int n : {1, 2, 3}) {
      RestorationScore got = restoration_fn(rc.cands, rc.refs, rc.incs, n);
      oracle::Prf want = oracle::restoration(rc.cands, rc.refs, rc.incs, n);
      CHECK(std::abs(got.precision - want.p) <= 1e-9);
      CHECK(std::abs(got.recall - want.r) <= 1e-9);
      CHECK(std::abs(got.f1 - want.f) <= 1e-9);
    }
  }
}

TEST_CASE("restoration on the single-pronoun dialogue fixture") {
  // incomplete "He is the author ." resolved against
  // reference "Tolstoy is the author of Anna Karenina ."
  std::vector<TokenSeq> incs = {toks("He is the author .")};
  std::vector<TokenSeq> refs = {toks("Tolstoy is the author of Anna Karenina .")};

  SUBCASE("partial restoration scores F1 0.4") {
    std::vector<TokenSeq> cands = {toks("Tolstoy is the author .")};
    RestorationScore s = restoration_fn(cands, refs, incs, 1);
    CHECK(s.precision == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.recall == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s.f1 == doctest::Approx(0.4).epsilon(1e-12));

    // the lone restored token forms no bigram, so order 2 scores zero
    RestorationScore s2 = restoration_fn(cands, refs, incs, 2);
    CHECK(s2.precision == 0.0);
    CHECK(s2.recall == 0.0);
    CHECK(s2.f1 == 0.0);
  }
  SUBCASE("copying the incomplete utterance restores nothing") {
    std::vector<TokenSeq> cands = {toks("He is the author .")};
    RestorationScore s = restoration_fn(cands, refs, incs, 1);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
  }
  SUBCASE("reproducing the reference restores everything") {
    std::vector<TokenSeq> cands = refs;
    for (int n : {1, 2, 3}) {
      RestorationScore s = restoration_fn(cands, refs, incs, n);
      CHECK(s.precision == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(s.recall == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(s.f1 == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("restoration counts respect run boundaries") {
    // restored ref runs: [Tolstoy] and [of Anna Karenina]; the bigrams are
    // (of Anna) and (Anna Karenina), never (Tolstoy is) or (author of)
    std::vector<TokenSeq> cands = {toks("of Anna is the author Karenina .")};
    // cand vs inc: matched = is,the,author,.; runs [of Anna] + [Karenina]
    // bigrams in cand restoration: (of Anna) only
    RestorationScore s = restoration_fn(cands, refs, incs, 2);
    CHECK(s.precision == doctest::Approx(1.0).epsilon(1e-12));  // 1/1
    CHECK(s.recall == doctest::Approx(0.5).epsilon(1e-12));     // 1/2
  }
}

TEST_CASE("perfect candidates score one, disjoint candidates score zero") {
  std::vector<TokenSeq> refs = {toks("the cat sat on the mat"), toks("dogs bark loudly")};
  std::vector<TokenSeq> incs = {toks("sat on"), toks("bark")};

  SUBCASE("identical") {
    auto cands = refs;
    for (int n : {1, 2, 4}) CHECK(bleu_n(cands, refs, n) == doctest::Approx(1.0).epsilon(1e-12));
    for (int n : {1, 2}) CHECK(rouge_n(cands, refs, n) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rouge_l(cands, refs) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(exact_match(cands, refs) == 1.0);
    CHECK(redundant_rate(cands, refs) == 0.0);
  }
  SUBCASE("disjoint") {
    std::vector<TokenSeq> cands = {toks("x y z w"), toks("q r")};
    CHECK(bleu_n(cands, refs, 1) == 0.0);
    CHECK(bleu_n(cands, refs, 4) == 0.0);
    CHECK(rouge_n(cands, refs, 1) == 0.0);
    CHECK(rouge_l(cands, refs) == 0.0);
    CHECK(exact_match(cands, refs) == 0.0);
    CHECK(redundant_rate(cands, refs) == 1.0);
  }
  SUBCASE("empty candidates") {
    std::vector<TokenSeq> cands = {{}, {}};
    CHECK(bleu_n(cands, refs, 4) == 0.0);
    CHECK(rouge_n(cands, refs, 1) == 0.0);
    CHECK(rouge_l(cands, refs) == 0.0);
    RestorationScore s = restoration_fn(cands, refs, incs, 1);
    CHECK(s.precision == 0.0);
    CHECK(s.f1 == 0.0);
  }
}

TEST_CASE("brevity penalty punishes short candidates only") {
  std::vector<TokenSeq> refs = {toks("a b c d")};
  // candidate shorter than reference: bp = exp(1 - 4/2), precisions 1
  CHECK(bleu_n({toks("a b")}, refs, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  // candidate longer than reference: bp = 1, unigram precision 4/5
  CHECK(bleu_n({toks("a b c d d")}, refs, 1) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("add-one smoothing applies exactly at zero-match higher orders") {
  // unigrams overlap, bigrams do not: p1 = 2/4, p2 = 1/(3+1)
  std::vector<TokenSeq> cands = {toks("a c b d")};
  std::vector<TokenSeq> refs = {toks("a b x y")};
  double expect = std::sqrt(0.5 * 0.25);  // bp = 1 (equal lengths)
  CHECK(bleu_n(cands, refs, 2) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("exact match is a per-sample token comparison") {
  std::vector<TokenSeq> refs = {toks("a b"), toks("c"), toks("d e f")};
  std::vector<TokenSeq> cands = {toks("a b"), toks("x"), toks("d e f")};
  CHECK(exact_match(cands, refs) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(exact_match({}, {}) == 0.0);
}

TEST_CASE("redundant rate counts candidates with off-reference tokens") {
  std::vector<TokenSeq> refs(8, toks("a b c"));
  std::vector<TokenSeq> cands(8, toks("a b"));
  cands[2] = toks("a z");      // z absent from reference
  cands[5] = toks("q");        // q absent from reference
  cands[6] = toks("c c c a");  // repeats are fine: set membership only
  CHECK(redundant_rate(cands, refs) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("metrics stay within the unit interval") {
  std::mt19937_64 gen(1004);
  for (int t = 0; t < 100; ++t) {
    auto rc = random_case(gen);
    for (int n : {1, 2, 4}) {
      double b = bleu_n(rc.cands, rc.refs, n);
      CHECK(b >= 0.0);
      CHECK(b <= 1.0 + 1e-12);
    }
    for (int n : {1, 2}) {
      double r = rouge_n(rc.cands, rc.refs, n);
      CHECK(r >= 0.0);
      CHECK(r <= 1.0 + 1e-12);
    }
    RestorationScore s = restoration_fn(rc.cands, rc.refs, rc.incs, 1);
    for (double v : {s.precision, s.recall, s.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("metric input validation") {
  std::vector<TokenSeq> two = {toks("a"), toks("b")};
  std::vector<TokenSeq> one = {toks("a")};
  CHECK_THROWS_AS(bleu_n(two, one, 1), InputError);
  CHECK_THROWS_AS(rouge_n(two, one, 1), InputError);
  CHECK_THROWS_AS(bleu_n(one, one, 0), InputError);
  CHECK_THROWS_AS(restoration_fn(two, two, one, 1), InputError);
  CHECK_THROWS_AS(exact_match(two, one), InputError);
  CHECK_THROWS_AS(redundant_rate(two, one), InputError);
}

TEST_CASE("evaluate_all aggregates every metric and serializes") {
  std::vector<TokenSeq> incs = {toks("He is the author .")};
  std::vector<TokenSeq> refs = {toks("Tolstoy is the author of Anna Karenina .")};
  std::vector<TokenSeq> cands = {toks("Tolstoy is the author .")};

  MetricReport rep = evaluate_all(cands, refs, incs);
  CHECK(rep.num_samples == 1);
  CHECK(rep.bleu.count(1) == 1);
  CHECK(rep.bleu.count(2) == 1);
  CHECK(rep.bleu.count(4) == 1);
  CHECK(rep.rouge.count("1") == 1);
  CHECK(rep.rouge.count("2") == 1);
  CHECK(rep.rouge.count("L") == 1);
  CHECK(rep.restoration.at(1).f1 == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(rep.em == 0.0);
  CHECK(rep.redundant == 0.0);  // every candidate token appears in the reference
  CHECK(rep.bleu.at(1) == doctest::Approx(bleu_n(cands, refs, 1)).epsilon(1e-12));

  SUBCASE("json form parses and carries the same numbers") {
    auto j = nlohmann::json::parse(report_to_json(rep));
    CHECK(j.at("num_samples").get<int>() == 1);
    CHECK(j.at("exact_match").get<double>() == 0.0);
    CHECK(j.at("bleu").at("1").get<double>() ==
          doctest::Approx(rep.bleu.at(1)).epsilon(1e-12));
    CHECK(j.at("restoration").at("1").at("f1").get<double>() ==
          doctest::Approx(0.4).epsilon(1e-12));
    CHECK(j.at("rouge").contains("L"));
    CHECK(j.at("redundant_rate").get<double>() == 0.0);
  }
  SUBCASE("table form mentions every section") {
    std::string t = report_to_table(rep);
    CHECK(t.find("bleu-4") != std::string::npos);
    CHECK(t.find("rouge-L") != std::string::npos);
    CHECK(t.find("restore-1") != std::string::npos);
    CHECK(t.find("exact match") != std::string::npos);
    CHECK(t.find("redundant rate") != std::string::npos);
  }
}

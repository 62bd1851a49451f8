#pragma once

#include <map>
#include <string>
#include <vector>

namespace iur {

using TokenSeq = std::vector<std::string>;

// Corpus-level BLEU: modified n-gram precision with clipped counts, geometric
// mean over orders 1..n, brevity penalty exp(1 - r/c) when c <= r. Zero
// counts at orders >= 2 get add-one smoothing; zero unigram matches (or an
// empty candidate corpus) score 0.
double bleu_n(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs, int n);

// Per-sample n-gram overlap F1, averaged over samples (macro).
double rouge_n(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs, int n);

// Per-sample LCS F1, averaged over samples (macro).
double rouge_l(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs);

struct RestorationScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Scores only the restored content: tokens of a sequence that the LCS
// alignment against the incomplete utterance leaves unmatched, grouped into
// contiguous runs. Order-n counts collect n-grams inside single runs, never
// across a gap. Counts are micro-averaged over the corpus; an empty
// restoration yields precision 0 by convention.
RestorationScore restoration_fn(const std::vector<TokenSeq>& cands,
                                const std::vector<TokenSeq>& refs,
                                const std::vector<TokenSeq>& incompletes, int n);

// Fraction of candidates that equal their reference token-for-token.
double exact_match(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs);

// Fraction of candidates containing at least one token absent from their
// reference's tokens.
double redundant_rate(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs);

struct MetricReport {
  std::map<int, double> bleu;                     // orders 1, 2, 4
  std::map<std::string, double> rouge;            // "1", "2", "L"
  std::map<int, RestorationScore> restoration;    // orders 1, 2, 3
  double em = 0.0;
  double redundant = 0.0;
  int num_samples = 0;
};

MetricReport evaluate_all(const std::vector<TokenSeq>& cands,
                          const std::vector<TokenSeq>& refs,
                          const std::vector<TokenSeq>& incompletes);

std::string report_to_json(const MetricReport& r);
std::string report_to_table(const MetricReport& r);

}  // namespace iur

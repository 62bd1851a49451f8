#include "iur/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "iur/corpus.hpp"
#include "iur/labels.hpp"
#include "json.hpp"

namespace iur {

namespace {

using Ngram = std::vector<std::string>;
using NgramCounts = std::map<Ngram, long>;

NgramCounts count_ngrams(const TokenSeq& toks, int n) {
  NgramCounts counts;
  if ((int)toks.size() < n) return counts;
  for (size_t i = 0; i + n <= toks.size(); ++i) {
    counts[Ngram(toks.begin() + i, toks.begin() + i + n)]++;
  }
  return counts;
}

long overlap(const NgramCounts& a, const NgramCounts& b) {
  long total = 0;
  for (const auto& [gram, ca] : a) {
    auto it = b.find(gram);
    if (it != b.end()) total += std::min(ca, it->second);
  }
  return total;
}

long total_count(const NgramCounts& c) {
  long t = 0;
  for (const auto& [gram, n] : c) t += n;
  return t;
}

void require_paired(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs) {
  if (cands.size() != refs.size())
    throw InputError("metric inputs differ in length: " + std::to_string(cands.size()) +
                     " candidates vs " + std::to_string(refs.size()) + " references");
}

std::vector<Token> as_tokens(const TokenSeq& words) {
  std::vector<Token> out;
  out.reserve(words.size());
  for (size_t i = 0; i < words.size(); ++i) {
    Token t;
    t.text = words[i];
    t.index = (int)i;
    out.push_back(std::move(t));
  }
  return out;
}

// Contiguous runs of positions in `seq` that the LCS alignment against the
// incomplete utterance leaves unmatched.
std::vector<TokenSeq> restored_runs(const TokenSeq& seq, const TokenSeq& incomplete) {
  auto matches = lcs_match_positions(as_tokens(incomplete), as_tokens(seq));
  std::vector<bool> matched(seq.size(), false);
  for (auto [ui, vj] : matches) matched[vj] = true;

  std::vector<TokenSeq> runs;
  TokenSeq run;
  for (size_t j = 0; j < seq.size(); ++j) {
    if (matched[j]) {
      if (!run.empty()) runs.push_back(std::move(run));
      run.clear();
    } else {
      run.push_back(seq[j]);
    }
  }
  if (!run.empty()) runs.push_back(std::move(run));
  return runs;
}

NgramCounts run_ngrams(const std::vector<TokenSeq>& runs, int n) {
  NgramCounts counts;
  for (const auto& run : runs) {
    for (const auto& [gram, c] : count_ngrams(run, n)) counts[gram] += c;
  }
  return counts;
}

int lcs_length(const TokenSeq& a, const TokenSeq& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

double bleu_n(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs, int n) {
  require_paired(cands, refs);
  if (n < 1) throw InputError("bleu order must be >= 1");

  double log_sum = 0.0;
  for (int g = 1; g <= n; ++g) {
    long matched = 0, total = 0;
    for (size_t s = 0; s < cands.size(); ++s) {
      NgramCounts cc = count_ngrams(cands[s], g);
      matched += overlap(cc, count_ngrams(refs[s], g));
      total += total_count(cc);
    }
    double p;
    if (matched > 0) {
      p = (double)matched / (double)total;
    } else if (g >= 2) {
      p = 1.0 / (double)(total + 1);  // add-one smoothing, only for empty counts
    } else {
      return 0.0;  // no unigram match: geometric mean is zero
    }
    log_sum += std::log(p);
  }

  long c = 0, r = 0;
  for (size_t s = 0; s < cands.size(); ++s) {
    c += (long)cands[s].size();
    r += (long)refs[s].size();
  }
  if (c == 0) return 0.0;
  double bp = c > r ? 1.0 : std::exp(1.0 - (double)r / (double)c);
  return bp * std::exp(log_sum / n);
}

double rouge_n(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs, int n) {
  require_paired(cands, refs);
  if (n < 1) throw InputError("rouge order must be >= 1");
  if (cands.empty()) return 0.0;

  double sum = 0.0;
  for (size_t s = 0; s < cands.size(); ++s) {
    NgramCounts cc = count_ngrams(cands[s], n);
    NgramCounts rc = count_ngrams(refs[s], n);
    long m = overlap(cc, rc);
    long ct = total_count(cc), rt = total_count(rc);
    double p = ct > 0 ? (double)m / ct : 0.0;
    double r = rt > 0 ? (double)m / rt : 0.0;
    sum += f1(p, r);
  }
  return sum / cands.size();
}

double rouge_l(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs) {
  require_paired(cands, refs);
  if (cands.empty()) return 0.0;

  double sum = 0.0;
  for (size_t s = 0; s < cands.size(); ++s) {
    int l = lcs_length(cands[s], refs[s]);
    double p = cands[s].empty() ? 0.0 : (double)l / cands[s].size();
    double r = refs[s].empty() ? 0.0 : (double)l / refs[s].size();
    sum += f1(p, r);
  }
  return sum / cands.size();
}

RestorationScore restoration_fn(const std::vector<TokenSeq>& cands,
                                const std::vector<TokenSeq>& refs,
                                const std::vector<TokenSeq>& incompletes, int n) {
  require_paired(cands, refs);
  if (incompletes.size() != cands.size())
    throw InputError("restoration metric needs one incomplete utterance per candidate");
  if (n < 1) throw InputError("restoration order must be >= 1");

  long matched = 0, cand_total = 0, ref_total = 0;
  for (size_t s = 0; s < cands.size(); ++s) {
    NgramCounts cg = run_ngrams(restored_runs(cands[s], incompletes[s]), n);
    NgramCounts rg = run_ngrams(restored_runs(refs[s], incompletes[s]), n);
    matched += overlap(cg, rg);
    cand_total += total_count(cg);
    ref_total += total_count(rg);
  }

  RestorationScore out;
  out.precision = cand_total > 0 ? (double)matched / cand_total : 0.0;
  out.recall = ref_total > 0 ? (double)matched / ref_total : 0.0;
  out.f1 = f1(out.precision, out.recall);
  return out;
}

double exact_match(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs) {
  require_paired(cands, refs);
  if (cands.empty()) return 0.0;
  long hits = 0;
  for (size_t s = 0; s < cands.size(); ++s)
    if (cands[s] == refs[s]) ++hits;
  return (double)hits / cands.size();
}

double redundant_rate(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs) {
  require_paired(cands, refs);
  if (cands.empty()) return 0.0;
  long redundant = 0;
  for (size_t s = 0; s < cands.size(); ++s) {
    std::set<std::string> ref_toks(refs[s].begin(), refs[s].end());
    for (const auto& t : cands[s]) {
      if (!ref_toks.count(t)) {
        ++redundant;
        break;
      }
    }
  }
  return (double)redundant / cands.size();
}

MetricReport evaluate_all(const std::vector<TokenSeq>& cands,
                          const std::vector<TokenSeq>& refs,
                          const std::vector<TokenSeq>& incompletes) {
  MetricReport rep;
  rep.num_samples = (int)cands.size();
  for (int n : {1, 2, 4}) rep.bleu[n] = bleu_n(cands, refs, n);
  rep.rouge["1"] = rouge_n(cands, refs, 1);
  rep.rouge["2"] = rouge_n(cands, refs, 2);
  rep.rouge["L"] = rouge_l(cands, refs);
  for (int n : {1, 2, 3}) rep.restoration[n] = restoration_fn(cands, refs, incompletes, n);
  rep.em = exact_match(cands, refs);
  rep.redundant = redundant_rate(cands, refs);
  return rep;
}

std::string report_to_json(const MetricReport& r) {
  nlohmann::json j;
  for (const auto& [n, v] : r.bleu) j["bleu"][std::to_string(n)] = v;
  for (const auto& [k, v] : r.rouge) j["rouge"][k] = v;
  for (const auto& [n, s] : r.restoration) {
    auto& e = j["restoration"][std::to_string(n)];
    e["precision"] = s.precision;
    e["recall"] = s.recall;
    e["f1"] = s.f1;
  }
  j["exact_match"] = r.em;
  j["redundant_rate"] = r.redundant;
  j["num_samples"] = r.num_samples;
  return j.dump(2);
}

std::string report_to_table(const MetricReport& r) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  os << "samples          " << r.num_samples << "\n";
  for (const auto& [n, v] : r.bleu) os << "bleu-" << n << "           " << v << "\n";
  for (const auto& [k, v] : r.rouge) os << "rouge-" << k << "          " << v << "\n";
  for (const auto& [n, s] : r.restoration) {
    os << "restore-" << n << " P/R/F  " << s.precision << " " << s.recall << " " << s.f1 << "\n";
  }
  os << "exact match      " << r.em << "\n";
  os << "redundant rate   " << r.redundant << "\n";
  return os.str();
}

}  // namespace iur

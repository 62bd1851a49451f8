#include <benchmark/benchmark.h>

#include <random>

#include "iur/metrics.hpp"

using namespace iur;

namespace {

std::vector<TokenSeq> random_corpus(int samples, int len, std::uint64_t seed) {
  static const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g", "h",
                                                 "i", "j", "k", "l", "m", "n"};
  std::mt19937_64 gen(seed);
  std::vector<TokenSeq> out;
  for (int s = 0; s < samples; ++s) {
    TokenSeq seq;
    for (int i = 0; i < len; ++i) seq.push_back(words[gen() % words.size()]);
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace

static void BM_Bleu4(benchmark::State& state) {
  auto cands = random_corpus((int)state.range(0), 12, 1);
  auto refs = random_corpus((int)state.range(0), 12, 2);
  for (auto _ : state) benchmark::DoNotOptimize(bleu_n(cands, refs, 4));
}
BENCHMARK(BM_Bleu4)->Arg(100)->Arg(1000);

static void BM_RougeL(benchmark::State& state) {
  auto cands = random_corpus((int)state.range(0), 12, 3);
  auto refs = random_corpus((int)state.range(0), 12, 4);
  for (auto _ : state) benchmark::DoNotOptimize(rouge_l(cands, refs));
}
BENCHMARK(BM_RougeL)->Arg(100)->Arg(1000);

static void BM_Restoration(benchmark::State& state) {
  auto cands = random_corpus((int)state.range(0), 12, 5);
  auto refs = random_corpus((int)state.range(0), 12, 6);
  auto incs = random_corpus((int)state.range(0), 8, 7);
  for (auto _ : state) benchmark::DoNotOptimize(restoration_fn(cands, refs, incs, 2));
}
BENCHMARK(BM_Restoration)->Arg(100)->Arg(1000);

#include <benchmark/benchmark.h>

#include <random>

#include "iur/corpus.hpp"
#include "iur/labels.hpp"

using namespace iur;

namespace {

std::vector<Token> random_tokens(std::mt19937_64& gen, int len) {
  static const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g", "h"};
  std::vector<Token> out;
  for (int i = 0; i < len; ++i) {
    Token t;
    t.text = words[gen() % words.size()];
    t.index = i;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

static void BM_Align(benchmark::State& state) {
  std::mt19937_64 gen(4);
  const int len = (int)state.range(0);
  auto u = random_tokens(gen, len);
  auto v = random_tokens(gen, len + len / 4);
  for (auto _ : state) benchmark::DoNotOptimize(align(u, v));
}
BENCHMARK(BM_Align)->Arg(10)->Arg(40)->Arg(160);

static void BM_DeriveLabels(benchmark::State& state) {
  SynthConfig sc;
  sc.num_samples = 64;
  sc.seed = 21;
  auto samples = generate_synthetic(sc);
  size_t i = 0;
  for (auto _ : state) {
    Sample s = samples[i % samples.size()];
    derive_labels(s);
    benchmark::DoNotOptimize(s);
    ++i;
  }
}
BENCHMARK(BM_DeriveLabels);

static void BM_CheckConsistency(benchmark::State& state) {
  SynthConfig sc;
  sc.num_samples = 64;
  sc.seed = 22;
  auto samples = generate_synthetic(sc);
  for (auto& s : samples) derive_labels(s);
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(check_consistency(samples[i % samples.size()]));
    ++i;
  }
}
BENCHMARK(BM_CheckConsistency);

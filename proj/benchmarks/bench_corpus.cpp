#include <benchmark/benchmark.h>

#include "iur/corpus.hpp"

using namespace iur;

namespace {

std::vector<Sample> corpus(int n) {
  SynthConfig sc;
  sc.num_samples = n;
  sc.seed = 99;
  return generate_synthetic(sc);
}

}  // namespace

static void BM_TokenizeWord(benchmark::State& state) {
  const std::string text = "Do you know Anna Karenina ? He is the author of the novel .";
  for (auto _ : state) benchmark::DoNotOptimize(tokenize(text, TokenizeMode::Word));
}
BENCHMARK(BM_TokenizeWord);

static void BM_Linearize(benchmark::State& state) {
  auto samples = corpus(64);
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(linearize(samples[i % samples.size()].dialogue));
    ++i;
  }
}
BENCHMARK(BM_Linearize);

static void BM_VocabBuild(benchmark::State& state) {
  auto samples = corpus((int)state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Vocab::build(samples));
}
BENCHMARK(BM_VocabBuild)->Arg(100)->Arg(1000);

static void BM_Synth(benchmark::State& state) {
  SynthConfig sc;
  sc.num_samples = (int)state.range(0);
  sc.seed = 7;
  for (auto _ : state) benchmark::DoNotOptimize(generate_synthetic(sc));
}
BENCHMARK(BM_Synth)->Arg(100)->Arg(1000);

#include <benchmark/benchmark.h>

#include "iur/corpus.hpp"
#include "iur/graph.hpp"

using namespace iur;

static void BM_BuildGraph(benchmark::State& state) {
  SynthConfig sc;
  sc.num_samples = 64;
  sc.seed = 31;
  auto samples = generate_synthetic(sc);
  for (auto& s : samples) ensure_parses(s);
  size_t i = 0;
  for (auto _ : state) {
    Sample& s = samples[i % samples.size()];
    auto lin = linearize(s.dialogue);
    benchmark::DoNotOptimize(build_graph(s.dialogue, lin));
    ++i;
  }
}
BENCHMARK(BM_BuildGraph);

static void BM_ValidateGraph(benchmark::State& state) {
  SynthConfig sc;
  sc.num_samples = 16;
  sc.seed = 32;
  auto samples = generate_synthetic(sc);
  std::vector<DialogueGraph> graphs;
  for (auto& s : samples) {
    ensure_parses(s);
    auto lin = linearize(s.dialogue);
    graphs.push_back(build_graph(s.dialogue, lin));
  }
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(validate_graph(graphs[i % graphs.size()]));
    ++i;
  }
}
BENCHMARK(BM_ValidateGraph);

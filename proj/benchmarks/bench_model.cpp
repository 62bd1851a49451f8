#include <benchmark/benchmark.h>

#include "iur/corpus.hpp"
#include "iur/model.hpp"
#include "iur/train.hpp"

using namespace iur;

namespace {

struct Fixture {
  std::vector<Sample> samples;
  Vocab vocab;
  ModelConfig mc;
  Model model;
  std::vector<EncodedSample> encoded;

  static ModelConfig config(int vocab_size, int d_u) {
    ModelConfig mc;
    mc.d_u = d_u;
    mc.enc_layers = 2;
    mc.dec_layers = 2;
    mc.heads = 4;
    mc.rgcn_layers = 2;
    mc.vocab_size = vocab_size;
    mc.max_len = 48;
    return mc;
  }

  explicit Fixture(int d_u)
      : samples([] {
          SynthConfig sc;
          sc.num_samples = 32;
          sc.seed = 77;
          return generate_synthetic(sc);
        }()),
        vocab(Vocab::build(samples)),
        mc(config(vocab.size(), d_u)),
        model(mc, 1) {
    for (auto& s : samples) encoded.push_back(prepare_sample(s, vocab, mc));
  }
};

}  // namespace

static void BM_EncodeContextualize(benchmark::State& state) {
  Fixture f((int)state.range(0));
  size_t i = 0;
  for (auto _ : state) {
    const auto& es = f.encoded[i % f.encoded.size()];
    Value h = f.model.encode(es.input_ids);
    benchmark::DoNotOptimize(f.model.contextualize(h, es.graph));
    ++i;
  }
}
BENCHMARK(BM_EncodeContextualize)->Arg(32)->Arg(64);

static void BM_JointForward(benchmark::State& state) {
  Fixture f((int)state.range(0));
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.model.forward_joint(f.encoded[i % f.encoded.size()], 1.0, 1.0));
    ++i;
  }
}
BENCHMARK(BM_JointForward)->Arg(32)->Arg(64);

static void BM_TrainStep(benchmark::State& state) {
  Fixture f((int)state.range(0));
  TrainConfig tc;
  Optimizer opt(tc, f.model.params());
  f.model.set_training(true);
  size_t i = 0;
  for (auto _ : state) {
    f.model.params().zero_grad();
    Tape tape;
    auto out = f.model.forward_joint(f.encoded[i % f.encoded.size()], 1.0, 1.0);
    tape.backward(out.joint);
    opt.step();
    ++i;
  }
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64);

static void BM_GreedyDecode(benchmark::State& state) {
  Fixture f(32);
  f.model.set_training(false);
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        f.model.generate(f.encoded[i % f.encoded.size()], DecodeStrategy::Greedy));
    ++i;
  }
}
BENCHMARK(BM_GreedyDecode);

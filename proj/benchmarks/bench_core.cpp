#include <benchmark/benchmark.h>

#include "mprl/data.hpp"
#include "mprl/decode.hpp"
#include "mprl/eval.hpp"
#include "mprl/policy.hpp"
#include "mprl/tape.hpp"
#include "mprl/trainer.hpp"

namespace {

using namespace mprl;

ModelParams default_params() {
  ModelConfig cfg;
  cfg.init_seed = 1;
  return init_model(cfg);
}

std::vector<int> bench_sequence(int length) {
  Rng rng(7);
  std::vector<int> tokens;
  tokens.reserve(static_cast<size_t>(length));
  for (int i = 0; i < length; ++i)
    tokens.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(Vocab::standard().pad_id()))));
  return tokens;
}

void BM_MatmulForward(benchmark::State& state) {
  int m = static_cast<int>(state.range(0));
  Tensor a = Tensor::zeros({m, 128});
  Tensor b = Tensor::zeros({128, 512});
  for (auto _ : state) {
    Tape tape;
    Tensor out = tape.matmul(a, b);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * m * 128 * 512);
}
BENCHMARK(BM_MatmulForward)->Arg(64)->Arg(112)->Arg(160);

void BM_ModelForward(benchmark::State& state) {
  ModelParams params = default_params();
  std::vector<int> tokens = bench_sequence(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    Tape tape;
    ForwardOutput out = forward(tape, params, tokens);
    benchmark::DoNotOptimize(out.token_logits.data());
  }
}
BENCHMARK(BM_ModelForward)->Arg(64)->Arg(112)->Arg(160);

void BM_TrainStepCe(benchmark::State& state) {
  ModelParams params = default_params();
  AdamState adam = AdamState::for_params(params);
  const Vocab& vocab = Vocab::standard();
  CorpusSpec spec;
  spec.count = 16;
  spec.seed = 3;
  std::vector<Problem> corpus = generate_synthetic(spec);
  TrainConfig tc;
  tc.mode = TrainMode::Ce;
  size_t i = 0;
  for (auto _ : state) {
    const Problem& prob = corpus[i++ % corpus.size()];
    Tape tape;
    TotalLoss tl = total_loss(tape, params, vocab, prob, nullptr, nullptr, tc);
    tape.backward(tl.loss);
    clip_global_norm(params, kGradClipNorm);
    adam_step(params, adam, tc.learning_rate);
  }
}
BENCHMARK(BM_TrainStepCe);

void BM_DecoderFeed(benchmark::State& state) {
  ModelParams params = default_params();
  Decoder decoder(params);
  std::vector<int> prompt = bench_sequence(100);
  decoder.prefill(prompt);
  int base = decoder.length();
  for (auto _ : state) {
    decoder.truncate(base);
    benchmark::DoNotOptimize(decoder.feed(5).token_logits.data());
  }
}
BENCHMARK(BM_DecoderFeed);

void BM_GreedyRollout(benchmark::State& state) {
  ModelParams params = default_params();
  const Vocab& vocab = Vocab::standard();
  CorpusSpec spec;
  spec.count = 1;
  spec.seed = 5;
  std::vector<Problem> corpus = generate_synthetic(spec);
  std::vector<int> prompt = vocab.encode(corpus[0].question);
  Rng rng(1);
  for (auto _ : state) {
    Trajectory traj = rollout(params, vocab, prompt, 48, DecodeMode::Greedy, rng);
    benchmark::DoNotOptimize(traj.tokens.data());
  }
}
BENCHMARK(BM_GreedyRollout);

}  // namespace

BENCHMARK_MAIN();

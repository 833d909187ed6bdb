#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "earkd/models.hpp"
#include "earkd/preprocess.hpp"
#include "earkd/signal.hpp"

namespace {

using namespace earkd;

constexpr double kRate = 100.0;
constexpr std::size_t kEpochSamples = 3000;

std::vector<double> noise(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 10.0);
  std::vector<double> x(n);
  for (double& v : x) v = d(rng);
  return x;
}

EpochTensor random_epoch(unsigned seed) {
  EpochTensor e(kEpochSamples, 3);
  e.data = noise(e.data.size(), seed);
  return e;
}

void BM_BandpassFilter(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(signal::bandpass_filter(x, kRate, signal::kBandpassLowHz, signal::kBandpassHighHz));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BandpassFilter)->Arg(kEpochSamples)->Arg(kEpochSamples * 200);

void BM_BandPower(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(signal::band_power(x, kRate, 10.0, 35.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BandPower)->Arg(kEpochSamples)->Arg(kEpochSamples * 200);

void BM_PairwiseBandPower(benchmark::State& state) {
  Recording ear;
  ear.sample_rate = kRate;
  unsigned seed = 10;
  for (const auto& name : preprocess::kEarElectrodes) {
    ear.channel_ids.push_back(name);
    ear.channels.push_back(noise(static_cast<std::size_t>(state.range(0)), seed++));
  }
  for (auto _ : state) benchmark::DoNotOptimize(preprocess::pairwise_band_power(ear));
}
BENCHMARK(BM_PairwiseBandPower)->Arg(kEpochSamples * 20)->Unit(benchmark::kMillisecond);

ModelConfig bench_config(Arch arch) {
  ModelConfig c;
  c.arch = arch;
  c.epoch_samples = kEpochSamples;
  return c;
}

void BM_Forward(benchmark::State& state) {
  const auto model = build_stager(bench_config(static_cast<Arch>(state.range(0))));
  const auto epoch = random_epoch(3);
  for (auto _ : state) benchmark::DoNotOptimize(model->forward(epoch));
}
BENCHMARK(BM_Forward)
    ->Arg(static_cast<int>(Arch::Cnn))
    ->Arg(static_cast<int>(Arch::Transformer))
    ->Unit(benchmark::kMicrosecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto model = build_stager(bench_config(static_cast<Arch>(state.range(0))));
  const auto epoch = random_epoch(4);
  auto grads = zero_gradients(model->parameters());
  const std::vector<double> d_logits(kNumStages, 0.1);
  const std::vector<double> d_feature(model->feature_dim(), 0.01);
  for (auto _ : state) {
    StagerOutput out;
    const auto trace = model->forward_traced(epoch, out);
    model->backward(*trace, d_logits, d_feature, grads);
    benchmark::DoNotOptimize(grads.front().data());
  }
}
BENCHMARK(BM_ForwardBackward)
    ->Arg(static_cast<int>(Arch::Cnn))
    ->Arg(static_cast<int>(Arch::Transformer))
    ->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();

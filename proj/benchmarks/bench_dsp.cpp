#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "nasality/acoustic_frontend.hpp"
#include "nasality/physio_params.hpp"
#include "nasality/signal_core.hpp"

using namespace nasality;

namespace {

Signal noise(double seconds, double rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.1);
  Signal s{std::vector<double>(static_cast<std::size_t>(seconds * rate)), rate, 0.0};
  for (auto& v : s.samples) v = n(rng);
  return s;
}

void BM_Highpass(benchmark::State& state) {
  const Signal x = noise(static_cast<double>(state.range(0)), 51200.0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(highpass_baseline(x, 0.1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_Highpass)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_HilbertEnvelope(benchmark::State& state) {
  const Signal x = noise(static_cast<double>(state.range(0)), 51200.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(hilbert_envelope(x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_HilbertEnvelope)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Nasalance(benchmark::State& state) {
  const Signal oral = noise(static_cast<double>(state.range(0)), 51200.0, 3);
  const Signal nasal = noise(static_cast<double>(state.range(0)), 51200.0, 4);
  for (auto _ : state) benchmark::DoNotOptimize(compute_nasalance(oral, nasal));
}
BENCHMARK(BM_Nasalance)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Voicing(benchmark::State& state) {
  const Signal egg = noise(static_cast<double>(state.range(0)), 51200.0, 5);
  for (auto _ : state) benchmark::DoNotOptimize(compute_voicing(egg));
}
BENCHMARK(BM_Voicing)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_AppSurrogate(benchmark::State& state) {
  const Signal x = noise(2.0, kAppSampleRate, 6);
  for (auto _ : state) benchmark::DoNotOptimize(app_surrogate(x, 100.0));
}
BENCHMARK(BM_AppSurrogate)->Unit(benchmark::kMillisecond);

void BM_AudSpecSegment(benchmark::State& state) {
  const Signal x = noise(2.0, 16000.0, 7);
  for (auto _ : state) benchmark::DoNotOptimize(audspec(x));
}
BENCHMARK(BM_AudSpecSegment)->Unit(benchmark::kMillisecond);

}  // namespace

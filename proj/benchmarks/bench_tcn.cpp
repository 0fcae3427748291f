#include <benchmark/benchmark.h>

#include <random>

#include "nasality/tcn.hpp"

using namespace nasality;

namespace {

Tensor3<float> input(std::size_t batch) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensor3<float> x(batch, 128, 250);
  for (auto& v : x.data) v = n(rng);
  return x;
}

void BM_TcnEvalForward(benchmark::State& state) {
  Tcn<float> model(ModelConfig{});
  const auto x = input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, Mode::eval));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TcnEvalForward)->Arg(1)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TcnTrainStep(benchmark::State& state) {
  Tcn<float> model(ModelConfig{});
  const auto x = input(static_cast<std::size_t>(state.range(0)));
  Tensor3<float> g(x.batch, 5, 200, 1e-3f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(x, Mode::train));
    model.backward(g);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TcnTrainStep)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

#include <benchmark/benchmark.h>

#include "a2net/net/model.hpp"
#include "a2net/rng.hpp"
#include "a2net/training/adam.hpp"
#include "a2net/training/trainer.hpp"

using namespace a2net;

namespace {

diff::Tensor<float> yuv_input(std::size_t n, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  diff::Tensor<float> t({n, 3, size, size});
  auto d = t.mutable_data();
  const std::size_t plane = size * size;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const bool luma = (i / plane) % 3 == 0;
    d[i] = static_cast<float>(luma ? rng.uniform() : rng.uniform(-0.5, 0.5));
  }
  return t;
}

void BM_Forward(benchmark::State& state) {
  net::NetworkConfig cfg;
  cfg.variant = static_cast<net::Variant>(state.range(1));
  const net::Model<float> model(cfg);
  const auto x = yuv_input(1, static_cast<std::size_t>(state.range(0)), 1);
  diff::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
  state.SetLabel(std::string(net::to_string(cfg.variant)));
}
BENCHMARK(BM_Forward)
    ->ArgsProduct({{64, 256}, {static_cast<long>(net::Variant::a2net), static_cast<long>(net::Variant::general)}})
    ->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  net::Model<float> model(net::NetworkConfig{});
  training::TrainingConfig cfg;
  training::Adam adam(model.parameters(), {cfg.beta1, cfg.beta2, cfg.epsilon});
  const training::Batch batch{yuv_input(4, size, 2), yuv_input(4, size, 3)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(training::train_step(model, adam, batch, cfg, cfg.base_lr));
  }
}
BENCHMARK(BM_TrainStep)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

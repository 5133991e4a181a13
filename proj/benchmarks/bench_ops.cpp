#include <benchmark/benchmark.h>

#include "a2net/diffcore/ops.hpp"
#include "a2net/objective/objective.hpp"
#include "a2net/rng.hpp"

using namespace a2net;

namespace {

diff::Tensor<float> filled(diff::Shape shape, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  diff::Tensor<float> t(shape);
  for (float& v : t.mutable_data()) v = static_cast<float>(rng.uniform());
  t.set_requires_grad(grad);
  return t;
}

// Args: spatial extent, channels.
void BM_Conv3x3Forward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto ch = static_cast<std::size_t>(state.range(1));
  const diff::ConvSpec spec{ch, ch, 3, 3, 1, 1};
  const auto x = filled({1, ch, size, size}, 1);
  const auto w = filled({ch, ch, 3, 3}, 2);
  const auto b = filled({1, ch, 1, 1}, 3);
  diff::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(diff::conv2d(x, w, b, spec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(size * size * ch * ch * 9));
}
BENCHMARK(BM_Conv3x3Forward)->Args({64, 32})->Args({128, 32})->Args({256, 32})->Unit(benchmark::kMillisecond);

void BM_Conv3x3Backward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto ch = static_cast<std::size_t>(state.range(1));
  const diff::ConvSpec spec{ch, ch, 3, 3, 1, 1};
  auto x = filled({1, ch, size, size}, 1, true);
  auto w = filled({ch, ch, 3, 3}, 2, true);
  auto b = filled({1, ch, 1, 1}, 3, true);
  for (auto _ : state) {
    diff::mean(diff::conv2d(x, w, b, spec)).backward();
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_Conv3x3Backward)->Args({64, 32})->Args({128, 32})->Unit(benchmark::kMillisecond);

void BM_ConvTranspose4x4Stride2(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const std::size_t ch = 32;
  const diff::ConvSpec spec{ch, ch, 4, 4, 2, 1};
  const auto x = filled({1, ch, size, size}, 4);
  const auto w = filled({ch, ch, 4, 4}, 5);
  const auto b = filled({1, ch, 1, 1}, 6);
  diff::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(diff::conv_transpose2d(x, w, b, spec));
}
BENCHMARK(BM_ConvTranspose4x4Stride2)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SsimLossWithGradient(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto a = filled({4, 1, size, size}, 7, true);
  const auto b = filled({4, 1, size, size}, 8);
  for (auto _ : state) {
    objective::ssim_loss(a, b).backward();
  }
}
BENCHMARK(BM_SsimLossWithGradient)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

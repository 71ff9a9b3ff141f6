#include <benchmark/benchmark.h>

#include "bgg/graph_blocks.hpp"
#include "bgg/networks.hpp"
#include "bgg/training.hpp"

using namespace bgg;

namespace {

// 3x3 same-padding convolution at the block resolution used by the toy model.
void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = Tensor::normal({c, 16, 16}, 0, 1, 1, DType::f32);
  const Tensor k = Tensor::normal({c, c, 3, 3}, 0, 0.05, 2, DType::f32);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, 1, 1));
  state.SetItemsProcessed(state.iterations() * c * c * 9 * 256);
}
BENCHMARK(BM_Conv2d)->Arg(32)->Arg(64)->Arg(128);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = Tensor::normal({c, 16, 16}, 0, 1, 1, DType::f32);
  const Tensor k = Tensor::normal({c, c, 3, 3}, 0, 0.05, 2, DType::f32);
  for (auto _ : state) {
    Tape tape;
    const Tensor kl = tape.watch(k);
    benchmark::DoNotOptimize(backward(sum(conv2d(tape.watch(x), kl, 1, 1))));
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(64);

void BM_BGRBranch(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  DTypeGuard g(DType::f32);
  ParamInit init(1);
  const auto p = BGRBranchParams::make(init, "b", c, 32, c / 2);
  const Tensor feat = Tensor::normal({c, 16, 16}, 0, 1, 3), src = Tensor::normal({c, 16, 16}, 0, 1, 4);
  for (auto _ : state) benchmark::DoNotOptimize(bgr_branch(nullptr, feat, src, p));
}
BENCHMARK(BM_BGRBranch)->Arg(64)->Arg(128);

void BM_GeneratorForward(benchmark::State& state) {
  DTypeGuard g(DType::f32);
  GeneratorConfig cfg;
  cfg.blocks = 4;
  cfg.channels = 64;
  cfg.variant = static_cast<Variant>(state.range(0));
  const auto params = GeneratorParams::make(cfg, 1);
  const auto pair = make_pair(1, 0, 64, 64, Split::train);
  const Tensor src = image_to_tensor(pair.image_a, -1, 1);
  const Tensor pa = joints_to_heatmap(pair.skel_a, 64, 64), pb = joints_to_heatmap(pair.skel_b, 64, 64);
  for (auto _ : state) benchmark::DoNotOptimize(generator_forward(nullptr, src, pa, pb, params));
  state.SetLabel(std::string(variant_name(cfg.variant)));
}
BENCHMARK(BM_GeneratorForward)
    ->Arg(static_cast<int>(Variant::B1))
    ->Arg(static_cast<int>(Variant::B6))
    ->Arg(static_cast<int>(Variant::plus_plus))
    ->Unit(benchmark::kMillisecond);

// One full adversarial step (D update + G update) under the toy protocol.
void BM_TrainStep(benchmark::State& state) {
  DTypeGuard g(DType::f32);
  GeneratorConfig cfg;
  cfg.blocks = 4;
  cfg.channels = 64;
  auto ts = TrainState::create(cfg, TrainOptions{}, 1);
  const auto pair = make_pair(1, 0, 64, 64, Split::train);
  Example ex;
  ex.source = image_to_tensor(pair.image_a, -1, 1);
  ex.target = image_to_tensor(pair.image_b, -1, 1);
  ex.source_pose = joints_to_heatmap(pair.skel_a, 64, 64);
  ex.target_pose = joints_to_heatmap(pair.skel_b, 64, 64);
  const Example* batch[] = {&ex};
  for (auto _ : state) benchmark::DoNotOptimize(train_step(ts, batch));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

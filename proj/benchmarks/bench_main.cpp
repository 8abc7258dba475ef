#include <benchmark/benchmark.h>

#include <vector>

#include "plr/corruptor.hpp"
#include "plr/lesionbank.hpp"
#include "plr/nn/loss.hpp"
#include "plr/nn/network.hpp"
#include "plr/nn/ops.hpp"
#include "plr/nn/optim.hpp"
#include "plr/perlin.hpp"
#include "plr/rng.hpp"
#include "plr/similarity.hpp"
#include "plr/synth.hpp"

using namespace plr;

namespace {

nn::Tensor<float> random_tensor(nn::Shape s, std::uint64_t seed) {
  Rng rng(seed);
  nn::Tensor<float> t(s);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_RenderNoise(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(perlin::render_noise_image(seed++, size, {}));
  state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_RenderNoise)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_BuildBank(benchmark::State& state) {
  std::vector<img::GrayImage> noise;
  for (std::uint64_t s = 0; s < 2; ++s) noise.push_back(perlin::render_noise_image(s, 512, {}));
  for (auto _ : state) benchmark::DoNotOptimize(lesion::build_bank(noise, 500, 180.0, {5, 25}, 1));
}
BENCHMARK(BM_BuildBank)->Unit(benchmark::kMillisecond);

void BM_PastePatches(benchmark::State& state) {
  const auto scan = synth::normal_scan(512, 1);
  const auto mask = img::derive_lung_mask(scan, 100);
  std::vector<img::GrayImage> noise{perlin::render_noise_image(0, 512, {})};
  const auto bank = lesion::build_bank(noise, 200, 180.0, {5, 25}, 2);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(corrupt::paste_patches(scan, mask, bank, 30, seed++));
}
BENCHMARK(BM_PastePatches)->Unit(benchmark::kMicrosecond);

void BM_GaussianBlur(benchmark::State& state) {
  const auto scan = synth::normal_scan(512, 1);
  for (auto _ : state) benchmark::DoNotOptimize(corrupt::gaussian_blur(scan, 5, std::nullopt));
}
BENCHMARK(BM_GaussianBlur)->Unit(benchmark::kMillisecond);

void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({4, c, 64, 64}, 1);
  const auto w = random_tensor({c, c, 3, 3}, 2);
  const auto b = random_tensor({c, 1, 1, 1}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, w, b));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(4 * 64 * 64 * c * c * 9));
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({4, c, 64, 64}, 1);
  const auto w = random_tensor({c, c, 3, 3}, 2);
  const auto g = random_tensor({4, c, 64, 64}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(x, w, g));
}
BENCHMARK(BM_Conv2dBackward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

// One optimizer step of the desk U-Net on a batch of four 64x64 images.
void BM_UNetTrainStep(benchmark::State& state) {
  auto w = nn::init_unet<float>(nn::UNetConfig::desk(), 1);
  const auto x = random_tensor({4, 1, 64, 64}, 2);
  const auto target = random_tensor({4, 1, 64, 64}, 3);
  nn::Optimizer<float> opt({nn::OptimizerKind::kSgd, 1e-3}, w);
  for (auto _ : state) {
    nn::UNetTape<float> tape;
    const auto loss = nn::mse_loss(nn::unet_forward(w, x, &tape), target);
    opt.step(w, nn::unet_backward(w, tape, loss.grad));
  }
}
BENCHMARK(BM_UNetTrainStep)->Unit(benchmark::kMillisecond);

void BM_SetSimilarity(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<sim::PatchVector> a(n), b(n);
  for (auto* set : {&a, &b})
    for (auto& v : *set)
      for (auto& x : v) x = static_cast<double>(rng.uniform_int(0, 255));
  for (auto _ : state) benchmark::DoNotOptimize(sim::set_similarity(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n));
}
BENCHMARK(BM_SetSimilarity)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

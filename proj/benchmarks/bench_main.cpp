#include <benchmark/benchmark.h>

#include <random>

#include "sonotype/augment.hpp"
#include "sonotype/evalstat.hpp"
#include "sonotype/nnet.hpp"
#include "sonotype/spectro.hpp"

using namespace sonotype;

namespace {

AudioBuffer noise_audio(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g(0.0f, 0.1f);
  AudioBuffer a;
  a.samples.resize(n);
  for (auto& s : a.samples) s = g(rng);
  return a;
}

void BM_Spectrogram(benchmark::State& state) {
  const auto audio = noise_audio(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(spectrogram(audio));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Spectrogram)->Arg(44100)->Arg(441000);

void BM_ResizeBilinear(benchmark::State& state) {
  GrayImage img = GrayImage::Random(129, 300);
  const auto side = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(resize_bilinear(img, side, side));
}
BENCHMARK(BM_ResizeBilinear)->Arg(64)->Arg(224);

nn::Batch<float> random_batch(std::size_t n, std::size_t side) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  nn::Batch<float> b;
  b.size = n;
  b.images.resize(n * side * side * 3);
  for (auto& v : b.images) v = u(rng);
  b.aux.resize(n * kAuxSize);
  for (auto& v : b.aux) v = u(rng);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(i % 6));
  return b;
}

nn::NetworkConfig net_config(std::size_t side) {
  nn::NetworkConfig c;
  c.image_side = side;
  c.num_classes = 6;
  return c;
}

void BM_Forward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  nn::Network<float> net(net_config(side));
  net.initialize(3);
  const auto batch = random_batch(32, side);
  for (auto _ : state) benchmark::DoNotOptimize(net.predict(batch));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Forward)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  nn::Network<float> net(net_config(side));
  net.initialize(4);
  const auto batch = random_batch(32, side);
  for (auto _ : state) {
    const auto pass = net.forward(batch, nn::Mode::training, 1, true);
    benchmark::DoNotOptimize(net.backward(pass, batch.labels));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Augment(benchmark::State& state) {
  std::mt19937_64 rng(5);
  EncodedSample s;
  s.image.height = s.image.width = 224;
  s.image.data.resize(224 * 224 * Image8::kChannels);
  for (auto& v : s.image.data) v = static_cast<std::uint8_t>(rng() % 256);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(apply(s, random_spec(++seed, NoiseBank{})));
}
BENCHMARK(BM_Augment);

void BM_Metrics(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScoredPredictions p;
  p.num_classes = 6;
  for (int i = 0; i < state.range(0); ++i) {
    std::vector<double> row(6);
    for (auto& v : row) v = u(rng);
    p.add(i % 6, row);
  }
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(p));
}
BENCHMARK(BM_Metrics)->Arg(150)->Arg(5000);

}  // namespace

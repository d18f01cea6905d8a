#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "provaudit/ann_index.hpp"
#include "provaudit/image.hpp"
#include "provaudit/metric.hpp"

using namespace provaudit;

namespace {

ImageTensor random_image(int side, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageTensor img(side, side);
  for (float& v : img.data()) v = u(gen);
  return img;
}

std::shared_ptr<EmbeddingSet> random_set(std::size_t n, std::size_t dim) {
  std::mt19937_64 gen(11);
  std::normal_distribution<float> g;
  auto set = std::make_shared<EmbeddingSet>(dim);
  std::vector<float> v(dim);
  for (std::size_t i = 0; i < n; ++i) {
    // Clustered rows, closer to real embeddings than isotropic noise.
    const float center = static_cast<float>(i % 50);
    for (float& x : v) x = center + 0.3f * g(gen);
    set->add(i, v);
  }
  return set;
}

void BM_ExtractFeatures(benchmark::State& state) {
  const FilterBank bank = build_filter_bank(kDefaultFilterSeed);
  const ImageTensor img = random_image(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(img, bank));
}
BENCHMARK(BM_ExtractFeatures)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Lpips(benchmark::State& state) {
  const FilterBank bank = build_filter_bank(kDefaultFilterSeed);
  const int side = static_cast<int>(state.range(0));
  const FeatureStack a = extract_features(random_image(side, 1), bank);
  const FeatureStack b = extract_features(random_image(side, 2), bank);
  const CalibrationWeights w = CalibrationWeights::ones(bank);
  for (auto _ : state) benchmark::DoNotOptimize(lpips_distance(a, b, w));
}
BENCHMARK(BM_Lpips)->Arg(64)->Arg(128)->Arg(256);

void BM_ExactKnn(benchmark::State& state) {
  const auto set = random_set(static_cast<std::size_t>(state.range(0)), 112);
  const std::vector<float> q(set->row(7).begin(), set->row(7).end());
  for (auto _ : state) benchmark::DoNotOptimize(exact_knn(q, *set, 10));
}
BENCHMARK(BM_ExactKnn)->Arg(1000)->Arg(10000)->Arg(50000);

void BM_AnnSearch(benchmark::State& state) {
  const auto set = random_set(static_cast<std::size_t>(state.range(0)), 112);
  const AnnIndex index = AnnIndex::build(set, AnnParams{});
  const std::vector<float> q(set->row(7).begin(), set->row(7).end());
  for (auto _ : state) benchmark::DoNotOptimize(index.search(q, 10, 64));
}
BENCHMARK(BM_AnnSearch)->Arg(1000)->Arg(10000)->Arg(50000)->Unit(benchmark::kMicrosecond);

void BM_AnnBuild(benchmark::State& state) {
  const auto set = random_set(static_cast<std::size_t>(state.range(0)), 112);
  for (auto _ : state) benchmark::DoNotOptimize(AnnIndex::build(set, AnnParams{}));
}
BENCHMARK(BM_AnnBuild)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

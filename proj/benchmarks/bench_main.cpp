// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "wsibench/auroc.hpp"
#include "wsibench/embedder.hpp"
#include "wsibench/macenko.hpp"
#include "wsibench/nds.hpp"
#include "wsibench/rng.hpp"
#include "wsibench/synthetic.hpp"

namespace {

using namespace wsibench;

ScoreGrid random_grid(Eigen::Index F, Eigen::Index S) {
  Rng rng(1);
  Eigen::MatrixXd m(F, S);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return make_grid(m);
}

void BM_NdsExact(benchmark::State& state) {
  const auto g = random_grid(state.range(0), 5);
  for (auto _ : state) benchmark::DoNotOptimize(nds_exact(g));
}
BENCHMARK(BM_NdsExact)->Arg(4)->Arg(8)->Arg(18)->Arg(64);

void BM_NdsEnumerate(benchmark::State& state) {
  const auto g = random_grid(state.range(0), 5);
  for (auto _ : state) benchmark::DoNotOptimize(nds_enumerate(g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trial_space_size(g)));
}
BENCHMARK(BM_NdsEnumerate)->Arg(4)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Auroc(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform();
    labels[i] = static_cast<int>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(auroc(scores, labels));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auroc)->RangeMultiplier(8)->Range(64, 1 << 15);

// Slides of k x k 64-pixel patches.
struct SlideFixture {
  explicit SlideFixture(int k) {
    Rng rng(3);
    synth::TwoStainOptions o;
    o.width = o.height = 64 * k;
    slide = synth::two_stain_image(synth::random_stain_matrix(rng), o, rng).image;
    patches = tile(slide, 64, "bench");
  }
  Image slide;
  std::vector<Patch> patches;
};

void BM_MacenkoSlidewise(benchmark::State& state) {
  const SlideFixture f(static_cast<int>(state.range(0)));
  const auto ref = default_reference_profile();
  for (auto _ : state) benchmark::DoNotOptimize(normalise_slidewise(f.slide, f.patches, ref));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.patches.size()));
}
BENCHMARK(BM_MacenkoSlidewise)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_MacenkoPatchwise(benchmark::State& state) {
  const SlideFixture f(static_cast<int>(state.range(0)));
  const auto ref = default_reference_profile();
  for (auto _ : state) benchmark::DoNotOptimize(normalise_patchwise(f.patches, ref));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.patches.size()));
}
BENCHMARK(BM_MacenkoPatchwise)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Embed(benchmark::State& state) {
  const SlideFixture f(1);
  const Embedder e({"rp", 1, static_cast<int>(state.range(0)), 8, 1.0});
  for (auto _ : state) benchmark::DoNotOptimize(e.embed(f.patches[0].pixels));
}
BENCHMARK(BM_Embed)->Arg(64)->Arg(384);

}  // namespace

BENCHMARK_MAIN();

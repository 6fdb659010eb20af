#include <benchmark/benchmark.h>

#include "fairvec/matcher_metrics.hpp"
#include "fairvec/pairing.hpp"
#include "fairvec/rng.hpp"
#include "fairvec/synthetic_data.hpp"

namespace {

using namespace fairvec;

ScoredPairs random_scores(std::size_t n) {
  Rng rng(1);
  ScoredPairs s;
  for (std::size_t i = 0; i < n; ++i) {
    const bool genuine = rng.uniform() < 0.25;
    s.labels.push_back(genuine ? 1 : 0);
    s.scores.push_back(rng.normal() * 0.2 + (genuine ? 0.6 : 0.1));
  }
  return s;
}

void BM_Sweep(benchmark::State& state) {
  const auto s = random_scores(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sweep(s));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Sweep)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Complexity();

void BM_CalibrateGlobal(benchmark::State& state) {
  const auto s = random_scores(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_global(s));
}
BENCHMARK(BM_CalibrateGlobal)->Range(1 << 10, 1 << 18);

void BM_TarAtFar(benchmark::State& state) {
  const auto s = random_scores(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tar_at_far(s, default_far_targets()));
}
BENCHMARK(BM_TarAtFar)->Range(1 << 14, 1 << 18);

void BM_ScorePairs(benchmark::State& state) {
  const auto set = generate(default_biased_config(0));
  const auto folds = assign_folds(set, 5, 0);
  const auto pairs = build_pairs(set, folds, PairPolicy{});
  for (auto _ : state) benchmark::DoNotOptimize(score_pairs(set, pairs));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * pairs.size()));
}
BENCHMARK(BM_ScorePairs)->Unit(benchmark::kMillisecond);

}  // namespace

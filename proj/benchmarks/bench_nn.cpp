#include <benchmark/benchmark.h>

#include "fairvec/debias.hpp"
#include "fairvec/nn.hpp"

namespace {

using namespace fairvec;

nn::Tensor2 random_batch(std::size_t rows, std::size_t cols) {
  Rng rng(2);
  nn::Tensor2 x(rows, cols);
  for (auto& v : x.data()) v = rng.normal();
  return x;
}

// Dense forward + backward at the trunk and probe widths.
void BM_DenseForwardBackward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  nn::Dense layer(width, width, rng);
  const auto x = random_batch(200, width);
  const nn::Tensor2 g(200, width, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer.forward(x, true));
    benchmark::DoNotOptimize(layer.backward(g));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 200 * width * width * 3));
}
BENCHMARK(BM_DenseForwardBackward)->Arg(64)->Arg(256)->Arg(512);

void BM_DebiasStep(benchmark::State& state) {
  auto model = build_model(64, 160, 8, 1.0, 1);
  const auto x = random_batch(200, 64);
  std::vector<int> id(200), sub(200);
  for (int n = 0; n < 200; ++n) {
    id[static_cast<std::size_t>(n)] = n % 160;
    sub[static_cast<std::size_t>(n)] = n % 8;
  }
  for (auto _ : state) benchmark::DoNotOptimize(forward_backward(model, x, id, sub, true));
}
BENCHMARK(BM_DebiasStep);

}  // namespace

#include <benchmark/benchmark.h>

#include "gainlora/kernels.hpp"
#include "gainlora/rng.hpp"

using namespace gainlora;

namespace {

Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian_init(rng, r, c, 1.0);
}

template <Mat (*Gemm)(const Mat&, kernels::Trans, const Mat&, kernels::Trans)>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Mat a = random_mat(n, n, 1);
  const Mat b = random_mat(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Gemm(a, kernels::Trans::No, b, kernels::Trans::Yes));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <Mat (*Gram)(const Mat&)>
void bm_gram(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const Mat h = random_mat(d, 512, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Gram(h));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d * d * 512 / 2));
}

}  // namespace

BENCHMARK(bm_gemm<kernels::serial::gemm>)->Name("gemm/serial")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(bm_gemm<kernels::parallel::gemm>)->Name("gemm/parallel")->RangeMultiplier(2)->Range(64, 512)->UseRealTime();
BENCHMARK(bm_gram<kernels::serial::gram>)->Name("gram/serial")->RangeMultiplier(2)->Range(64, 256);
BENCHMARK(bm_gram<kernels::parallel::gram>)->Name("gram/parallel")->RangeMultiplier(2)->Range(64, 256)->UseRealTime();

BENCHMARK_MAIN();

// OpenMP kernels against their serial references, at the sizes the pipeline
// actually runs: a 96x96 flow level and the first two network convolutions
// on a 150-frame chunk.
//
//   ./bench_kernels --benchmark_counters_tabular=true
//   OMP_NUM_THREADS=4 ./bench_kernels

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "breathflow/kernels.hpp"

using namespace breathflow::kernels;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return v;
}

struct RelaxFixture {
  int side;
  std::size_t n;
  std::vector<float> a11, a12, a22, b1, b2, wx, wy, du, dv;
  explicit RelaxFixture(int s)
      : side(s),
        n(static_cast<std::size_t>(s) * s),
        a11(random_vec<float>(n, 1, 0, 2)),
        a12(random_vec<float>(n, 2, -0.5, 0.5)),
        a22(random_vec<float>(n, 3, 0, 2)),
        b1(random_vec<float>(n, 4)),
        b2(random_vec<float>(n, 5)),
        wx(random_vec<float>(n, 6, 0, 1)),
        wy(random_vec<float>(n, 7, 0, 1)),
        du(n),
        dv(n) {}
  FlowSystem system() const { return {side, side, a11, a12, a22, b1, b2, wx, wy, 0.02f, 1e-3f}; }
};

template <bool Parallel>
void BM_Relax(benchmark::State& state) {
  RelaxFixture f(static_cast<int>(state.range(0)));
  const FlowSystem sys = f.system();
  for (auto _ : state) {
    if constexpr (Parallel) relax_red_black(sys, f.du, f.dv, 30, 1.8f);
    else reference::relax_red_black(sys, f.du, f.dv, 30, 1.8f);
    benchmark::DoNotOptimize(f.du.data());
  }
  state.SetItemsProcessed(state.iterations() * 30 * static_cast<std::int64_t>(f.n));
}
BENCHMARK(BM_Relax<true>)->Name("relax/parallel")->Arg(96)->Arg(192)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Relax<false>)->Name("relax/reference")->Arg(96)->Arg(192)->Unit(benchmark::kMicrosecond);

// args: in_channels, out_channels, side
template <bool Parallel, bool Backward>
void BM_Conv(benchmark::State& state) {
  const ConvShape s{150, static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                    static_cast<int>(state.range(2)), static_cast<int>(state.range(2))};
  const std::size_t in_n = static_cast<std::size_t>(s.frames) * s.in_channels * s.height * s.width;
  const std::size_t out_n = static_cast<std::size_t>(s.frames) * s.out_channels * s.height * s.width;
  const std::size_t w_n = static_cast<std::size_t>(s.out_channels) * s.in_channels * 9;
  const auto in = random_vec<float>(in_n, 1), w = random_vec<float>(w_n, 2);
  const auto b = random_vec<float>(static_cast<std::size_t>(s.out_channels), 3);
  const auto go = random_vec<float>(out_n, 4);
  std::vector<float> out(out_n), gi(in_n), gw(w_n), gb(static_cast<std::size_t>(s.out_channels));
  for (auto _ : state) {
    if constexpr (Backward) {
      if constexpr (Parallel) conv3x3_backward<float>(s, in, w, go, gi, gw, gb);
      else reference::conv3x3_backward<float>(s, in, w, go, gi, gw, gb);
      benchmark::DoNotOptimize(gw.data());
    } else {
      if constexpr (Parallel) conv3x3_forward<float>(s, in, w, b, out);
      else reference::conv3x3_forward<float>(s, in, w, b, out);
      benchmark::DoNotOptimize(out.data());
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out_n * s.in_channels * 9));
}
BENCHMARK(BM_Conv<true, false>)->Name("conv_fwd/parallel")->Args({3, 4, 96})->Args({4, 8, 48})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv<false, false>)->Name("conv_fwd/reference")->Args({3, 4, 96})->Args({4, 8, 48})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv<true, true>)->Name("conv_bwd/parallel")->Args({3, 4, 96})->Args({4, 8, 48})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv<false, true>)->Name("conv_bwd/reference")->Args({3, 4, 96})->Args({4, 8, 48})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

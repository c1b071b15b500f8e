// OpenMP kernels against their serial reference twins.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "soar/background.hpp"
#include "soar/kernels.hpp"

using namespace soar;

namespace {

std::vector<float> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

kernels::ConvGeometry first_block() {
  kernels::ConvGeometry g;
  g.in = {32, 32, 16, 3};
  g.c_out = 8;
  g.stride = {2, 2, 1};
  return g;
}

kernels::ConvGeometry third_block() {
  kernels::ConvGeometry g;
  g.in = {8, 8, 8, 16};
  g.c_out = 64;
  g.stride = {2, 2, 2};
  return g;
}

template <bool Reference>
void BM_ConvForward(benchmark::State& state, kernels::ConvGeometry g) {
  const auto x = random_vec(g.in.count(), 1), w = random_vec(g.weight_count(), 2), b = random_vec(g.c_out, 3);
  std::vector<float> y(g.out().count());
  for (auto _ : state) {
    if constexpr (Reference) kernels::conv3d_forward_reference<float>(g, x, w, b, y);
    else kernels::conv3d_forward<float>(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Reference>
void BM_ConvBackward(benchmark::State& state, kernels::ConvGeometry g) {
  const auto x = random_vec(g.in.count(), 1), w = random_vec(g.weight_count(), 2);
  const auto gy = random_vec(g.out().count(), 4);
  std::vector<float> gx(g.in.count()), gw(g.weight_count()), gb(g.c_out);
  for (auto _ : state) {
    if constexpr (Reference) {
      kernels::conv3d_backward_input_reference<float>(g, gy, w, gx);
      kernels::conv3d_backward_params_reference<float>(g, x, gy, gw, gb);
    } else {
      kernels::conv3d_backward_input<float>(g, gy, w, gx);
      kernels::conv3d_backward_params<float>(g, x, gy, gw, gb);
    }
    benchmark::DoNotOptimize(gx.data());
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Reference>
void BM_TConvForward(benchmark::State& state) {
  kernels::TConvGeometry g;
  g.in = {8, 8, 8, 16};
  g.c_out = 8;
  const auto x = random_vec(g.in.count(), 1), w = random_vec(g.weight_count(), 2), b = random_vec(g.c_out, 3);
  std::vector<float> y(g.out().count());
  for (auto _ : state) {
    if constexpr (Reference) kernels::tconv3d_forward_reference<float>(g, x, w, b, y);
    else kernels::tconv3d_forward<float>(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Reference>
void BM_Tmf(benchmark::State& state) {
  const std::size_t window = static_cast<std::size_t>(state.range(0));
  ClipTensor clip({32, 32, 16, 3}, random_vec(32 * 32 * 16 * 3, 5));
  for (auto _ : state) {
    auto bg = Reference ? background::tmf_background_reference(clip, {window})
                        : background::tmf_background(clip, {window});
    benchmark::DoNotOptimize(bg.values().data());
  }
}

void conv_forward_parallel(benchmark::State& s, kernels::ConvGeometry g) { BM_ConvForward<false>(s, g); }
void conv_forward_reference(benchmark::State& s, kernels::ConvGeometry g) { BM_ConvForward<true>(s, g); }
void conv_backward_parallel(benchmark::State& s, kernels::ConvGeometry g) { BM_ConvBackward<false>(s, g); }
void conv_backward_reference(benchmark::State& s, kernels::ConvGeometry g) { BM_ConvBackward<true>(s, g); }

}  // namespace

BENCHMARK_CAPTURE(conv_forward_parallel, block1, first_block());
BENCHMARK_CAPTURE(conv_forward_reference, block1, first_block());
BENCHMARK_CAPTURE(conv_forward_parallel, block3, third_block());
BENCHMARK_CAPTURE(conv_forward_reference, block3, third_block());
BENCHMARK_CAPTURE(conv_backward_parallel, block1, first_block());
BENCHMARK_CAPTURE(conv_backward_reference, block1, first_block());
BENCHMARK_TEMPLATE(BM_TConvForward, false);
BENCHMARK_TEMPLATE(BM_TConvForward, true);
BENCHMARK_TEMPLATE(BM_Tmf, false)->Arg(3)->Arg(16);
BENCHMARK_TEMPLATE(BM_Tmf, true)->Arg(3)->Arg(16);

BENCHMARK_MAIN();

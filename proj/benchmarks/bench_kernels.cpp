#include <benchmark/benchmark.h>

#include "nucdet/network.hpp"
#include "nucdet/numerics.hpp"
#include "nucdet/rng.hpp"
#include "nucdet/shapes.hpp"

using namespace nucdet;

namespace {

Grid2D random_grid(Rng& rng, int h, int w) {
    Grid2D g(h, w);
    for (size_t i = 0; i < g.size(); ++i)
        g[i] = rng.uniform();
    return g;
}

void BM_Conv2dSame(benchmark::State& state) {
    Rng rng(1);
    const int side = static_cast<int>(state.range(0));
    const Grid2D input = random_grid(rng, side, side);
    const Grid2D kernel = random_grid(rng, 21, 21);
    for (auto _ : state)
        benchmark::DoNotOptimize(conv2d_same(input, kernel));
    state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Conv2dSame)->Arg(40)->Arg(128);

void BM_MaxPoolSame(benchmark::State& state) {
    Rng rng(2);
    const Grid2D input = random_grid(rng, 128, 128);
    const int p = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(max_pool_same(input, p));
}
BENCHMARK(BM_MaxPoolSame)->Arg(5)->Arg(11);

void BM_Ssim(benchmark::State& state) {
    Rng rng(3);
    const Grid2D a = random_grid(rng, 20, 20);
    const Grid2D b = random_grid(rng, 20, 20);
    for (auto _ : state)
        benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

void BM_CwSsim(benchmark::State& state) {
    Rng rng(4);
    const Grid2D a = random_grid(rng, 20, 20);
    const Grid2D b = random_grid(rng, 20, 20);
    for (auto _ : state)
        benchmark::DoNotOptimize(cw_ssim(a, b));
}
BENCHMARK(BM_CwSsim);

void BM_Forward(benchmark::State& state) {
    Rng rng(5);
    NetworkConfig config;
    config.depth = static_cast<int>(state.range(0));
    config.channels = 8;
    const NetworkParams params = init_params(config, 11);
    const Grid2D x = random_grid(rng, 40, 40);
    for (auto _ : state)
        benchmark::DoNotOptimize(forward(x, params));
}
BENCHMARK(BM_Forward)->Arg(3)->Arg(7);

void BM_Backward(benchmark::State& state) {
    Rng rng(6);
    NetworkConfig config;
    config.depth = 3;
    config.channels = 8;
    const NetworkParams params = init_params(config, 11);
    const Grid2D x = random_grid(rng, 40, 40);
    const Grid2D y = random_grid(rng, 40, 40);
    Grid2D edge(40, 40, 0.0);
    for (size_t i = 0; i < edge.size(); ++i)
        edge[i] = rng.uniform() < 0.1 ? 1.0 : 0.0;

    ShapeSet prior;
    prior.kind = ShapeKind::expert;
    prior.shapes.push_back(random_grid(rng, 15, 15));
    prior.shapes.push_back(random_grid(rng, 15, 15));

    HyperParams hp;
    hp.lambda = 1e-4;
    hp.tp = 0.0;
    for (auto _ : state)
        benchmark::DoNotOptimize(backward(x, y, edge, params, &prior, hp, TrainMode::sp));
}
BENCHMARK(BM_Backward);

}  // namespace

BENCHMARK_MAIN();

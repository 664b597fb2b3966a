#include <benchmark/benchmark.h>

#include "vectordream/raster.hpp"
#include "vectordream/vpsd.hpp"

using namespace vectordream;

namespace {

Scene make_scene(int canvas, int n_paths, PrimitiveStyle style_kind, std::uint64_t seed) {
    RunConfig cfg;
    cfg.canvas_w = cfg.canvas_h = canvas;
    cfg.n_paths = n_paths;
    cfg.init_radius_frac = 0.2;
    Rng rng(seed);
    return random_scene(cfg, StyleConfig::make(style_kind), rng);
}

}  // namespace

static void BM_Render(benchmark::State& state) {
    Scene scene = make_scene(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                             PrimitiveStyle::Iconography, 1);
    RenderOptions opts;
    for (auto _ : state) {
        RasterImage img = render(scene, opts);
        benchmark::DoNotOptimize(img.data.data());
    }
}
BENCHMARK(BM_Render)->Args({64, 16})->Args({224, 64})->Args({224, 128});

static void BM_RenderVjp(benchmark::State& state) {
    Scene scene = make_scene(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                             PrimitiveStyle::Iconography, 2);
    auto style = StyleConfig::make(PrimitiveStyle::Iconography);
    RenderOptions opts;
    Rng rng(3);
    RasterImage adj(scene.canvas_w, scene.canvas_h);
    for (double& v : adj.data) v = rng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        ParamGradient g = render_vjp(scene, opts, adj, style);
        benchmark::DoNotOptimize(g.values.data());
    }
}
BENCHMARK(BM_RenderVjp)->Args({64, 16})->Args({224, 64});

static void BM_SdsStep(benchmark::State& state) {
    Scene scene = make_scene(64, 16, PrimitiveStyle::Iconography, 4);
    auto style = StyleConfig::make(PrimitiveStyle::Iconography);
    NoiseSchedule sched = NoiseSchedule::scaled_linear();
    IdentityCodec codec;
    Rng rng(5);
    Grid target = gaussian_grid(64, 64, 3, rng);
    DeltaOracle oracle(target, sched);
    Grid eps = gaussian_grid(64, 64, 3, rng);
    for (auto _ : state) {
        ParamGradient g =
            sds_grad(scene, style, codec, oracle, {}, "y", sched, 0.5, eps, 1.0, {});
        benchmark::DoNotOptimize(g.values.data());
    }
}
BENCHMARK(BM_SdsStep);

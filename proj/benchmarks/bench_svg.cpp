#include <benchmark/benchmark.h>

#include "vectordream/svg.hpp"
#include "vectordream/vpsd.hpp"

using namespace vectordream;

namespace {

SvgDocument make_doc(int n_paths) {
    RunConfig cfg;
    cfg.canvas_w = cfg.canvas_h = 224;
    cfg.n_paths = n_paths;
    Rng rng(7);
    Scene scene = random_scene(cfg, StyleConfig::make(PrimitiveStyle::Iconography), rng);
    return scene_to_doc(scene);
}

}  // namespace

static void BM_WriteSvg(benchmark::State& state) {
    SvgDocument doc = make_doc(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        std::string text = write_svg(doc);
        benchmark::DoNotOptimize(text.data());
    }
}
BENCHMARK(BM_WriteSvg)->Arg(64)->Arg(256);

static void BM_ParseSvg(benchmark::State& state) {
    std::string text = write_svg(make_doc(static_cast<int>(state.range(0))));
    for (auto _ : state) {
        SvgDocument doc = parse_svg(text);
        benchmark::DoNotOptimize(doc.groups.data());
    }
}
BENCHMARK(BM_ParseSvg)->Arg(64)->Arg(256);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "gmtlab/decompose.hpp"
#include "gmtlab/density.hpp"
#include "gmtlab/scenario.hpp"
#include "gmtlab/spectral.hpp"

using namespace gmtlab;

namespace {

ScalarGridMeasure ball(const Grid& g) {
    ScalarGridMeasure m(g);
    for (std::size_t c = 0; c < g.cells(); ++c)
        if (norm(g.cell_center(c)) <= 0.5) m.mass[c] = g.cell_volume();
    return m;
}

MatrixGridMeasure companion(const ScalarGridMeasure& mu) {
    MatrixGridMeasure T(mu.grid);
    for (std::size_t c = 0; c < mu.grid.cells(); ++c)
        for (int i = 0; i < mu.grid.n; ++i)
            T.comp[c * mu.grid.n * mu.grid.n + i * mu.grid.n + i] = mu.mass[c];
    return T;
}

} // namespace

static void DecomposeDivergence(benchmark::State& state) {
    Grid g = Grid::centered(2, static_cast<int>(state.range(0)), 4.0);
    DecompositionRequest req;
    req.mu = ball(g);
    req.T = companion(req.mu);
    req.frame = FrameMatrix::identity(2);
    for (auto _ : state) {
        auto res = decompose_divergence(req);
        benchmark::DoNotOptimize(res.norms.g_p);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(DecomposeDivergence)->RangeMultiplier(2)->Range(64, 256)->Complexity();

static void SpectralDivergence(benchmark::State& state) {
    Grid g = Grid::centered(2, static_cast<int>(state.range(0)), 4.0);
    auto T = companion(ball(g));
    for (auto _ : state) {
        auto div = divergence_spectral(T);
        benchmark::DoNotOptimize(div.total_variation());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(SpectralDivergence)->RangeMultiplier(2)->Range(64, 256)->Complexity();

static void FubiniDisintegration(benchmark::State& state) {
    Scenario s;
    s.generator = "square-fubini";
    s.grid = Grid::centered(2, static_cast<int>(state.range(0)), 2.0);
    auto data = generate_scenario_data(s);
    for (auto _ : state) {
        auto mu = disintegrate(data.families[0], s.grid);
        benchmark::DoNotOptimize(mu.total_variation());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(FubiniDisintegration)->RangeMultiplier(2)->Range(128, 512)->Complexity();

static void DensityCertificatePoint(benchmark::State& state) {
    Scenario s;
    s.generator = "square-fubini";
    s.grid = Grid::centered(2, 512, 2.0);
    s.analyzer.ladder_steps = 2;
    auto data = generate_scenario_data(s);
    auto cache = build_defect_cache(data.families, s.grid, s.analyzer);
    for (auto _ : state) {
        auto cert = scale_induction_certificate(data.mu, data.families, data.directions,
                                                s.analyzer, vec(0.04, -0.03), &cache);
        benchmark::DoNotOptimize(cert.c_emp);
    }
}
BENCHMARK(DensityCertificatePoint)->Unit(benchmark::kMillisecond);

static void WaveConeGap(benchmark::State& state) {
    SymbolSpec sym = divergence_symbol(2);
    auto I = vectorize(Mat::identity(2));
    for (auto _ : state) {
        benchmark::DoNotOptimize(wave_cone_gap(sym, I, 2));
    }
}
BENCHMARK(WaveConeGap);

BENCHMARK_MAIN();

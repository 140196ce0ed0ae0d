#include <doctest.h>

#include <cmath>

#include "gmtlab/spectral.hpp"

using namespace gmtlab;

namespace {
constexpr double two_pi = 6.283185307179586476925286766559;
}

TEST_CASE("forward/inverse round trip") {
    Grid g = Grid::centered(2, 32, 4.0);
    Fft fft(g);
    std::vector<double> f(g.cells());
    for (std::size_t c = 0; c < g.cells(); ++c) {
        Vec p = g.cell_center(c);
        f[c] = std::sin(two_pi * p[0] / g.L) + 0.3 * std::cos(two_pi * 3 * p[1] / g.L);
    }
    auto back = fft.inverse(fft.forward(f));
    for (std::size_t c = 0; c < g.cells(); ++c) CHECK(back[c] == doctest::Approx(f[c]).epsilon(1e-12));
}

TEST_CASE("spectral divergence is exact on band-limited fields") {
    Grid g = Grid::centered(2, 64, 4.0);
    MatrixGridMeasure T(g);
    // T_00 = sin(2 pi k x / L), rest zero: (Div T)_0 = (2 pi k / L) cos(...)
    const double k = 3.0;
    for (std::size_t c = 0; c < g.cells(); ++c) {
        Vec p = g.cell_center(c);
        T.comp[c * 4 + 0] = std::sin(two_pi * k * p[0] / g.L);
    }
    auto div = divergence_spectral(T);
    for (std::size_t c = 0; c < g.cells(); ++c) {
        Vec p = g.cell_center(c);
        double expected = two_pi * k / g.L * std::cos(two_pi * k * p[0] / g.L);
        CHECK(div.comp[c * 2 + 0] == doctest::Approx(expected).epsilon(1e-9));
        CHECK(std::abs(div.comp[c * 2 + 1]) <= 1e-9);
    }
}

TEST_CASE("centered differences cross-validate the spectral divergence") {
    Grid g = Grid::centered(2, 128, 4.0);
    MatrixGridMeasure T(g);
    for (std::size_t c = 0; c < g.cells(); ++c) {
        Vec p = g.cell_center(c);
        T.comp[c * 4 + 0] = std::sin(two_pi * p[0] / g.L) * std::cos(two_pi * p[1] / g.L);
        T.comp[c * 4 + 3] = std::cos(two_pi * 2 * p[0] / g.L);
    }
    auto ds = divergence_spectral(T);
    auto dc = divergence_centered(T);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < ds.comp.size(); ++i) {
        err = std::max(err, std::abs(ds.comp[i] - dc.comp[i]));
        scale = std::max(scale, std::abs(ds.comp[i]));
    }
    // second-order finite differences on a smooth field
    CHECK(err <= 0.01 * scale);
}

TEST_CASE("three-dimensional grids round-trip and conserve mass") {
    Grid g = Grid::centered(3, 16, 4.0);
    Fft fft(g);
    std::vector<double> f(g.cells());
    for (std::size_t c = 0; c < g.cells(); ++c) {
        Vec p = g.cell_center(c);
        f[c] = std::cos(two_pi * p[0] / g.L) * std::sin(two_pi * 2 * p[2] / g.L);
    }
    auto back = fft.inverse(fft.forward(f));
    for (std::size_t c = 0; c < g.cells(); ++c)
        CHECK(back[c] == doctest::Approx(f[c]).epsilon(1e-11));

    ScalarGridMeasure m(g);
    m.mass[*g.cell_of(vec(0.1, -0.2, 0.3))] = 2.0;
    auto r = mollify(m, 0.5);
    CHECK(std::abs(r.out.total_variation() - 2.0) <= 2e-10);
}

#include "gmtlab/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace gmtlab {

namespace {
constexpr double two_pi = 6.283185307179586476925286766559;

// the FFTW planner is a global; executing distinct plans is thread-safe
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

fftw_plan make_plan(int rank, const int* dims, std::complex<double>* in,
                    std::complex<double>* out, int sign) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    return fftw_plan_dft(rank, dims, reinterpret_cast<fftw_complex*>(in),
                         reinterpret_cast<fftw_complex*>(out), sign, FFTW_ESTIMATE);
}

void drop_plan(fftw_plan p) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(p);
}
} // namespace

Fft::Fft(const Grid& grid) : grid_(grid) {}

std::vector<std::complex<double>> Fft::forward(const std::vector<double>& cells) const {
    const std::size_t total = grid_.cells();
    std::vector<std::complex<double>> in(total), out(total);
    for (std::size_t i = 0; i < total; ++i) in[i] = cells[i];
    int dims[3] = {grid_.N, grid_.N, grid_.N};
    fftw_plan plan = make_plan(grid_.n, dims, in.data(), out.data(), FFTW_FORWARD);
    fftw_execute(plan);
    drop_plan(plan);
    return out;
}

std::vector<double> Fft::inverse(const std::vector<std::complex<double>>& spec) const {
    const std::size_t total = grid_.cells();
    std::vector<std::complex<double>> in(spec), out(total);
    int dims[3] = {grid_.N, grid_.N, grid_.N};
    fftw_plan plan = make_plan(grid_.n, dims, in.data(), out.data(), FFTW_BACKWARD);
    fftw_execute(plan);
    drop_plan(plan);
    std::vector<double> res(total);
    const double scale = 1.0 / static_cast<double>(total);
    for (std::size_t i = 0; i < total; ++i) res[i] = out[i].real() * scale;
    return res;
}

Vec Fft::frequency(std::size_t flat) const {
    Vec xi{};
    std::size_t rem = flat;
    for (int i = grid_.n - 1; i >= 0; --i) {
        long k = static_cast<long>(rem % grid_.N);
        rem /= grid_.N;
        if (k > grid_.N / 2) k -= grid_.N;
        xi[i] = static_cast<double>(k) / grid_.L;
    }
    return xi;
}

VectorGridMeasure divergence_spectral(const MatrixGridMeasure& T) {
    const Grid& g = T.grid;
    const int n = g.n;
    Fft fft(g);
    VectorGridMeasure div(g);
    std::vector<double> field(g.cells());
    for (int i = 0; i < n; ++i) {
        std::vector<std::complex<double>> acc(g.cells(), {0.0, 0.0});
        for (int j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < field.size(); ++c) field[c] = T.comp[c * n * n + i * n + j];
            auto sp = fft.forward(field);
            for (std::size_t s = 0; s < sp.size(); ++s) {
                acc[s] += std::complex<double>(0.0, two_pi * fft.frequency(s)[j]) * sp[s];
            }
        }
        auto row = fft.inverse(acc);
        for (std::size_t c = 0; c < row.size(); ++c) div.comp[c * n + i] = row[c];
    }
    return div;
}

std::vector<double> divergence_spectral(const VectorGridMeasure& V) {
    const Grid& g = V.grid;
    const int n = g.n;
    Fft fft(g);
    std::vector<double> field(g.cells());
    std::vector<std::complex<double>> acc(g.cells(), {0.0, 0.0});
    for (int j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < field.size(); ++c) field[c] = V.comp[c * n + j];
        auto sp = fft.forward(field);
        for (std::size_t s = 0; s < sp.size(); ++s) {
            acc[s] += std::complex<double>(0.0, two_pi * fft.frequency(s)[j]) * sp[s];
        }
    }
    return fft.inverse(acc);
}

VectorGridMeasure divergence_centered(const MatrixGridMeasure& T) {
    const Grid& g = T.grid;
    const int n = g.n;
    const double h = g.h();
    VectorGridMeasure div(g);

    // periodic index shift along axis `axis` by +/-1
    auto shifted = [&](std::size_t flat, int axis, int delta) {
        std::size_t stride = 1;
        for (int a = n - 1; a > axis; --a) stride *= g.N;
        std::size_t block = stride * g.N;
        std::size_t base = (flat / block) * block;
        std::size_t rem = flat - base;
        std::size_t idx = rem / stride;
        std::size_t inner = rem % stride;
        std::size_t nidx = (idx + g.N + delta) % g.N;
        return base + nidx * stride + inner;
    };

    for (std::size_t c = 0; c < g.cells(); ++c) {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) {
                std::size_t cp = shifted(c, j, +1);
                std::size_t cm = shifted(c, j, -1);
                s += (T.comp[cp * n * n + i * n + j] - T.comp[cm * n * n + i * n + j]) / (2.0 * h);
            }
            div.comp[c * n + i] = s;
        }
    }
    return div;
}

} // namespace gmtlab

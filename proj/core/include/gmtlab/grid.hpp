#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmtlab/errors.hpp"
#include "gmtlab/geometry.hpp"

namespace gmtlab {

/// Periodic grid over the box [origin, origin + L)^n, N cells per side.
/// All scenario content is expected to live in the central box of side L/2;
/// spectral operations treat the box as a torus and report wraparound
/// leakage so the padding assumption stays auditable.
struct Grid {
    int n = 2;           // ambient dimension, 1..3
    int N = 128;         // cells per side, power of two, >= 8
    double L = 4.0;      // physical side length
    Vec origin{-2.0, -2.0, 0.0};

    Grid() = default;
    Grid(int n_, int N_, double L_, Vec origin_);

    /// Centered grid: box [-L/2, L/2)^n.
    static Grid centered(int n, int N, double L);

    double h() const { return L / N; }
    double cell_volume() const;
    std::size_t cells() const;

    Vec cell_center(std::size_t flat) const;
    std::optional<std::size_t> cell_of(const Vec& p) const;
    bool contains(const Vec& p) const;

    /// Signed offset of cell index `flat` from the grid origin corner,
    /// wrapped to [-L/2, L/2) per axis (torus convention).
    Vec wrapped_offset(std::size_t flat) const;

    bool operator==(const Grid& o) const;
};

/// Nonnegative measure given by one mass per cell.
struct ScalarGridMeasure {
    Grid grid;
    std::vector<double> mass;  // cell masses, >= 0

    ScalarGridMeasure() = default;
    explicit ScalarGridMeasure(const Grid& g) : grid(g), mass(g.cells(), 0.0) {}
    ScalarGridMeasure(const Grid& g, std::vector<double> m);

    double total_variation() const;
};

/// R^n-valued measure; cell values stored cell-major, n components per cell.
struct VectorGridMeasure {
    Grid grid;
    std::vector<double> comp;  // comp[cell*n + i]

    VectorGridMeasure() = default;
    explicit VectorGridMeasure(const Grid& g) : grid(g), comp(g.cells() * g.n, 0.0) {}

    Vec value(std::size_t cell) const;
    double total_variation() const;  // sum of per-cell Euclidean norms
};

/// R^{n x n}-valued measure; n*n components per cell, row-major.
struct MatrixGridMeasure {
    Grid grid;
    std::vector<double> comp;  // comp[cell*n*n + i*n + j]

    MatrixGridMeasure() = default;
    explicit MatrixGridMeasure(const Grid& g) : grid(g), comp(g.cells() * g.n * g.n, 0.0) {}

    Mat value(std::size_t cell) const;
    void set_value(std::size_t cell, const Mat& m);
    double total_variation() const;  // sum of per-cell Frobenius norms
};

struct PointMass {
    Vec position{};
    double weight = 0.0;
    std::optional<Vec> payload;  // present for vector-valued rasterization
};

using PointMassList = std::vector<PointMass>;

/// Sentinel for the weak-L^1 quasinorm mode of norms().
inline constexpr double weak_l1_mode = -1.0;

/// L^p norm of the Lebesgue density (p in [1,inf], inf = sup density),
/// or the weak-L^1 quasinorm sup_l l*vol{density > l} when p == weak_l1_mode.
/// For vector/matrix measures the per-cell variation is the Euclidean /
/// Frobenius norm (fixed artifact-wide).
double norms(const ScalarGridMeasure& m, double p);
double norms(const VectorGridMeasure& m, double p);
double norms(const MatrixGridMeasure& m, double p);

/// Shared implementation over a raw per-cell variation field.
double norms_of_cell_variation(const Grid& g, const std::vector<double>& cell_variation, double p);

/// Restriction to the closed ball B(center, radius); a cell survives iff its
/// center lies in the ball.
ScalarGridMeasure restrict_ball(const ScalarGridMeasure& m, const Vec& center, double radius);

/// Mass of m inside the closed ball (cell-center membership).
double ball_mass(const ScalarGridMeasure& m, const Vec& center, double radius);

/// Deposit point masses into the containing cells. Total mass is preserved
/// exactly. Throws input_error listing offenders if any point is outside the
/// physical box.
ScalarGridMeasure rasterize_scalar(const PointMassList& points, const Grid& grid);
VectorGridMeasure rasterize_vector(const PointMassList& points, const Grid& grid);

template <typename Measure>
struct MollifyResult {
    Measure out;
    bool under_resolved = false;   // kernel scale below one cell
    double boundary_leakage = 0.0; // mass within one kernel width of the box boundary
};

/// Convolution with the compactly supported bump c*(1-|x/s|^2)^4 on |x|<=s,
/// normalized to unit mass on the grid, computed spectrally on the torus.
MollifyResult<ScalarGridMeasure> mollify(const ScalarGridMeasure& m, double scale);
MollifyResult<VectorGridMeasure> mollify(const VectorGridMeasure& m, double scale);
MollifyResult<MatrixGridMeasure> mollify(const MatrixGridMeasure& m, double scale);

/// Kernel weights of the mollifier bump on the grid (unit sum), indexed by
/// wrapped cell offset. Exposed so tests can evaluate the kernel directly.
std::vector<double> mollifier_weights(const Grid& grid, double scale);

} // namespace gmtlab

#include "gmtlab/grid.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "gmtlab/spectral.hpp"

namespace gmtlab {

double determinant(const Mat& m) {
    Eigen::Matrix3d e = Eigen::Matrix3d::Identity();
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) e(i, j) = m(i, j);
    // padded identity rows keep the determinant equal to the n x n one
    return e.determinant();
}

Mat inverse(const Mat& m) {
    Eigen::Matrix3d e = Eigen::Matrix3d::Identity();
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) e(i, j) = m(i, j);
    Eigen::Matrix3d inv = e.inverse();
    Mat r;
    r.n = m.n;
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) r(i, j) = inv(i, j);
    return r;
}

static Eigen::MatrixXd to_eigen(const Mat& m) {
    Eigen::MatrixXd e(m.n, m.n);
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) e(i, j) = m(i, j);
    return e;
}

double operator_norm(const Mat& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
    return svd.singularValues()(0);
}

double smallest_singular_value(const Mat& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
    return svd.singularValues()(m.n - 1);
}

Grid::Grid(int n_, int N_, double L_, Vec origin_) : n(n_), N(N_), L(L_), origin(origin_) {
    if (n < 1 || n > 3) throw parameter_error("grid dimension must be 1..3");
    if (N < 8 || (N & (N - 1)) != 0) throw parameter_error("grid N must be a power of two >= 8");
    if (!(L > 0)) throw parameter_error("grid side length must be positive");
}

Grid Grid::centered(int n, int N, double L) {
    Vec o{};
    for (int i = 0; i < n; ++i) o[i] = -L / 2;
    return Grid(n, N, L, o);
}

double Grid::cell_volume() const {
    double v = 1.0;
    for (int i = 0; i < n; ++i) v *= h();
    return v;
}

std::size_t Grid::cells() const {
    std::size_t c = 1;
    for (int i = 0; i < n; ++i) c *= static_cast<std::size_t>(N);
    return c;
}

Vec Grid::cell_center(std::size_t flat) const {
    Vec p{};
    std::size_t rem = flat;
    for (int i = n - 1; i >= 0; --i) {
        std::size_t idx = rem % N;
        rem /= N;
        p[i] = origin[i] + (static_cast<double>(idx) + 0.5) * h();
    }
    return p;
}

std::optional<std::size_t> Grid::cell_of(const Vec& p) const {
    std::size_t flat = 0;
    for (int i = 0; i < n; ++i) {
        double rel = (p[i] - origin[i]) / h();
        if (rel < 0.0 || rel >= static_cast<double>(N)) return std::nullopt;
        flat = flat * N + static_cast<std::size_t>(rel);
    }
    return flat;
}

bool Grid::contains(const Vec& p) const { return cell_of(p).has_value(); }

Vec Grid::wrapped_offset(std::size_t flat) const {
    Vec d{};
    std::size_t rem = flat;
    for (int i = n - 1; i >= 0; --i) {
        long idx = static_cast<long>(rem % N);
        rem /= N;
        if (idx > N / 2) idx -= N;
        d[i] = idx * h();
    }
    return d;
}

bool Grid::operator==(const Grid& o) const {
    return n == o.n && N == o.N && L == o.L && origin == o.origin;
}

ScalarGridMeasure::ScalarGridMeasure(const Grid& g, std::vector<double> m)
    : grid(g), mass(std::move(m)) {
    if (mass.size() != grid.cells()) throw parameter_error("cell mass array size mismatch");
    for (double v : mass)
        if (v < 0.0) throw parameter_error("scalar grid measure requires nonnegative cell masses");
}

double ScalarGridMeasure::total_variation() const {
    double s = 0;
    for (double v : mass) s += v;
    return s;
}

Vec VectorGridMeasure::value(std::size_t cell) const {
    Vec v{};
    for (int i = 0; i < grid.n; ++i) v[i] = comp[cell * grid.n + i];
    return v;
}

double VectorGridMeasure::total_variation() const {
    double s = 0;
    const int n = grid.n;
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        double q = 0;
        for (int i = 0; i < n; ++i) q += comp[c * n + i] * comp[c * n + i];
        s += std::sqrt(q);
    }
    return s;
}

Mat MatrixGridMeasure::value(std::size_t cell) const {
    Mat m;
    m.n = grid.n;
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) m(i, j) = comp[cell * grid.n * grid.n + i * grid.n + j];
    return m;
}

void MatrixGridMeasure::set_value(std::size_t cell, const Mat& m) {
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) comp[cell * grid.n * grid.n + i * grid.n + j] = m(i, j);
}

double MatrixGridMeasure::total_variation() const {
    double s = 0;
    const int nn = grid.n * grid.n;
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        double q = 0;
        for (int k = 0; k < nn; ++k) q += comp[c * nn + k] * comp[c * nn + k];
        s += std::sqrt(q);
    }
    return s;
}

double norms_of_cell_variation(const Grid& g, const std::vector<double>& cell_variation, double p) {
    const double vol = g.cell_volume();
    if (p == weak_l1_mode) {
        // density takes finitely many values; the sup of l*vol{density > l}
        // is approached from below at each value v as v*vol{density >= v}
        std::vector<double> dens;
        dens.reserve(cell_variation.size());
        for (double m : cell_variation)
            if (m > 0.0) dens.push_back(m / vol);
        std::sort(dens.begin(), dens.end());
        double best = 0.0;
        for (std::size_t i = 0; i < dens.size(); ++i) {
            double v = dens[i];
            if (i > 0 && v == dens[i - 1]) continue;
            double measure_at_least = static_cast<double>(dens.size() - i) * vol;
            best = std::max(best, v * measure_at_least);
        }
        return best;
    }
    if (p < 1.0) throw parameter_error("norm exponent must satisfy p >= 1");
    if (std::isinf(p)) {
        double m = 0.0;
        for (double v : cell_variation) m = std::max(m, std::abs(v));
        return m / vol;
    }
    if (p == 1.0) {
        double s = 0.0;
        for (double v : cell_variation) s += std::abs(v);
        return s;
    }
    double s = 0.0;
    for (double v : cell_variation) {
        double d = std::abs(v) / vol;
        s += std::pow(d, p) * vol;
    }
    return std::pow(s, 1.0 / p);
}

double norms(const ScalarGridMeasure& m, double p) {
    return norms_of_cell_variation(m.grid, m.mass, p);
}

double norms(const VectorGridMeasure& m, double p) {
    const int n = m.grid.n;
    std::vector<double> var(m.grid.cells());
    for (std::size_t c = 0; c < var.size(); ++c) {
        double q = 0;
        for (int i = 0; i < n; ++i) q += m.comp[c * n + i] * m.comp[c * n + i];
        var[c] = std::sqrt(q);
    }
    return norms_of_cell_variation(m.grid, var, p);
}

double norms(const MatrixGridMeasure& m, double p) {
    const int nn = m.grid.n * m.grid.n;
    std::vector<double> var(m.grid.cells());
    for (std::size_t c = 0; c < var.size(); ++c) {
        double q = 0;
        for (int k = 0; k < nn; ++k) q += m.comp[c * nn + k] * m.comp[c * nn + k];
        var[c] = std::sqrt(q);
    }
    return norms_of_cell_variation(m.grid, var, p);
}

ScalarGridMeasure restrict_ball(const ScalarGridMeasure& m, const Vec& center, double radius) {
    if (radius < 0.0) throw parameter_error("restriction radius must be nonnegative");
    ScalarGridMeasure out(m.grid);
    for (std::size_t c = 0; c < m.mass.size(); ++c) {
        if (dist(m.grid.cell_center(c), center) <= radius) out.mass[c] = m.mass[c];
    }
    return out;
}

double ball_mass(const ScalarGridMeasure& m, const Vec& center, double radius) {
    const Grid& g = m.grid;
    // iterate only the bounding box of the ball
    long lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
    for (int ax = 0; ax < g.n; ++ax) {
        lo[ax] = std::max(0L, static_cast<long>(
                                   std::floor((center[ax] - radius - g.origin[ax]) / g.h()) - 1));
        hi[ax] = std::min(static_cast<long>(g.N) - 1,
                          static_cast<long>(
                              std::floor((center[ax] + radius - g.origin[ax]) / g.h()) + 1));
        if (hi[ax] < lo[ax]) return 0.0;
    }
    double s = 0.0;
    auto visit = [&](std::size_t flat) {
        if (m.mass[flat] != 0.0 && dist(g.cell_center(flat), center) <= radius)
            s += m.mass[flat];
    };
    if (g.n == 1) {
        for (long i = lo[0]; i <= hi[0]; ++i) visit(static_cast<std::size_t>(i));
    } else if (g.n == 2) {
        for (long i = lo[0]; i <= hi[0]; ++i)
            for (long j = lo[1]; j <= hi[1]; ++j)
                visit(static_cast<std::size_t>(i) * g.N + static_cast<std::size_t>(j));
    } else {
        for (long i = lo[0]; i <= hi[0]; ++i)
            for (long j = lo[1]; j <= hi[1]; ++j)
                for (long k = lo[2]; k <= hi[2]; ++k)
                    visit((static_cast<std::size_t>(i) * g.N + static_cast<std::size_t>(j)) * g.N +
                          static_cast<std::size_t>(k));
    }
    return s;
}

static void check_points_inside(const PointMassList& points, const Grid& grid) {
    std::ostringstream offenders;
    int bad = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!grid.contains(points[i].position)) {
            if (bad < 8) {
                offenders << " #" << i << "=(" << points[i].position[0] << ","
                          << points[i].position[1] << "," << points[i].position[2] << ")";
            }
            ++bad;
        }
    }
    if (bad > 0) {
        throw input_error("rasterize: " + std::to_string(bad) +
                          " point(s) outside the grid box:" + offenders.str());
    }
}

ScalarGridMeasure rasterize_scalar(const PointMassList& points, const Grid& grid) {
    check_points_inside(points, grid);
    ScalarGridMeasure out(grid);
    for (const auto& p : points) {
        if (p.weight < 0.0) throw parameter_error("rasterize: negative weight");
        out.mass[*grid.cell_of(p.position)] += p.weight;
    }
    return out;
}

VectorGridMeasure rasterize_vector(const PointMassList& points, const Grid& grid) {
    check_points_inside(points, grid);
    VectorGridMeasure out(grid);
    for (const auto& p : points) {
        if (!p.payload) throw parameter_error("rasterize_vector: point without payload");
        std::size_t c = *grid.cell_of(p.position);
        for (int i = 0; i < grid.n; ++i) out.comp[c * grid.n + i] += (*p.payload)[i];
    }
    return out;
}

std::vector<double> mollifier_weights(const Grid& grid, double scale) {
    if (!(scale > 0.0)) throw parameter_error("mollifier scale must be positive");
    std::vector<double> w(grid.cells(), 0.0);
    double sum = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) {
        Vec d = grid.wrapped_offset(c);
        double r2 = dot(d, d) / (scale * scale);
        if (r2 < 1.0) {
            double u = 1.0 - r2;
            double v = u * u;
            w[c] = v * v;  // (1-|x/s|^2)^4
            sum += w[c];
        }
    }
    if (sum <= 0.0) {
        // scale below cell resolution leaves only the center cell
        w.assign(w.size(), 0.0);
        w[0] = 1.0;
        return w;
    }
    for (double& v : w) v /= sum;
    return w;
}

/// Mass within `width` of the physical box boundary; used to estimate how
/// much of the content a torus convolution could wrap around.
static double boundary_band_mass(const Grid& g, const std::vector<double>& var, double width) {
    double s = 0.0;
    for (std::size_t c = 0; c < var.size(); ++c) {
        if (var[c] == 0.0) continue;
        Vec p = g.cell_center(c);
        for (int i = 0; i < g.n; ++i) {
            double lo = p[i] - g.origin[i];
            double hi = g.origin[i] + g.L - p[i];
            if (lo < width || hi < width) {
                s += std::abs(var[c]);
                break;
            }
        }
    }
    return s;
}

template <typename Measure>
static MollifyResult<Measure> mollify_components(const Measure& m, double scale, int comps,
                                                 const std::vector<double>& data,
                                                 std::vector<double>& out_data,
                                                 const std::vector<double>& variation) {
    MollifyResult<Measure> res;
    res.under_resolved = scale < m.grid.h();
    res.boundary_leakage = boundary_band_mass(m.grid, variation, scale);
    auto weights = mollifier_weights(m.grid, scale);
    Fft fft(m.grid);
    auto wh = fft.forward(weights);
    std::vector<double> field(m.grid.cells());
    for (int k = 0; k < comps; ++k) {
        for (std::size_t c = 0; c < field.size(); ++c) field[c] = data[c * comps + k];
        auto fh = fft.forward(field);
        for (std::size_t i = 0; i < fh.size(); ++i) fh[i] *= wh[i];
        auto conv = fft.inverse(fh);
        for (std::size_t c = 0; c < field.size(); ++c) out_data[c * comps + k] = conv[c];
    }
    return res;
}

MollifyResult<ScalarGridMeasure> mollify(const ScalarGridMeasure& m, double scale) {
    ScalarGridMeasure out(m.grid);
    auto res = mollify_components<ScalarGridMeasure>(m, scale, 1, m.mass, out.mass, m.mass);
    // the bump is nonnegative; clamp FFT roundoff so the invariant holds
    for (double& v : out.mass)
        if (v < 0.0) v = 0.0;
    res.out = std::move(out);
    return res;
}

MollifyResult<VectorGridMeasure> mollify(const VectorGridMeasure& m, double scale) {
    VectorGridMeasure out(m.grid);
    std::vector<double> var(m.grid.cells());
    for (std::size_t c = 0; c < var.size(); ++c) var[c] = norm(m.value(c));
    auto res = mollify_components<VectorGridMeasure>(m, scale, m.grid.n, m.comp, out.comp, var);
    res.out = std::move(out);
    return res;
}

MollifyResult<MatrixGridMeasure> mollify(const MatrixGridMeasure& m, double scale) {
    MatrixGridMeasure out(m.grid);
    std::vector<double> var(m.grid.cells());
    for (std::size_t c = 0; c < var.size(); ++c) var[c] = frobenius(m.value(c));
    auto res =
        mollify_components<MatrixGridMeasure>(m, scale, m.grid.n * m.grid.n, m.comp, out.comp, var);
    res.out = std::move(out);
    return res;
}

} // namespace gmtlab

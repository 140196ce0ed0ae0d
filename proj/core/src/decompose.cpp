#include "gmtlab/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "gmtlab/spectral.hpp"

namespace gmtlab {

namespace {
constexpr double two_pi = 6.283185307179586476925286766559;
constexpr double four_pi2 = two_pi * two_pi;

double holder_conjugate(double p) { return p / (p - 1.0); }

/// Support checks and the sign correction allow one cell layer beyond the
/// stated ball so rasterized boundary cells stay inside the corrected region.
double cell_slack(const Grid& g) { return g.h() * std::sqrt(static_cast<double>(g.n)); }
} // namespace

FrameMatrix FrameMatrix::from(const Mat& m) {
    FrameMatrix f;
    f.I = m;
    f.det = determinant(m);
    if (std::abs(f.det) <= 0.0) throw parameter_error("frame matrix must be invertible");
    f.inv_norm = operator_norm(inverse(m));
    return f;
}

void SymbolSpec::validate() const {
    if (order < 1) throw parameter_error("symbol order must be >= 1");
    if (m < 1 || l < 1) throw parameter_error("symbol shape must be positive");
    bool top = false;
    for (const auto& t : terms) {
        int o = t.alpha[0] + t.alpha[1] + t.alpha[2];
        if (o > order) throw parameter_error("symbol term exceeds declared order");
        if (t.a.size() != static_cast<std::size_t>(m) * l)
            throw parameter_error("symbol coefficient shape mismatch");
        for (double v : t.a) {
            if (std::abs(v) > coeff_bound + 1e-12)
                throw parameter_error("symbol coefficient exceeds declared bound");
            if (o == order && v != 0.0) top = true;
        }
    }
    if (!top) throw parameter_error("symbol needs a nonzero top-order coefficient");
}

SymbolSpec divergence_symbol(int n) {
    SymbolSpec s;
    s.order = 1;
    s.m = n;
    s.l = n * n;
    s.coeff_bound = 1.0;
    for (int j = 0; j < n; ++j) {
        SymbolTerm t;
        t.alpha = {0, 0, 0};
        t.alpha[j] = 1;
        t.a.assign(static_cast<std::size_t>(n) * n * n, 0.0);
        // (Div M)_i = sum_j d_j M_ij acting on vec(M)[i*n+j]
        for (int i = 0; i < n; ++i) t.a[static_cast<std::size_t>(i) * n * n + i * n + j] = 1.0;
        s.terms.push_back(std::move(t));
    }
    return s;
}

std::vector<double> vectorize(const Mat& m) {
    std::vector<double> v(static_cast<std::size_t>(m.n) * m.n);
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) v[static_cast<std::size_t>(i) * m.n + j] = m(i, j);
    return v;
}

double DecompositionRequest::effective_p() const {
    if (p > 0.0) return p;
    return mu.grid.n / (mu.grid.n - 0.5);
}

void DecompositionRequest::validate() const {
    const int n = mu.grid.n;
    if (!(mu.grid == T.grid)) throw parameter_error("mu and T must share a grid");
    double pe = effective_p();
    if (pe < 1.0) throw parameter_error("exponent p must satisfy p >= 1");
    if (n >= 3 && pe >= static_cast<double>(n) / (n - 1))
        throw parameter_error("exponent p must satisfy p < n/(n-1) for n >= 3");
    if (!std::isfinite(pe)) throw parameter_error("exponent p must be finite");
    if (!(radius > 0.0)) throw parameter_error("support radius must be positive");
    const double slack = mu.grid.h() * std::sqrt(static_cast<double>(n));
    double peak = 0.0;
    for (double v : mu.mass) peak = std::max(peak, v);
    for (std::size_t c = 0; c < mu.mass.size(); ++c) {
        // spectral roundoff dirt (<= 1e-12 of the peak) does not count as support
        if (mu.mass[c] > 1e-12 * peak && dist(mu.grid.cell_center(c), center) > radius + slack) {
            std::ostringstream os;
            Vec p0 = mu.grid.cell_center(c);
            os << "mu has mass outside the support ball at (" << p0[0] << "," << p0[1] << ")";
            throw input_error(os.str());
        }
    }
}

void correct_positivity(const Grid& grid, const Vec& center, double radius,
                        const std::vector<double>& g0, const std::vector<double>& b0,
                        std::vector<double>& g, std::vector<double>& b) {
    g.assign(grid.cells(), 0.0);
    b.assign(grid.cells(), 0.0);
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        if (dist(grid.cell_center(c), center) > radius) continue;
        double gp = std::max(g0[c], 0.0), gm = std::max(-g0[c], 0.0);
        double bp = std::max(b0[c], 0.0), bm = std::max(-b0[c], 0.0);
        g[c] = gp - bm;
        b[c] = bp - gm;
        if (g[c] < 0.0) {  // roundoff only: g0 >= b0^- holds cell-wise in exact arithmetic
            b[c] += g[c];
            g[c] = 0.0;
        }
    }
}

namespace {

struct SpectralCore {
    std::vector<double> g0;  // signed cell masses before correction
    std::vector<double> b0;
    double div_tv = 0.0;
};

/// Shared spectral construction on the identity frame.
SpectralCore divergence_core(const ScalarGridMeasure& mu, const MatrixGridMeasure& T) {
    const Grid& g = mu.grid;
    const int n = g.n;
    Fft fft(g);

    auto mu_hat = fft.forward(mu.mass);

    // xi^T T^ xi accumulated over components
    std::vector<std::complex<double>> quad_T(g.cells(), {0.0, 0.0});
    std::vector<std::complex<double>> quad_defect(g.cells(), {0.0, 0.0});
    std::vector<double> field(g.cells());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < field.size(); ++c)
                field[c] = T.comp[c * n * n + i * n + j];
            auto t_hat = fft.forward(field);
            for (std::size_t s = 0; s < t_hat.size(); ++s) {
                Vec xi = fft.frequency(s);
                double w = four_pi2 * xi[i] * xi[j];
                quad_T[s] += w * t_hat[s];
                std::complex<double> defect_hat =
                    (i == j ? mu_hat[s] : std::complex<double>(0.0)) - t_hat[s];
                quad_defect[s] += w * defect_hat;
            }
        }
    }

    SpectralCore core;
    std::vector<std::complex<double>> g_hat(g.cells()), b_hat(g.cells());
    for (std::size_t s = 0; s < g_hat.size(); ++s) {
        Vec xi = fft.frequency(s);
        double denom = 1.0 + four_pi2 * dot(xi, xi);
        g_hat[s] = (mu_hat[s] + quad_T[s]) / denom;
        b_hat[s] = quad_defect[s] / denom;
    }
    core.g0 = fft.inverse(g_hat);
    core.b0 = fft.inverse(b_hat);
    return core;
}

double div_total_variation(const DecompositionRequest& req) {
    if (req.div_tv_override) return *req.div_tv_override;
    return req.div_mode == DivMode::spectral ? divergence_spectral(req.T).total_variation()
                                             : divergence_centered(req.T).total_variation();
}

MatrixGridMeasure defect_field(const ScalarGridMeasure& mu, const MatrixGridMeasure& T,
                               const Mat& I) {
    MatrixGridMeasure d(T.grid);
    const int n = T.grid.n;
    for (std::size_t c = 0; c < T.grid.cells(); ++c) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                d.comp[c * n * n + i * n + j] =
                    I(i, j) * mu.mass[c] - T.comp[c * n * n + i * n + j];
    }
    return d;
}

NormReport make_report(const Grid& grid, const std::vector<double>& g, const std::vector<double>& b,
                       double mu_tv, double div_tv, double defect_tv, double p) {
    NormReport r;
    r.p = p;
    r.mu_tv = mu_tv;
    r.div_tv = div_tv;
    r.defect_tv = defect_tv;
    std::vector<double> absb(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) absb[i] = std::abs(b[i]);
    r.g_p = norms_of_cell_variation(grid, g, p);
    r.b_tv = norms_of_cell_variation(grid, absb, 1.0);
    r.b_p = norms_of_cell_variation(grid, absb, p);
    double denom_good = mu_tv + div_tv;
    r.ratio_good = denom_good > 0.0 ? r.g_p / denom_good : 0.0;
    if (defect_tv > 0.0 && denom_good > 0.0) {
        double pp = holder_conjugate(p);
        r.ratio_bad = r.b_tv / (std::pow(denom_good, 1.0 / p) * std::pow(defect_tv, 1.0 / pp));
    }
    return r;
}

} // namespace

DecompositionResult decompose_divergence(const DecompositionRequest& req) {
    req.validate();
    const Grid& grid = req.mu.grid;
    const double p = req.effective_p();

    DecompositionResult res;
    res.grid = grid;
    res.radius = req.radius;
    res.center = req.center;
    res.frame = FrameMatrix::identity(grid.n);

    MatrixGridMeasure defect = defect_field(req.mu, req.T, Mat::identity(grid.n));
    const double defect_tv = defect.total_variation();
    const double mu_tv = req.mu.total_variation();

    if (defect_tv > mu_tv) {
        // fallback branch (g,b) = (0, mu)
        res.fallback_zero_good = true;
        res.g.assign(grid.cells(), 0.0);
        res.b = req.mu.mass;
        res.norms = make_report(grid, res.g, res.b, mu_tv, div_total_variation(req), defect_tv, p);
        return res;
    }

    SpectralCore core = divergence_core(req.mu, req.T);
    correct_positivity(grid, req.center, req.radius + cell_slack(grid), core.g0, core.b0, res.g,
                       res.b);
    res.norms = make_report(grid, res.g, res.b, mu_tv, div_total_variation(req), defect_tv, p);
    return res;
}

namespace {

/// Signed deposit used by the change-of-variables transforms.
void deposit(std::vector<double>& field, const Grid& g, const Vec& pos, double w) {
    auto c = g.cell_of(pos);
    if (!c) throw input_error("scaled decomposition: transformed content left the grid box");
    field[*c] += w;
}

} // namespace

ScaledDecompositionResult scaled_decompose(const DecompositionRequest& req) {
    req.validate();
    const Grid& src = req.mu.grid;
    const int n = src.n;
    const double p = req.effective_p();
    const double pp = holder_conjugate(p);

    // I~ = r |I^{-1}| I and its inverse
    Mat Itilde = req.frame.I;
    const double s = req.radius * req.frame.inv_norm;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) Itilde(i, j) *= s;
    const Mat Itilde_inv = inverse(Itilde);
    const double det_scale = std::abs(determinant(Itilde));
    const Mat I_inv = inverse(req.frame.I);

    // transformed problem on the unit ball of a centered grid; the zoom
    // cannot add detail beyond the source resolution, so N caps at 256
    Grid dst = Grid::centered(n, std::min(src.N, 256), 4.0);
    ScalarGridMeasure mu_t(dst);
    MatrixGridMeasure T_t(dst);
    double mu_peak = 0.0, t_peak = 0.0;
    for (double v : req.mu.mass) mu_peak = std::max(mu_peak, v);
    for (double v : req.T.comp) t_peak = std::max(t_peak, std::abs(v));
    for (std::size_t c = 0; c < src.cells(); ++c) {
        Mat tval = req.T.value(c);
        double mval = req.mu.mass[c];
        bool has_t = false;
        for (int k = 0; k < n * n; ++k)
            has_t = has_t || std::abs(tval.a[static_cast<std::size_t>(k)]) > 1e-12 * t_peak;
        if (mval <= 1e-12 * mu_peak && !has_t) continue;
        Vec x = sub(src.cell_center(c), req.center);
        Vec y = mat_vec(Itilde_inv, x);
        auto cell = dst.cell_of(y);
        if (!cell) throw input_error("scaled decomposition: transformed content left the grid box");
        mu_t.mass[*cell] += mval / det_scale;
        if (has_t) {
            Mat tv;
            tv.n = n;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double q = 0;
                    for (int k = 0; k < n; ++k) q += I_inv(i, k) * tval(k, j);
                    tv(i, j) = q;
                }
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    T_t.comp[*cell * n * n + i * n + j] += tv(i, j) / det_scale;
        }
    }

    DecompositionRequest inner;
    inner.mu = std::move(mu_t);
    inner.T = std::move(T_t);
    inner.frame = FrameMatrix::identity(n);
    inner.p = p;
    // source-side cell slack magnified by the zoom keeps boundary cells legal
    inner.radius = 1.0 + cell_slack(src) / req.radius;
    inner.center = Vec{0.0, 0.0, 0.0};
    inner.div_mode = req.div_mode;
    DecompositionResult unit = decompose_divergence(inner);

    // transform back onto the source grid
    ScaledDecompositionResult out;
    out.det_scale = det_scale;
    out.result.grid = src;
    out.result.radius = req.radius;
    out.result.center = req.center;
    out.result.frame = req.frame;
    out.result.fallback_zero_good = unit.fallback_zero_good;
    out.result.g.assign(src.cells(), 0.0);
    out.result.b.assign(src.cells(), 0.0);
    double unit_peak = 0.0;
    for (std::size_t c = 0; c < dst.cells(); ++c)
        unit_peak = std::max({unit_peak, std::abs(unit.g[c]), std::abs(unit.b[c])});
    for (std::size_t c = 0; c < dst.cells(); ++c) {
        if (std::abs(unit.g[c]) <= 1e-12 * unit_peak && std::abs(unit.b[c]) <= 1e-12 * unit_peak)
            continue;
        Vec x = add(mat_vec(Itilde, dst.cell_center(c)), req.center);
        deposit(out.result.g, src, x, unit.g[c] * det_scale);
        deposit(out.result.b, src, x, unit.b[c] * det_scale);
    }
    for (double& v : out.result.g)
        if (v < 0.0) v = 0.0;  // rasterization cannot mix signs here; keep the invariant tight

    const double mu_tv = req.mu.total_variation();
    double div_tv = div_total_variation(req);
    MatrixGridMeasure scaled_defect = defect_field(req.mu, req.T, Mat::identity(n));
    {
        // frame-scaled defect mu*Id - I^{-1} T on the source grid
        const int nn = n * n;
        for (std::size_t c = 0; c < src.cells(); ++c) {
            Mat tval = req.T.value(c);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double q = 0;
                    for (int k = 0; k < n; ++k) q += I_inv(i, k) * tval(k, j);
                    scaled_defect.comp[c * nn + i * n + j] =
                        (i == j ? req.mu.mass[c] : 0.0) - q;
                }
        }
    }
    const double defect_tv = scaled_defect.total_variation();

    out.result.norms = make_report(src, out.result.g, out.result.b, mu_tv, div_tv, defect_tv, p);
    const double budget_mass = mu_tv + req.radius * req.frame.inv_norm * div_tv;
    double det_factor = std::pow(det_scale, 1.0 / pp);
    out.good_budget = det_factor > 0.0 ? budget_mass / det_factor : 0.0;
    out.bad_budget = std::pow(budget_mass, 1.0 / p) * std::pow(defect_tv, 1.0 / pp);
    return out;
}

SupportBound support_lower_bound(double total, double bad, double g_norm_p, double p) {
    if (!(total > 0.0)) throw parameter_error("support bound: total variation must be positive");
    if (!(g_norm_p > 0.0)) throw parameter_error("support bound: ||g||_p must be positive");
    if (bad < 0.0) throw parameter_error("support bound: negative bad part");
    if (p <= 1.0) throw parameter_error("support bound requires p > 1");
    SupportBound sb;
    if (bad > total / 2.0) return sb;  // hypothesis ||b|| <= ||mu||/2 failed
    sb.applicable = true;
    sb.bound = std::pow(total / (2.0 * g_norm_p), p / (p - 1.0));
    return sb;
}

const char* to_string(SupportHypothesis h) {
    switch (h) {
        case SupportHypothesis::ok: return "ok";
        case SupportHypothesis::frame_bound_failed: return "frame-bound";
        case SupportHypothesis::div_bound_failed: return "div-bound";
        case SupportHypothesis::defect_bound_failed: return "defect-bound";
        case SupportHypothesis::bad_part_too_large: return "bad-part";
    }
    return "?";
}

QuantifiedSupportBound quantified_support_bound(const DecompositionRequest& req, double tau,
                                                double D) {
    req.validate();
    if (!(tau > 0.0) || !(D > 0.0)) throw parameter_error("tau and D must be positive");
    QuantifiedSupportBound out;
    const int n = req.mu.grid.n;
    const double p = req.effective_p();
    const double mu_tv = req.mu.total_variation();

    if (req.frame.inv_norm > tau) {
        out.status = SupportHypothesis::frame_bound_failed;
        return out;
    }
    out.div_tv = div_total_variation(req);
    if (req.radius * out.div_tv > D * mu_tv) {
        out.status = SupportHypothesis::div_bound_failed;
        return out;
    }
    // defect budget of the constructive chain, capped at the fallback line
    double tau_inv = 1.0 / tau;
    out.d_threshold = std::min(
        std::pow(support_bound_kappa * tau_inv * std::pow(tau_inv + D, -1.0 / p), p / (p - 1.0)),
        1.0);
    MatrixGridMeasure defect(req.T.grid);
    {
        const Mat& I = req.frame.I;
        for (std::size_t c = 0; c < req.T.grid.cells(); ++c)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    defect.comp[c * n * n + i * n + j] =
                        I(i, j) * req.mu.mass[c] - req.T.comp[c * n * n + i * n + j];
    }
    out.defect_tv = defect.total_variation();
    if (out.defect_tv > out.d_threshold * mu_tv) {
        out.status = SupportHypothesis::defect_bound_failed;
        return out;
    }

    out.decomposition = scaled_decompose(req);
    SupportBound sb = support_lower_bound(mu_tv, out.decomposition.result.norms.b_tv,
                                          out.decomposition.result.norms.g_p, p);
    if (!sb.applicable) {
        out.status = SupportHypothesis::bad_part_too_large;
        return out;
    }
    out.bound = sb.bound;
    out.c_emp = sb.bound / std::pow(req.radius, n);
    return out;
}

namespace {

using CMat = std::vector<std::complex<double>>;  // row-major m x l

CMat symbol_at(const SymbolSpec& sym, const Vec& xi, bool top_only) {
    CMat A(static_cast<std::size_t>(sym.m) * sym.l, {0.0, 0.0});
    for (const auto& t : sym.terms) {
        int o = t.alpha[0] + t.alpha[1] + t.alpha[2];
        if (top_only && o != sym.order) continue;
        double mono = 1.0;
        for (int ax = 0; ax < 3; ++ax)
            for (int e = 0; e < t.alpha[ax]; ++e) mono *= xi[ax];
        // (2 pi i)^o
        std::complex<double> phase(1.0, 0.0);
        for (int e = 0; e < o; ++e) phase *= std::complex<double>(0.0, two_pi);
        std::complex<double> f = phase * mono;
        for (std::size_t k = 0; k < A.size(); ++k) A[k] += f * t.a[k];
    }
    return A;
}

std::vector<Vec> sphere_sample(int n, int samples) {
    std::vector<Vec> pts;
    if (n == 1) {
        pts.push_back(vec(1.0));
        pts.push_back(vec(-1.0));
        return pts;
    }
    if (n == 2) {
        pts.reserve(samples);
        for (int k = 0; k < samples; ++k) {
            double th = two_pi * k / samples;
            pts.push_back(vec(std::cos(th), std::sin(th)));
        }
        return pts;
    }
    // Fibonacci lattice on S^2
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    pts.reserve(samples);
    for (int k = 0; k < samples; ++k) {
        double z = 1.0 - 2.0 * (k + 0.5) / samples;
        double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
        double th = two_pi * k / golden;
        pts.push_back(vec(rad * std::cos(th), rad * std::sin(th), z));
    }
    return pts;
}

} // namespace

double wave_cone_gap(const SymbolSpec& sym, const std::vector<double>& I, int n, Vec* minimizer,
                     int samples) {
    sym.validate();
    if (I.size() != static_cast<std::size_t>(sym.l))
        throw parameter_error("wave cone gap: state dimension mismatch");
    if (samples < 4) throw parameter_error("wave cone gap needs at least 4 samples");
    double best = std::numeric_limits<double>::infinity();
    Vec arg{};
    for (const Vec& xi : sphere_sample(n, samples)) {
        CMat A = symbol_at(sym, xi, true);
        double q = 0.0;
        for (int i = 0; i < sym.m; ++i) {
            std::complex<double> s{0.0, 0.0};
            for (int j = 0; j < sym.l; ++j) s += A[static_cast<std::size_t>(i) * sym.l + j] * I[j];
            q += std::norm(s);
        }
        double v = std::sqrt(q);
        if (v < best) {
            best = v;
            arg = xi;
        }
    }
    if (minimizer) *minimizer = arg;
    return best;
}

namespace {

/// Per-frequency scalar multiplier application shared by m_A(T) and the
/// general decomposition: out^(xi) = (A(xi)I)^* A(xi) v^(xi) / (1 + |A(xi)I|^2)
/// where v has l components.
std::vector<double> general_cz(const SymbolSpec& sym, const std::vector<double>& I, const Grid& g,
                               const std::vector<std::vector<std::complex<double>>>& comp_hats,
                               const Fft& fft) {
    std::vector<std::complex<double>> out_hat(g.cells(), {0.0, 0.0});
    for (std::size_t s = 0; s < out_hat.size(); ++s) {
        Vec xi = fft.frequency(s);
        CMat A = symbol_at(sym, xi, false);
        // AI in C^m and |AI|^2
        std::vector<std::complex<double>> AI(sym.m, {0.0, 0.0});
        double ai2 = 0.0;
        for (int i = 0; i < sym.m; ++i) {
            std::complex<double> q{0.0, 0.0};
            for (int j = 0; j < sym.l; ++j) q += A[static_cast<std::size_t>(i) * sym.l + j] * I[j];
            AI[i] = q;
            ai2 += std::norm(q);
        }
        // A v^ in C^m
        std::complex<double> acc{0.0, 0.0};
        for (int i = 0; i < sym.m; ++i) {
            std::complex<double> av{0.0, 0.0};
            for (int j = 0; j < sym.l; ++j)
                av += A[static_cast<std::size_t>(i) * sym.l + j] * comp_hats[j][s];
            acc += std::conj(AI[i]) * av;
        }
        out_hat[s] = acc / (1.0 + ai2);
    }
    return fft.inverse(out_hat);
}

std::vector<std::vector<std::complex<double>>> component_ffts(const MatrixGridMeasure& T,
                                                              const Fft& fft) {
    const int nn = T.grid.n * T.grid.n;
    std::vector<std::vector<std::complex<double>>> hats(nn);
    std::vector<double> field(T.grid.cells());
    for (int k = 0; k < nn; ++k) {
        for (std::size_t c = 0; c < field.size(); ++c) field[c] = T.comp[c * nn + k];
        hats[k] = fft.forward(field);
    }
    return hats;
}

void require_gap(const SymbolSpec& sym, const std::vector<double>& I, int n, double gap_tol) {
    Vec xi_min{};
    double gap = wave_cone_gap(sym, I, n, &xi_min);
    if (gap <= gap_tol) {
        std::ostringstream os;
        os << "state lies in the wave cone: |A^k(xi) I| = " << gap << " at xi = (" << xi_min[0]
           << "," << xi_min[1] << "," << xi_min[2] << ")";
        throw precondition_error("wave-cone", os.str());
    }
}

} // namespace

std::vector<double> apply_general_multiplier(const SymbolSpec& sym, const std::vector<double>& I,
                                             const MatrixGridMeasure& T, double gap_tol) {
    sym.validate();
    require_gap(sym, I, T.grid.n, gap_tol);
    Fft fft(T.grid);
    return general_cz(sym, I, T.grid, component_ffts(T, fft), fft);
}

GeneralDecomposition decompose_general(const SymbolSpec& sym, const std::vector<double>& I,
                                       const DecompositionRequest& req, double gap_tol) {
    req.validate();
    sym.validate();
    require_gap(sym, I, req.mu.grid.n, gap_tol);
    const Grid& g = req.mu.grid;
    Fft fft(g);

    GeneralDecomposition out;
    out.mAT = general_cz(sym, I, g, component_ffts(req.T, fft), fft);

    // defect components I_j mu - T_j
    const int nn = g.n * g.n;
    std::vector<std::vector<std::complex<double>>> defect_hats(nn);
    std::vector<double> field(g.cells());
    for (int k = 0; k < nn; ++k) {
        for (std::size_t c = 0; c < field.size(); ++c)
            field[c] = I[k] * req.mu.mass[c] - req.T.comp[c * nn + k];
        defect_hats[k] = fft.forward(field);
    }
    out.b0 = general_cz(sym, I, g, defect_hats, fft);

    auto mu_hat = fft.forward(req.mu.mass);
    std::vector<std::complex<double>> g_hat(g.cells());
    for (std::size_t s = 0; s < g_hat.size(); ++s) {
        Vec xi = fft.frequency(s);
        CMat A = symbol_at(sym, xi, false);
        double ai2 = 0.0;
        for (int i = 0; i < sym.m; ++i) {
            std::complex<double> q{0.0, 0.0};
            for (int j = 0; j < sym.l; ++j) q += A[static_cast<std::size_t>(i) * sym.l + j] * I[j];
            ai2 += std::norm(q);
        }
        g_hat[s] = mu_hat[s] / (1.0 + ai2);
    }
    out.g0 = fft.inverse(g_hat);

    // merged path: mu = (g0 + 1_B m_A(T)) + b0, then the shared sign correction
    const double radius_eff = req.radius + cell_slack(g);
    std::vector<double> merged0(g.cells());
    for (std::size_t c = 0; c < merged0.size(); ++c) {
        bool in_ball = dist(g.cell_center(c), req.center) <= radius_eff;
        merged0[c] = out.g0[c] + (in_ball ? out.mAT[c] : 0.0);
    }
    correct_positivity(g, req.center, radius_eff, merged0, out.b0, out.merged_g, out.merged_b);
    return out;
}

} // namespace gmtlab

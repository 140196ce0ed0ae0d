#include "gmtlab/density.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gmtlab/spectral.hpp"

namespace gmtlab {

double AnalyzerConfig::effective_C(int n) const {
    return doubling_C > 0.0 ? doubling_C : std::pow(3.0, n);
}

double AnalyzerConfig::effective_p(int n) const {
    return p > 0.0 ? p : n / (n - 0.5);
}

double AnalyzerConfig::effective_D(int n) const {
    if (D > 0.0) return D;
    return 24.0 * n * std::max(effective_C(n), std::pow(3.0, n)) / (delta * delta);
}

double AnalyzerConfig::effective_r0(const Grid& g) const {
    return r0 > 0.0 ? r0 : 4.0 * g.h();
}

double AnalyzerConfig::rung_R(double r) const {
    // the smallest scale honoring the zoom precondition r < delta R / 12;
    // larger R only inflates the defect measure
    return R > 0.0 ? R : 12.5 * r / delta;
}

void AnalyzerConfig::validate(const Grid& g) const {
    if (!(tau > 0.0 && delta > 0.0 && delta <= 1.0))
        throw parameter_error("analyzer: tau > 0 and delta in (0,1] required");
    if (!(eps > 0.0 && eps < 0.5)) throw parameter_error("analyzer: eps in (0, 1/2) required");
    if (ladder_steps < 1) throw parameter_error("analyzer: ladder needs at least one step");
    double r_top = effective_r0(g) * std::pow(3.0, ladder_steps - 1);
    double Rtop = rung_R(r_top);
    if (!(r_top < delta * Rtop / 12.0))
        throw parameter_error("analyzer: ladder top violates r < delta R / 12");
    if (!(r_top < delta * Rtop / 5.0))
        throw parameter_error("analyzer: ladder must stay below R0 = delta R / 5");
}

const char* to_string(BranchKind k) {
    switch (k) {
        case BranchKind::doubling_pde: return "doubling-pde";
        case BranchKind::non_doubling_bootstrap: return "non-doubling-bootstrap";
        case BranchKind::hypothesis_fail: return "hypothesis-fail";
    }
    return "?";
}

DefectCache build_defect_cache(const std::vector<FragmentFamily>& fams, const Grid& grid,
                               const AnalyzerConfig& cfg) {
    cfg.validate(grid);
    DefectCache cache;
    for (int k = 0; k < cfg.ladder_steps; ++k) {
        double r = cfg.effective_r0(grid) * std::pow(3.0, k);
        cache.radii.push_back(r);
        std::vector<ScalarGridMeasure> per_family;
        for (const auto& fam : fams)
            per_family.push_back(defect_measure(fam, grid, cfg.eps, cfg.rung_R(r), true));
        cache.nu.push_back(std::move(per_family));
    }
    return cache;
}

LocalSupportEstimate local_support_estimate(const ScalarGridMeasure& mu,
                                            const std::vector<FragmentFamily>& fams,
                                            const std::vector<Vec>& directions,
                                            const AnalyzerConfig& cfg, const Vec& x, double r,
                                            const std::vector<ScalarGridMeasure>* nu_cache) {
    const Grid& grid = mu.grid;
    const int n = grid.n;
    cfg.validate(grid);
    if (fams.size() != static_cast<std::size_t>(n) || directions.size() != fams.size())
        throw parameter_error("local support estimate needs one family per frame direction");

    LocalSupportEstimate out;
    out.mu_r = ball_mass(mu, x, r);
    out.mu_2r = ball_mass(mu, x, 2.0 * r);
    out.mu_3r = ball_mass(mu, x, 3.0 * r);
    const double C = cfg.effective_C(n);

    if (out.mu_r <= 0.0 || out.mu_3r > C * out.mu_r) {
        out.branch = BranchKind::non_doubling_bootstrap;
        return out;
    }

    // defect hypothesis: nu_i(B(x,2r)) < C eps / delta^2 * mu(B(x,r))
    const double Reff = cfg.rung_R(r);
    out.defect_budget = C * cfg.eps / (cfg.delta * cfg.delta) * out.mu_r;
    for (std::size_t i = 0; i < fams.size(); ++i) {
        ScalarGridMeasure nu = nu_cache ? (*nu_cache)[i]
                                        : defect_measure(fams[i], grid, cfg.eps, Reff, true);
        out.nu_max_2r = std::max(out.nu_max_2r, ball_mass(nu, x, 2.0 * r));
    }
    if (!(out.nu_max_2r < out.defect_budget)) {
        out.branch = BranchKind::hypothesis_fail;
        out.failure = "defect";
        return out;
    }

    // localized estimates per family; frame rows are the family directions
    CutoffSpec cut;
    cut.x = x;
    cut.r = r;
    Mat I;
    I.n = n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) I(i, j) = directions[static_cast<std::size_t>(i)][j];
    FrameMatrix frame = FrameMatrix::from(I);

    MatrixGridMeasure T(grid);
    ScalarGridMeasure mu_loc(grid);
    std::vector<std::vector<double>> div_rows;
    for (std::size_t i = 0; i < fams.size(); ++i) {
        EstimateReport rep = localized_estimates(fams[i], directions[i], grid, cut, cfg.eps,
                                                 cfg.delta, Reff);
        if (!rep.pass1 || !rep.pass2) {
            out.branch = BranchKind::hypothesis_fail;
            out.failure = "localized-estimate";
            out.reports.push_back(std::move(rep));
            return out;
        }
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            for (int j = 0; j < n; ++j)
                T.comp[c * n * n + static_cast<std::size_t>(i) * n + j] +=
                    rep.extension_row.comp[c * n + j];
            mu_loc.mass[c] += rep.localized_mu.mass[c] / static_cast<double>(n);
        }
        div_rows.push_back(rep.extension_div_field);
        out.reports.push_back(std::move(rep));
    }

    // exact divergence total variation of the assembled matrix measure
    double div_tv = 0.0;
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        double q = 0.0;
        for (const auto& row : div_rows) q += row[c] * row[c];
        div_tv += std::sqrt(q);
    }

    DecompositionRequest req;
    req.mu = std::move(mu_loc);
    req.T = std::move(T);
    req.frame = frame;
    req.p = cfg.effective_p(n);
    req.radius = 2.0 * r;
    req.center = fams.front().phi.apply(x);
    req.div_tv_override = div_tv;
    out.qsb = quantified_support_bound(req, cfg.tau, cfg.effective_D(n));
    if (out.qsb.status != SupportHypothesis::ok) {
        out.branch = BranchKind::hypothesis_fail;
        out.failure = to_string(out.qsb.status);
        return out;
    }
    out.branch = BranchKind::doubling_pde;
    out.bound = out.qsb.bound;
    out.c_emp = out.bound / std::pow(r, n);
    return out;
}

DensityCertificate scale_induction_certificate(const ScalarGridMeasure& mu,
                                               const std::vector<FragmentFamily>& fams,
                                               const std::vector<Vec>& directions,
                                               const AnalyzerConfig& cfg, const Vec& x,
                                               const DefectCache* cache) {
    const Grid& grid = mu.grid;
    const int n = grid.n;
    cfg.validate(grid);

    DensityCertificate cert;
    cert.x = x;
    const double r0 = cfg.effective_r0(grid);
    const double seed_mass = ball_mass(mu, x, r0);
    if (seed_mass <= 0.0) {
        cert.status = "no-seed";
        return cert;
    }
    const double measured_seed_c = seed_mass / std::pow(r0 / 3.0, n);
    cert.seed_c = cfg.seed_c > 0.0 ? cfg.seed_c : measured_seed_c;
    if (seed_mass < cert.seed_c * std::pow(r0 / 3.0, n)) {
        cert.status = "no-seed";
        return cert;
    }

    double chain = seed_mass;  // certified lower bound for mu(B(x, r_k))
    bool failed = false;
    std::string failure;

    for (int k = 0; k < cfg.ladder_steps; ++k) {
        double r = r0 * std::pow(3.0, k);
        LadderStep step;
        step.r = r;
        const std::vector<ScalarGridMeasure>* nus =
            cache && static_cast<std::size_t>(k) < cache->nu.size() ? &cache->nu[k] : nullptr;
        LocalSupportEstimate est = local_support_estimate(mu, fams, directions, cfg, x, r, nus);
        step.branch = est.branch;
        step.failure = est.failure;
        step.mu_r = est.mu_r;
        step.mu_2r = est.mu_2r;
        step.mu_3r = est.mu_3r;
        step.nu_max_2r = est.nu_max_2r;
        step.support_bound = est.bound;
        switch (est.branch) {
            case BranchKind::non_doubling_bootstrap:
                // mu(B(x,3r)) > C mu(B(x,r)) >= 3^n * chain
                chain = std::pow(3.0, n) * std::min(chain, est.mu_r);
                break;
            case BranchKind::doubling_pde:
                // support bound certifies mu(B(x,2r)) at Hausdorff scale
                chain = std::min(est.mu_2r, std::max(est.bound, 0.0));
                break;
            case BranchKind::hypothesis_fail:
                if (!failed) {
                    failed = true;
                    failure = est.failure;
                }
                break;
        }
        if (failed) chain = 0.0;  // the induction chain does not survive a failed rung
        step.chain_value = chain;
        cert.steps.push_back(std::move(step));
        // a broken chain still records the remaining rungs' branch data
    }

    if (failed) {
        cert.status = failure;
        cert.c_emp = 0.0;
        return cert;
    }
    cert.status = "positive";
    // mu(B(x,r')) >= chain_k for r' in [3^k r0, 3^{k+1} r0]; normalize by (r'/9)^n
    double c_emp = seed_mass / std::pow(r0 / 9.0, n);
    for (std::size_t k = 0; k < cert.steps.size(); ++k) {
        double rho_next = r0 * std::pow(3.0, static_cast<double>(k) + 1.0);
        if (cert.steps[k].chain_value > 0.0)
            c_emp = std::min(c_emp, cert.steps[k].chain_value / std::pow(rho_next / 9.0, n));
    }
    cert.c_emp = c_emp;
    return cert;
}

namespace {

/// C^3 radial cutoff: 1 on [0, 1/2], 0 at 1, monotone smootherstep between.
double scan_cutoff(double s) {
    if (s <= 0.5) return 1.0;
    if (s >= 1.0) return 0.0;
    double u = (1.0 - s) / 0.5;
    return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

} // namespace

RatioScan singular_ratio_scan(const MatrixGridMeasure& T, const Vec& x,
                              const std::vector<double>& scales, const AnalyzerConfig& cfg) {
    const Grid& grid = T.grid;
    const int n = grid.n;
    for (std::size_t i = 1; i < scales.size(); ++i)
        if (!(scales[i] < scales[i - 1]))
            throw parameter_error("ratio scan needs strictly decreasing scales");

    // per-cell variation and the source-grid spectral divergence, shared by scales
    const int nn = n * n;
    std::vector<double> var(grid.cells(), 0.0);
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        double q = 0;
        for (int k = 0; k < nn; ++k) q += T.comp[c * nn + k] * T.comp[c * nn + k];
        var[c] = std::sqrt(q);
    }
    VectorGridMeasure divT = divergence_spectral(T);

    RatioScan scan;
    scan.x = x;
    for (double r : scales) {
        RatioScanRow row;
        row.r = r;

        double mass = 0.0;
        Mat polar;
        polar.n = n;
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            if (var[c] == 0.0) continue;
            if (dist(grid.cell_center(c), x) > r) continue;
            mass += var[c];
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) polar(i, j) += T.comp[c * nn + i * n + j];
        }
        if (mass <= 0.0) {
            row.skipped = true;
            scan.rows.push_back(row);
            continue;
        }
        double pf = frobenius(polar);
        if (pf > 0.0)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) polar(i, j) /= pf;

        SymbolSpec div_sym = divergence_symbol(n);
        row.polar_gap = wave_cone_gap(div_sym, vectorize(polar), n);
        if (row.polar_gap <= cfg.polar_gap_tol * 2.0 * 3.14159265358979323846) {
            row.outside_wave_cone = true;
        }

        // defect and divergence ratios on the source grid
        double defect = 0.0, div_ball = 0.0;
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            if (dist(grid.cell_center(c), x) > r) continue;
            double q = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double d = T.comp[c * nn + i * n + j] - polar(i, j) * var[c];
                    q += d * d;
                }
            defect += std::sqrt(q);
            double dq = 0.0;
            for (int i = 0; i < n; ++i) dq += divT.comp[c * n + i] * divT.comp[c * n + i];
            div_ball += std::sqrt(dq);
        }
        row.defect_ratio = defect / mass;
        row.div_ratio = r * div_ball / mass;

        if (!row.outside_wave_cone) {
            // blow-up onto a fresh centered grid, cut off and decompose
            Grid zoom = Grid::centered(n, grid.N, 4.0);
            ScalarGridMeasure mu_z(zoom);
            MatrixGridMeasure T_z(zoom);
            for (std::size_t c = 0; c < grid.cells(); ++c) {
                if (var[c] == 0.0) continue;
                Vec y = grid.cell_center(c);
                if (dist(y, x) > r) continue;
                Vec z = scale(sub(y, x), 1.0 / r);
                auto cz = zoom.cell_of(z);
                if (!cz) continue;
                double w = scan_cutoff(norm(z));
                if (w == 0.0) continue;
                mu_z.mass[*cz] += w * var[c];
                for (int k = 0; k < nn; ++k) T_z.comp[*cz * nn + k] += w * T.comp[c * nn + k];
            }
            DecompositionRequest req;
            req.mu = std::move(mu_z);
            req.T = std::move(T_z);
            req.frame = FrameMatrix::from(polar);
            req.p = cfg.effective_p(n);
            req.radius = 1.0;
            ScaledDecompositionResult dec = scaled_decompose(req);
            double b_ball = 0.0;
            for (std::size_t c = 0; c < zoom.cells(); ++c)
                if (norm(zoom.cell_center(c)) <= 1.0) b_ball += std::abs(dec.result.b[c]);
            row.b_ratio = b_ball / mass;
        }
        scan.rows.push_back(row);
    }
    return scan;
}

} // namespace gmtlab

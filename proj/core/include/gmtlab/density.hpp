#pragma once

#include <string>
#include <vector>

#include "gmtlab/alberti.hpp"
#include "gmtlab/decompose.hpp"

namespace gmtlab {

struct AnalyzerConfig {
    double tau = 2.0;          // frame bound |I^{-1}| <= tau
    double delta = 1.0;        // speed floor of the families
    double eps = 0.49;         // cone aperture / defect budget dial, in (0, 1/2)
    double doubling_C = 0.0;   // 0 -> 3^n
    double p = 0.0;            // 0 -> n/(n - 1/2)
    double D = 0.0;            // 0 -> 24 n max(doubling_C, 3^n) / delta^2
    double r0 = 0.0;           // 0 -> 4 grid cells
    int ladder_steps = 3;      // scales r0 * 3^k, k < ladder_steps
    /// Good-set scale for the defect machinery. 0 selects the rung-local
    /// R = 12.5 r / delta, the smallest scale honoring the zoom precondition
    /// r < delta R / 12 at every rung (the defect measure grows with R, so
    /// smaller is sharper; good sets of unit-length domains are empty once
    /// (1-eps) R exceeds 1/2, which caps the PDE-viable rung radii).
    double R = 0.0;
    double seed_c = 0.0;       // 0 -> measured at the seed radius
    double polar_gap_tol = 0.3;  // wave-cone gap threshold for the ratio scan

    double effective_C(int n) const;
    double effective_p(int n) const;
    double effective_D(int n) const;
    double effective_r0(const Grid& g) const;
    /// Good-set scale used at rung radius r.
    double rung_R(double r) const;
    void validate(const Grid& g) const;
};

enum class BranchKind { doubling_pde, non_doubling_bootstrap, hypothesis_fail };
const char* to_string(BranchKind k);

struct LocalSupportEstimate {
    BranchKind branch = BranchKind::hypothesis_fail;
    std::string failure;  // named hypothesis when branch == hypothesis_fail
    double mu_r = 0.0, mu_2r = 0.0, mu_3r = 0.0;
    double nu_max_2r = 0.0;
    double defect_budget = 0.0;  // C eps / delta^2 * mu(B(x,r))
    double bound = 0.0;          // support bound from the constructive chain
    double c_emp = 0.0;          // bound / r^n
    std::vector<EstimateReport> reports;
    QuantifiedSupportBound qsb;
};

/// Defect measures are point-independent; certificates over many points share
/// them. nu[k][i] is family i's defect at rung radius r0 * 3^k.
struct DefectCache {
    std::vector<double> radii;
    std::vector<std::vector<ScalarGridMeasure>> nu;
};
DefectCache build_defect_cache(const std::vector<FragmentFamily>& fams, const Grid& grid,
                               const AnalyzerConfig& cfg);

/// One rung of the scale induction at radius r: checks the doubling and
/// defect hypotheses; on success runs the localized estimates for every
/// family, assembles the matrix-valued extension measure and calls the
/// quantified support bound on the localized measure at radius 2r.
/// Hypothesis failures are values, not faults.
LocalSupportEstimate local_support_estimate(const ScalarGridMeasure& mu,
                                            const std::vector<FragmentFamily>& fams,
                                            const std::vector<Vec>& directions,
                                            const AnalyzerConfig& cfg, const Vec& x, double r,
                                            const std::vector<ScalarGridMeasure>* nu_cache
                                            = nullptr);

struct LadderStep {
    double r = 0.0;
    BranchKind branch = BranchKind::hypothesis_fail;
    std::string failure;
    double mu_r = 0.0, mu_2r = 0.0, mu_3r = 0.0;
    double nu_max_2r = 0.0;
    double support_bound = 0.0;
    double chain_value = 0.0;  // certified lower bound for mu(B(x, 3r))
};

struct DensityCertificate {
    Vec x{};
    std::string status;  // "positive" | "no-seed" | failing hypothesis name
    double seed_c = 0.0;
    double c_emp = 0.0;  // mu(B(x,r')) >= c_emp (r'/9)^n over the ladder
    std::vector<LadderStep> steps;
};

/// Scale induction over the ladder r0 * 3^k: at each rung either the doubling
/// hypothesis holds and the PDE branch certifies a support bound, or it fails
/// and the bootstrap branch propagates mu(B(x,3r)) > 3^n mu(B(x,r)). Every
/// rung records exactly one branch.
DensityCertificate scale_induction_certificate(const ScalarGridMeasure& mu,
                                               const std::vector<FragmentFamily>& fams,
                                               const std::vector<Vec>& directions,
                                               const AnalyzerConfig& cfg, const Vec& x,
                                               const DefectCache* cache = nullptr);

struct RatioScanRow {
    double r = 0.0;
    bool skipped = false;            // |T|(B(x,r)) == 0
    bool outside_wave_cone = false;  // polar gap at or below tolerance
    double polar_gap = 0.0;
    double b_ratio = 0.0;       // ||b||(B(0,1)) / |T|(B(x,r))
    double div_ratio = 0.0;     // r |Div T|(B(x,r)) / |T|(B(x,r))
    double defect_ratio = 0.0;  // ||T - polar |T|||(B(x,r)) / |T|(B(x,r))
};

struct RatioScan {
    Vec x{};
    std::vector<RatioScanRow> rows;
};

/// Blow-up ratio scan at x over decreasing scales: estimates the polar by the
/// mass-weighted direction average on B(x,r), cuts off with a smooth radial
/// profile on the zoomed ball, decomposes with the polar frame and tabulates
/// the bad-part, divergence and defect ratios.
RatioScan singular_ratio_scan(const MatrixGridMeasure& T, const Vec& x,
                              const std::vector<double>& scales, const AnalyzerConfig& cfg);

} // namespace gmtlab

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gmtlab/fragment.hpp"
#include "gmtlab/grid.hpp"

namespace gmtlab {

/// Finite weighted family of fragments with per-entry density profiles; the
/// discrete stand-in for a measure on curve fragments. Two entries may share
/// a fragment with different profiles.
struct FamilyEntry {
    double weight = 1.0;
    Fragment fragment;
    PiecewiseLinear profile = PiecewiseLinear::constant(1.0);
};

struct FragmentFamily {
    std::vector<FamilyEntry> entries;
    LipschitzMap phi = LipschitzMap::identity(2);

    void validate() const;
};

struct DefectParams {
    double eps = 0.1;   // in (0, 1/2)
    double R = 0.1;     // > 0
    double delta = 1.0;

    double R0() const { return delta * R / 5.0; }

    void validate() const {
        if (!(eps > 0.0 && eps < 0.5)) throw parameter_error("defect eps must be in (0, 1/2)");
        if (!(R > 0.0)) throw parameter_error("defect R must be positive");
        if (!(delta > 0.0 && delta <= 1.0)) throw parameter_error("delta must be in (0,1]");
    }
};

/// Scalar disintegration: sum_j w_j (gamma_j)_#(f_j H^1) rasterized onto the
/// grid. Profiles must be nonnegative; pushforward sampling steps are at most
/// half a cell width, profile integrals are exact on each step.
/// With `times_phi_speed`, each profile is multiplied by |(phi∘gamma_j)'|.
ScalarGridMeasure disintegrate(const FragmentFamily& fam, const Grid& grid,
                               bool times_phi_speed = false);

/// Vector disintegration sum_j w_j (gamma_j)_#(f_j gamma_j' H^1); profiles may
/// be signed.
VectorGridMeasure disintegrate_vector(const FragmentFamily& fam, const Grid& grid);

/// Exact total mass sum_j w_j * integral(f_j over dom gamma_j), the equality
/// case for nonnegative profiles.
double family_mass(const FragmentFamily& fam, bool times_phi_speed = false);

struct DisintegrationDivergence {
    VectorGridMeasure vector_measure;
    double div_tv_spectral = 0.0;  // grid-differentiated; inflates on under-resolved deposits
    double div_tv_exact = 0.0;     // from the pushforward identity Div = -gamma_#(f' H^1)
    ScalarGridMeasure budget_measure;  // F(|d_t f|, gamma, P)
    double budget_tv = 0.0;
    bool within_budget = false;  // div_tv_exact <= budget_tv + tolerance
};

/// Divergence bound for a family of full curves with profiles compactly
/// supported in (0,1): the vector measure F(f Dgamma, gamma, P), its
/// divergence total variation (spectral and exact routes) and the
/// integration-by-parts budget F(|d_t f|, gamma, P).
DisintegrationDivergence divergence_of_disintegration(const FragmentFamily& fam, const Grid& grid);

/// Defect measure: disintegration with each profile multiplied by the
/// indicator of dom gamma_j minus its density-good set at (eps, R).
ScalarGridMeasure defect_measure(const FragmentFamily& fam, const Grid& grid, double eps, double R,
                                 bool times_phi_speed = false);
inline ScalarGridMeasure defect_measure(const FragmentFamily& fam, const Grid& grid,
                                        const DefectParams& params,
                                        bool times_phi_speed = false) {
    params.validate();
    return defect_measure(fam, grid, params.eps, params.R, times_phi_speed);
}

struct ConeCoverReport {
    std::vector<Vec> directions;
    double cover_radius_angle = 0.0;   // beta(eps/2)
    double needed_angle = 0.0;         // beta(theta + alpha/2)
    double allowed_angle = 0.0;        // beta(theta + alpha)
    std::size_t cardinality = 0;
};

struct ConeCoverResult {
    ConeCoverReport report;
    std::vector<FragmentFamily> classes;  // one per direction
    FragmentFamily unclassified;
};

/// Constructs unit vectors {w_k} with C(e, theta + alpha/2) inside the union
/// of C(w_k, eps/2) inside C(e, theta + alpha), then classifies each fragment
/// by the first cone containing all its breakpoint-pair direction vectors.
ConeCoverResult cone_cover_refine(const FragmentFamily& fam, const ConeSpec& base, double alpha,
                                  double eps);

/// Layer-cake refinement: quantizes the cell-wise ratio of mu_target to the
/// family's disintegration into at most `max_levels` levels and restricts
/// fragments to super-level sets with level weights.
FragmentFamily layer_cake_refine(const ScalarGridMeasure& mu_target, const FragmentFamily& fam,
                                 int max_levels = 64);

struct EstimateReport {
    Vec x{};
    double r = 0.0, eps = 0.0, delta = 0.0, R = 0.0;
    double lhs1 = 0.0, rhs1 = 0.0;
    double lhs2 = 0.0, rhs2 = 0.0;
    bool pass1 = false, pass2 = false;
    double mu_ball_3r = 0.0;
    double nu_ball_2r = 0.0;
    std::size_t members = 0;  // fragments meeting the good set inside B(x,2r)
    /// row measure F(psi~ Dgamma~, gamma~, P) for the PDE assembly
    VectorGridMeasure extension_row;
    /// curve-built phi_#(psi mu), the localized measure fed to the PDE step
    ScalarGridMeasure localized_mu;
    /// signed cell field of Div(extension_row) from the pushforward identity
    std::vector<double> extension_div_field;
    double extension_div_tv = 0.0;
};

/// The localized extension estimates for one family in Gamma(phi, e, eps,
/// delta): builds extended curves and cutoff profiles, forms both sides of
/// the comparison and variation inequalities (constant 48 on the comparison
/// side) and reports pass/fail. Requires r < delta R / 12.
EstimateReport localized_estimates(const FragmentFamily& fam, const Vec& e, const Grid& grid,
                                   const CutoffSpec& cut, double eps, double delta, double R,
                                   double refine_step = 0.0);

// --- newline-delimited JSON serialization ---

std::string fragment_to_json(const Fragment& f);
Fragment fragment_from_json(const std::string& line);
std::string family_to_ndjson(const FragmentFamily& fam);
FragmentFamily family_from_ndjson(const std::string& text, const LipschitzMap& phi);

} // namespace gmtlab

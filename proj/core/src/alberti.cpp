#include "gmtlab/alberti.hpp"

#include <algorithm>
#include <map>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "gmtlab/spectral.hpp"

namespace gmtlab {

namespace {
constexpr double two_pi = 6.283185307179586476925286766559;
}

void FragmentFamily::validate() const {
    for (const auto& e : entries) {
        if (e.weight < 0.0) throw parameter_error("family weight must be nonnegative");
        if (e.fragment.empty()) throw parameter_error("family contains the empty fragment");
        if (e.profile.t.size() < 2) throw parameter_error("family profile needs breakpoints");
    }
}

namespace {

enum class DepositMode { scalar, tangent, fixed_direction };

struct DepositOpts {
    DepositMode mode = DepositMode::scalar;
    Vec direction{};                      // fixed_direction mode
    const LipschitzMap* push = nullptr;   // deposit at phi(gamma(t)) instead of gamma(t)
    const LipschitzMap* speed_phi = nullptr;  // multiply by |(phi∘gamma)'| per piece
    const IntervalUnion* restrict_to = nullptr;
    bool use_profile_derivative = false;  // deposit f' (signed) instead of f
    bool abs_derivative = false;          // deposit |f'|
};

/// Parameter cuts where the deposited path p(t) = p0 + (t - t0) s crosses a
/// cell boundary of the grid; the span between consecutive cuts lies in one
/// cell, so the rasterized pushforward is exact.
void cell_crossing_cuts(std::vector<double>& cuts, const Grid& grid, double t0, double t1,
                        const Vec& p0, const Vec& p1) {
    Vec s = scale(sub(p1, p0), 1.0 / (t1 - t0));
    for (int ax = 0; ax < grid.n; ++ax) {
        if (s[ax] == 0.0) continue;
        double xlo = std::min(p0[ax], p1[ax]);
        double xhi = std::max(p0[ax], p1[ax]);
        long kmin = static_cast<long>(std::floor((xlo - grid.origin[ax]) / grid.h()));
        long kmax = static_cast<long>(std::floor((xhi - grid.origin[ax]) / grid.h())) + 1;
        for (long k = kmin; k <= kmax; ++k) {
            double xc = grid.origin[ax] + static_cast<double>(k) * grid.h();
            double t = t0 + (xc - p0[ax]) / s[ax];
            if (t > t0 && t < t1) cuts.push_back(t);
        }
    }
}

/// One entry's pushforward as point masses, split at profile breakpoints and
/// at the cell crossings of the deposit path, so both the profile integral
/// and the cell assignment are exact.
void deposit_entry(PointMassList& out, const Grid& grid, const Fragment& curve,
                   const PiecewiseLinear& profile, double weight, const DepositOpts& opt) {
    if (weight == 0.0) return;
    // regions where the profile vanishes contribute nothing in either mode
    IntervalUnion active = profile.support();
    if (opt.restrict_to) active = active.intersect(*opt.restrict_to);
    if (active.empty()) return;
    for (const auto& piece : curve.linear_pieces()) {
        IntervalUnion sub = active.intersect_interval(piece.t0, piece.t1);
        if (sub.empty()) continue;
        Vec slope = piece.slope();
        double speed = 1.0;
        if (opt.speed_phi) speed = norm(opt.speed_phi->apply_linear(slope));
        Vec target_slope = opt.push ? opt.push->apply_linear(slope) : slope;
        Vec q0 = opt.push ? opt.push->apply(piece.v0) : piece.v0;
        Vec q1 = opt.push ? opt.push->apply(piece.v1) : piece.v1;
        const double plen = piece.t1 - piece.t0;
        for (const auto& [sa, sb] : sub.pieces()) {
            if (sb <= sa) continue;
            Vec qa = lerp(q0, q1, (sa - piece.t0) / plen);
            Vec qb = lerp(q0, q1, (sb - piece.t0) / plen);
            // refine by the profile's breakpoints so it is linear on each span
            std::vector<double> nodes{sa, sb};
            for (double bt : profile.t)
                if (bt > sa && bt < sb) nodes.push_back(bt);
            cell_crossing_cuts(nodes, grid, sa, sb, qa, qb);
            std::sort(nodes.begin(), nodes.end());
            nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
            for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
                double l = nodes[i], h = nodes[i + 1];
                if (h <= l) continue;
                double amount;
                if (opt.use_profile_derivative) {
                    double df = (profile.eval(h) - profile.eval(l)) / (h - l);
                    amount = opt.abs_derivative ? std::abs(df) * (h - l) : df * (h - l);
                } else {
                    amount = 0.5 * (profile.eval(l) + profile.eval(h)) * (h - l);
                }
                amount *= weight;
                if (amount == 0.0) continue;
                double tm = 0.5 * (l + h);
                Vec pos = lerp(q0, q1, (tm - piece.t0) / plen);
                PointMass pm;
                pm.position = pos;
                switch (opt.mode) {
                    case DepositMode::scalar:
                        pm.weight = amount * speed;
                        break;
                    case DepositMode::tangent:
                        pm.weight = std::abs(amount);
                        pm.payload = scale(target_slope, amount);
                        break;
                    case DepositMode::fixed_direction:
                        pm.weight = std::abs(amount) * speed;
                        pm.payload = scale(opt.direction, amount * speed);
                        break;
                }
                out.push_back(pm);
            }
        }
    }
    // isolated points carry no H^1 mass
}

void accumulate_scalar(std::vector<double>& field, const Grid& grid, const PointMassList& pts) {
    for (const auto& p : pts) {
        auto c = grid.cell_of(p.position);
        if (!c) throw input_error("disintegration deposit outside the grid box");
        field[*c] += p.weight;
    }
}

VectorGridMeasure accumulate_vector(const Grid& grid, const PointMassList& pts) {
    VectorGridMeasure v(grid);
    for (const auto& p : pts) {
        auto c = grid.cell_of(p.position);
        if (!c) throw input_error("disintegration deposit outside the grid box");
        if (p.payload)
            for (int i = 0; i < grid.n; ++i) v.comp[*c * grid.n + i] += (*p.payload)[i];
    }
    return v;
}

} // namespace

ScalarGridMeasure disintegrate(const FragmentFamily& fam, const Grid& grid,
                               bool times_phi_speed) {
    fam.validate();
    PointMassList pts;
    for (const auto& e : fam.entries) {
        for (double v : e.profile.v)
            if (v < -1e-12)
                throw parameter_error("scalar disintegration requires nonnegative profiles");
        DepositOpts opt;
        opt.mode = DepositMode::scalar;
        if (times_phi_speed) opt.speed_phi = &fam.phi;
        deposit_entry(pts, grid, e.fragment, e.profile, e.weight, opt);
    }
    for (auto& p : pts) p.weight = std::max(p.weight, 0.0);
    return rasterize_scalar(pts, grid);
}

VectorGridMeasure disintegrate_vector(const FragmentFamily& fam, const Grid& grid) {
    fam.validate();
    PointMassList pts;
    for (const auto& e : fam.entries) {
        DepositOpts opt;
        opt.mode = DepositMode::tangent;
        deposit_entry(pts, grid, e.fragment, e.profile, e.weight, opt);
    }
    return accumulate_vector(grid, pts);
}

double family_mass(const FragmentFamily& fam, bool times_phi_speed) {
    double s = 0.0;
    for (const auto& e : fam.entries) {
        if (!times_phi_speed) {
            s += e.weight * e.profile.integral_over(e.fragment.domain());
            continue;
        }
        for (const auto& piece : e.fragment.linear_pieces()) {
            double speed = norm(fam.phi.apply_linear(piece.slope()));
            IntervalUnion span({{piece.t0, piece.t1}});
            s += e.weight * speed * e.profile.integral_over(span);
        }
    }
    return s;
}

DisintegrationDivergence divergence_of_disintegration(const FragmentFamily& fam,
                                                      const Grid& grid) {
    fam.validate();
    for (const auto& e : fam.entries) {
        const auto& dom = e.fragment.domain();
        if (dom.pieces().size() != 1 || dom.inf() != 0.0 || dom.sup() != 1.0)
            throw precondition_error("full-domain", "divergence bound requires dom = [0,1]");
        IntervalUnion supp = e.profile.support();
        if (!supp.empty() && (supp.inf() <= 0.0 || supp.sup() >= 1.0))
            throw precondition_error("profile-support",
                                     "profile support must be compactly contained in (0,1)");
    }

    DisintegrationDivergence out;
    out.vector_measure = disintegrate_vector(fam, grid);
    {
        auto div = divergence_spectral(out.vector_measure);
        double tv = 0.0;
        for (double v : div) tv += std::abs(v);
        out.div_tv_spectral = tv;
    }
    // exact route via Div(gamma_#(f gamma' H^1)) = -gamma_#(f' H^1)
    {
        PointMassList pts;
        for (const auto& e : fam.entries) {
            DepositOpts opt;
            opt.use_profile_derivative = true;
            deposit_entry(pts, grid, e.fragment, e.profile, e.weight, opt);
        }
        std::vector<double> field(grid.cells(), 0.0);
        accumulate_scalar(field, grid, pts);
        for (double v : field) out.div_tv_exact += std::abs(v);
    }
    {
        PointMassList pts;
        for (const auto& e : fam.entries) {
            DepositOpts opt;
            opt.use_profile_derivative = true;
            opt.abs_derivative = true;
            deposit_entry(pts, grid, e.fragment, e.profile, e.weight, opt);
        }
        out.budget_measure = rasterize_scalar(pts, grid);
        for (const auto& e : fam.entries)
            out.budget_tv += e.weight * e.profile.integral_abs_derivative();
    }
    out.within_budget = out.div_tv_exact <= out.budget_tv * (1.0 + 1e-9) + 1e-12;
    return out;
}

namespace {

/// Families often share one domain across many entries (Fubini lines, Cantor
/// rows); memoize the good set per distinct domain.
class GoodSetMemo {
  public:
    GoodSetMemo(double eps, double R) : eps_(eps), R_(R) {}
    const IntervalUnion& get(const IntervalUnion& domain) {
        auto it = memo_.find(domain.pieces());
        if (it == memo_.end())
            it = memo_.emplace(domain.pieces(), density_good_set(domain, eps_, R_)).first;
        return it->second;
    }

  private:
    double eps_, R_;
    std::map<std::vector<std::pair<double, double>>, IntervalUnion> memo_;
};

} // namespace

ScalarGridMeasure defect_measure(const FragmentFamily& fam, const Grid& grid, double eps, double R,
                                 bool times_phi_speed) {
    fam.validate();
    PointMassList pts;
    GoodSetMemo memo(eps, R);
    for (const auto& e : fam.entries) {
        const IntervalUnion& good = memo.get(e.fragment.domain());
        IntervalUnion bad = e.fragment.domain().subtract(good);
        if (bad.empty()) continue;
        DepositOpts opt;
        opt.mode = DepositMode::scalar;
        if (times_phi_speed) opt.speed_phi = &fam.phi;
        opt.restrict_to = &bad;
        deposit_entry(pts, grid, e.fragment, e.profile, e.weight, opt);
    }
    for (auto& p : pts) p.weight = std::max(p.weight, 0.0);
    return rasterize_scalar(pts, grid);
}

namespace {

// angular radius of C(w,theta): cos(angle) = 1 - theta^2
double cone_angle(double theta) { return std::acos(std::max(-1.0, 1.0 - theta * theta)); }

Vec rotate2(const Vec& e, double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    return vec(c * e[0] - s * e[1], s * e[0] + c * e[1]);
}

bool in_cone(const Vec& v, const Vec& w, double theta) {
    return dot(v, w) >= (1.0 - theta * theta) * norm(v) - 1e-12;
}

std::vector<Vec> cover_directions_2d(const Vec& e, double need, double allowed, double radius) {
    std::vector<Vec> dirs;
    if (need <= radius) {
        dirs.push_back(e);
        return dirs;
    }
    double extent = std::max(0.0, std::min(need - radius, allowed - radius));
    int half = std::max(1, static_cast<int>(std::ceil(extent / (1.9 * radius))));
    for (int k = -half; k <= half; ++k) dirs.push_back(rotate2(e, extent * k / half));
    return dirs;
}

struct Frame3 {
    Vec f1, f2;
};

Frame3 orthoframe(const Vec& e) {
    Vec u = std::abs(e[0]) < 0.9 ? vec(1, 0, 0) : vec(0, 1, 0);
    Vec f1 = sub(u, scale(e, dot(u, e)));
    f1 = scale(f1, 1.0 / norm(f1));
    Vec f2 = vec(e[1] * f1[2] - e[2] * f1[1], e[2] * f1[0] - e[0] * f1[2],
                 e[0] * f1[1] - e[1] * f1[0]);
    return {f1, f2};
}

std::vector<Vec> cover_directions_3d(const Vec& e, double need, double allowed, double radius) {
    if (need <= radius) return {e};
    auto [f1, f2] = orthoframe(e);
    double extent = std::max(0.0, std::min(need, allowed - radius));
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    int count = std::max(8, static_cast<int>(std::ceil(16.0 * (need / radius) * (need / radius))));
    std::vector<Vec> dirs{e};
    for (int k = 0; k < count; ++k) {
        double rho = extent * std::sqrt((k + 0.5) / count);
        double th = two_pi * k / golden;
        Vec t = add(scale(f1, std::cos(th)), scale(f2, std::sin(th)));
        Vec w = add(scale(e, std::cos(rho)), scale(t, std::sin(rho)));
        dirs.push_back(scale(w, 1.0 / norm(w)));
    }
    return dirs;
}

} // namespace

ConeCoverResult cone_cover_refine(const FragmentFamily& fam, const ConeSpec& base, double alpha,
                                  double eps) {
    fam.validate();
    base.validate();
    if (!base.theta) throw parameter_error("cone cover needs the base theta parameter");
    double theta = *base.theta;
    if (!(theta + alpha < 1.0)) throw parameter_error("cone cover requires theta + alpha < 1");
    if (!(eps > 0.0 && eps < alpha)) throw parameter_error("cone cover requires 0 < eps < alpha");

    const int n = fam.phi.n;
    ConeCoverResult out;
    out.report.needed_angle = cone_angle(theta + alpha / 2.0);
    out.report.allowed_angle = cone_angle(theta + alpha);
    out.report.cover_radius_angle = cone_angle(eps / 2.0);

    auto dirs = n == 2 ? cover_directions_2d(base.e, out.report.needed_angle,
                                             out.report.allowed_angle,
                                             out.report.cover_radius_angle)
                       : cover_directions_3d(base.e, out.report.needed_angle,
                                             out.report.allowed_angle,
                                             out.report.cover_radius_angle);

    // verify both cover inclusions on a deterministic sample
    const int verify_samples = 4096;
    for (int k = 0; k < verify_samples; ++k) {
        Vec v;
        if (n == 2) {
            double a = out.report.needed_angle * (2.0 * k / (verify_samples - 1.0) - 1.0);
            v = rotate2(base.e, a);
        } else {
            double a = out.report.needed_angle * std::sqrt((k + 0.5) / verify_samples);
            double th = two_pi * k * 0.6180339887498949;
            auto [f1, f2] = orthoframe(base.e);
            Vec t = add(scale(f1, std::cos(th)), scale(f2, std::sin(th)));
            v = add(scale(base.e, std::cos(a)), scale(t, std::sin(a)));
        }
        bool covered = false;
        for (const auto& w : dirs)
            if (in_cone(v, w, eps / 2.0)) {
                covered = true;
                break;
            }
        if (!covered) {
            std::ostringstream os;
            os << "cone cover misses direction (" << v[0] << "," << v[1] << "," << v[2] << ")";
            throw input_error(os.str());
        }
    }
    for (const auto& w : dirs) {
        double wa = std::acos(std::min(1.0, std::max(-1.0, dot(w, base.e))));
        if (wa + out.report.cover_radius_angle > out.report.allowed_angle + 1e-9) {
            std::ostringstream os;
            os << "cone cover direction escapes the outer cone (angle " << wa << ")";
            throw input_error(os.str());
        }
    }

    out.report.directions = dirs;
    out.report.cardinality = dirs.size();
    out.classes.assign(dirs.size(), FragmentFamily{{}, fam.phi});
    out.unclassified.phi = fam.phi;

    for (const auto& entry : fam.entries) {
        const auto& ts = entry.fragment.breakpoints();
        std::vector<Vec> img(ts.size());
        for (std::size_t i = 0; i < ts.size(); ++i)
            img[i] = fam.phi.apply(entry.fragment.values()[i]);
        int assigned = -1;
        for (std::size_t k = 0; k < dirs.size() && assigned < 0; ++k) {
            bool all = true;
            for (std::size_t i = 0; i < ts.size() && all; ++i)
                for (std::size_t j = i + 1; j < ts.size() && all; ++j) {
                    Vec d = sub(img[j], img[i]);
                    if (norm(d) == 0.0) continue;
                    if (!in_cone(d, dirs[k], eps / 2.0)) all = false;
                }
            if (all) assigned = static_cast<int>(k);
        }
        if (assigned >= 0)
            out.classes[static_cast<std::size_t>(assigned)].entries.push_back(entry);
        else
            out.unclassified.entries.push_back(entry);
    }
    return out;
}

namespace {

/// Partition of a linear piece by grid-cell crossings: (t-span, cell) pairs.
std::vector<std::pair<std::pair<double, double>, std::size_t>> cell_spans(
    const Fragment::Piece& piece, const Grid& grid) {
    std::vector<double> cuts{piece.t0, piece.t1};
    Vec s = piece.slope();
    for (int ax = 0; ax < grid.n; ++ax) {
        if (s[ax] == 0.0) continue;
        double xlo = std::min(piece.v0[ax], piece.v1[ax]);
        double xhi = std::max(piece.v0[ax], piece.v1[ax]);
        long kmin = static_cast<long>(std::floor((xlo - grid.origin[ax]) / grid.h()));
        long kmax = static_cast<long>(std::floor((xhi - grid.origin[ax]) / grid.h())) + 1;
        for (long k = kmin; k <= kmax; ++k) {
            double xc = grid.origin[ax] + static_cast<double>(k) * grid.h();
            double t = piece.t0 + (xc - piece.v0[ax]) / s[ax];
            if (t > piece.t0 && t < piece.t1) cuts.push_back(t);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<std::pair<std::pair<double, double>, std::size_t>> spans;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double tm = 0.5 * (cuts[i] + cuts[i + 1]);
        Vec p = lerp(piece.v0, piece.v1, (tm - piece.t0) / (piece.t1 - piece.t0));
        auto c = grid.cell_of(p);
        if (c) spans.push_back({{cuts[i], cuts[i + 1]}, *c});
    }
    return spans;
}

} // namespace

FragmentFamily layer_cake_refine(const ScalarGridMeasure& mu_target, const FragmentFamily& fam,
                                 int max_levels) {
    fam.validate();
    const Grid& grid = mu_target.grid;
    ScalarGridMeasure base = disintegrate(fam, grid);
    const double target_tv = mu_target.total_variation();

    std::vector<double> ratio(grid.cells(), 0.0);
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        if (base.mass[c] <= 0.0) {
            if (mu_target.mass[c] > 1e-12 * std::max(target_tv, 1.0)) {
                Vec p = grid.cell_center(c);
                std::ostringstream os;
                os << "target is not absolutely continuous w.r.t. the disintegration at cell ("
                   << p[0] << "," << p[1] << ")";
                throw input_error(os.str());
            }
            continue;
        }
        ratio[c] = mu_target.mass[c] / base.mass[c];
    }

    std::vector<double> distinct;
    for (std::size_t c = 0; c < grid.cells(); ++c)
        if (base.mass[c] > 0.0 && ratio[c] > 0.0) distinct.push_back(ratio[c]);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end(),
                               [](double a, double b) { return std::abs(a - b) <= 1e-12 * b; }),
                   distinct.end());
    if (distinct.empty()) return FragmentFamily{{}, fam.phi};

    std::vector<double> quantized = ratio;
    std::vector<double> levels;
    if (static_cast<int>(distinct.size()) <= max_levels) {
        levels = distinct;
    } else {
        double lo = distinct.front(), hi = distinct.back();
        double width = (hi - lo) / max_levels;
        for (int i = 0; i < max_levels; ++i) levels.push_back(lo + (i + 0.5) * width);
        for (auto& v : quantized) {
            if (v <= 0.0) continue;
            int bin =
                std::min(max_levels - 1, std::max(0, static_cast<int>((v - lo) / width)));
            v = levels[static_cast<std::size_t>(bin)];
        }
    }

    FragmentFamily refined;
    refined.phi = fam.phi;
    double prev = 0.0;
    for (double lam : levels) {
        double layer_weight = lam - prev;
        prev = lam;
        for (const auto& entry : fam.entries) {
            std::vector<std::pair<double, double>> keep;
            for (const auto& piece : entry.fragment.linear_pieces()) {
                for (const auto& [span, cell] : cell_spans(piece, grid)) {
                    if (base.mass[cell] > 0.0 && quantized[cell] >= lam - 1e-15)
                        keep.push_back(span);
                }
            }
            for (double t : entry.fragment.isolated_points()) {
                auto c = grid.cell_of(entry.fragment.eval(t));
                if (c && base.mass[*c] > 0.0 && quantized[*c] >= lam - 1e-15)
                    keep.push_back({t, t});
            }
            if (keep.empty()) continue;
            Fragment restricted =
                restrict_fragment(entry.fragment, IntervalUnion(std::move(keep)));
            if (restricted.empty()) continue;
            refined.entries.push_back(
                {entry.weight * layer_weight, std::move(restricted), entry.profile});
        }
    }
    return refined;
}

EstimateReport localized_estimates(const FragmentFamily& fam, const Vec& e, const Grid& grid,
                                   const CutoffSpec& cut, double eps, double delta, double R,
                                   double refine_step) {
    fam.validate();
    const double r = cut.r;
    if (!(r < delta * R / 12.0))
        throw precondition_error("zoom-radius", "localized estimates require r < delta R / 12");
    if (refine_step <= 0.0) refine_step = r / 8.0;

    EstimateReport rep;
    rep.x = cut.x;
    rep.r = r;
    rep.eps = eps;
    rep.delta = delta;
    rep.R = R;
    rep.extension_row = VectorGridMeasure(grid);
    rep.localized_mu = ScalarGridMeasure(grid);
    rep.extension_div_field.assign(grid.cells(), 0.0);
    rep.pass1 = rep.pass2 = true;
    if (fam.entries.empty()) return rep;

    ConeSpec cone;
    cone.e = e;
    cone.eps = eps;
    cone.delta = delta;
    for (const auto& entry : fam.entries) {
        auto membership = cone_membership(entry.fragment, fam.phi, cone);
        if (membership.cls != ConeClass::full) {
            std::ostringstream os;
            os << "family member not in Gamma(phi,e,eps,delta); violated "
               << (membership.violated ? membership.violated : "?");
            if (membership.witness)
                os << " at (" << membership.witness->first << "," << membership.witness->second
                   << ")";
            throw precondition_error("cone-membership", os.str());
        }
    }

    PointMassList diff_pts;    // e phi_#(psi mu) - F(psi~ Dgamma~, gamma~, P)
    PointMassList row_pts;     // F(psi~ Dgamma~, gamma~, P)
    PointMassList mu_loc_pts;  // phi_#(psi mu)
    PointMassList div_pts;     // signed divergence deposits of the extension row
    double lhs2_mass = 0.0;
    double mu_b3r = 0.0, nu_b2r = 0.0;

    GoodSetMemo memo(eps, R);
    for (const auto& entry : fam.entries) {
        const Fragment& g = entry.fragment;
        const IntervalUnion& good = memo.get(g.domain());
        IntervalUnion near2r = g.ball_preimage(cut.x, 2.0 * r);
        bool member = !good.intersect(near2r).empty();

        PiecewiseLinear psi_prof = extend_cutoff(g, cut, refine_step);

        // phi_#(psi mu) over all entries (profile psi∘gamma, speed-weighted)
        {
            DepositOpts opt;
            opt.mode = DepositMode::scalar;
            opt.speed_phi = &fam.phi;
            opt.push = &fam.phi;
            deposit_entry(mu_loc_pts, grid, g, psi_prof, entry.weight, opt);
        }
        {
            DepositOpts opt;
            opt.mode = DepositMode::fixed_direction;
            opt.direction = e;
            opt.speed_phi = &fam.phi;
            opt.push = &fam.phi;
            deposit_entry(diff_pts, grid, g, psi_prof, entry.weight, opt);
        }

        // exact curve-side ball masses
        {
            IntervalUnion in3r = g.ball_preimage(cut.x, 3.0 * r);
            IntervalUnion bad = g.domain().subtract(good);
            for (const auto& piece : g.linear_pieces()) {
                double speed = norm(fam.phi.apply_linear(piece.slope()));
                mu_b3r += entry.weight * speed * in3r.measure_within(piece.t0, piece.t1);
                nu_b2r += entry.weight * speed *
                          bad.intersect(near2r).measure_within(piece.t0, piece.t1);
            }
        }

        if (!member) continue;
        ++rep.members;

        FullCurve ext = extend_curve(g, fam.phi, e);

        PointMassList tangent_pts;
        {
            DepositOpts opt;
            opt.mode = DepositMode::tangent;
            deposit_entry(tangent_pts, grid, ext, psi_prof, entry.weight, opt);
        }
        for (const auto& pm : tangent_pts) {
            row_pts.push_back(pm);
            PointMass neg = pm;
            if (neg.payload) *neg.payload = scale(*neg.payload, -1.0);
            diff_pts.push_back(neg);
        }
        {
            DepositOpts opt;
            opt.use_profile_derivative = true;
            deposit_entry(div_pts, grid, ext, psi_prof, entry.weight, opt);
            // boundary atoms of Div(gamma~_#(psi~ gamma~' H^1)) when the
            // profile does not vanish at the endpoints
            double f0 = psi_prof.eval(0.0), f1 = psi_prof.eval(1.0);
            if (f0 != 0.0) div_pts.push_back({ext.eval(0.0), entry.weight * f0, std::nullopt});
            if (f1 != 0.0) div_pts.push_back({ext.eval(1.0), -entry.weight * f1, std::nullopt});
        }
        lhs2_mass += entry.weight * psi_prof.integral_abs_derivative();
    }

    VectorGridMeasure diff = accumulate_vector(grid, diff_pts);
    rep.extension_row = accumulate_vector(grid, row_pts);
    accumulate_scalar(rep.localized_mu.mass, grid, mu_loc_pts);
    for (double& v : rep.localized_mu.mass) v = std::max(v, 0.0);
    accumulate_scalar(rep.extension_div_field, grid, div_pts);
    for (double v : rep.extension_div_field) rep.extension_div_tv += std::abs(v);

    rep.mu_ball_3r = mu_b3r;
    rep.nu_ball_2r = nu_b2r;
    rep.lhs1 = diff.total_variation();
    rep.rhs1 = 48.0 * eps / (delta * delta) * mu_b3r + 2.0 * nu_b2r;
    rep.lhs2 = r * lhs2_mass;
    rep.rhs2 = 12.0 / (delta * delta) * mu_b3r;
    const double tol = 1e-12 + 1e-9 * std::max(rep.rhs1, 1.0);
    rep.pass1 = rep.lhs1 <= rep.rhs1 + tol;
    rep.pass2 = rep.lhs2 <= rep.rhs2 + tol;
    return rep;
}

// --- serialization ---

std::string fragment_to_json(const Fragment& f) {
    nlohmann::ordered_json j;
    j["dim"] = f.dim();
    nlohmann::json dom = nlohmann::json::array();
    for (const auto& [a, b] : f.domain().pieces()) dom.push_back({a, b});
    j["domain"] = dom;
    j["breakpoints"] = f.breakpoints();
    nlohmann::json vals = nlohmann::json::array();
    for (const auto& v : f.values()) {
        std::vector<double> row(v.begin(), v.begin() + f.dim());
        vals.push_back(row);
    }
    j["values"] = vals;
    return j.dump();
}

Fragment fragment_from_json(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    int dim = j.at("dim").get<int>();
    std::vector<std::pair<double, double>> dom;
    for (const auto& iv : j.at("domain")) dom.push_back({iv[0].get<double>(), iv[1].get<double>()});
    std::vector<double> ts = j.at("breakpoints").get<std::vector<double>>();
    std::vector<Vec> vals;
    for (const auto& row : j.at("values")) {
        Vec v{};
        for (std::size_t i = 0; i < row.size() && i < 3; ++i) v[i] = row[i].get<double>();
        vals.push_back(v);
    }
    return Fragment(dim, IntervalUnion(std::move(dom)), std::move(ts), std::move(vals));
}

std::string family_to_ndjson(const FragmentFamily& fam) {
    std::ostringstream os;
    for (const auto& e : fam.entries) {
        nlohmann::ordered_json j;
        j["weight"] = e.weight;
        j["fragment"] = nlohmann::json::parse(fragment_to_json(e.fragment));
        j["profile"] = {{"t", e.profile.t}, {"v", e.profile.v}};
        os << j.dump() << '\n';
    }
    return os.str();
}

FragmentFamily family_from_ndjson(const std::string& text, const LipschitzMap& phi) {
    FragmentFamily fam;
    fam.phi = phi;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        FamilyEntry e;
        e.weight = j.at("weight").get<double>();
        e.fragment = fragment_from_json(j.at("fragment").dump());
        e.profile.t = j.at("profile").at("t").get<std::vector<double>>();
        e.profile.v = j.at("profile").at("v").get<std::vector<double>>();
        fam.entries.push_back(std::move(e));
    }
    return fam;
}

} // namespace gmtlab

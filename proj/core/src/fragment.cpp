#include "gmtlab/fragment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gmtlab {

namespace {
constexpr double kLipTol = 1e-9;
constexpr double kIneqTol = 1e-12;
} // namespace

double PiecewiseLinear::eval(double s) const {
    if (t.empty()) return 0.0;
    if (s <= t.front()) return v.front();
    if (s >= t.back()) return v.back();
    auto it = std::upper_bound(t.begin(), t.end(), s);
    std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
    double w = (s - t[i]) / (t[i + 1] - t[i]);
    return v[i] + w * (v[i + 1] - v[i]);
}

double PiecewiseLinear::integral() const {
    double s = 0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i)
        s += 0.5 * (v[i] + v[i + 1]) * (t[i + 1] - t[i]);
    return s;
}

double PiecewiseLinear::integral_abs_derivative() const {
    double s = 0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) s += std::abs(v[i + 1] - v[i]);
    return s;
}

double PiecewiseLinear::integral_over(const IntervalUnion& K) const {
    double s = 0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        double a = t[i], b = t[i + 1];
        if (b <= a) continue;
        for (const auto& [lo, hi] : K.pieces()) {
            double l = std::max(a, lo), h = std::min(b, hi);
            if (h <= l) continue;
            double va = eval(l), vb = eval(h);
            s += 0.5 * (va + vb) * (h - l);
        }
    }
    return s;
}

IntervalUnion PiecewiseLinear::support() const {
    std::vector<std::pair<double, double>> pieces;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        // linear on the piece: identically zero iff both endpoint values are
        if (v[i] != 0.0 || v[i + 1] != 0.0) pieces.push_back({t[i], t[i + 1]});
    }
    return IntervalUnion(std::move(pieces));
}

bool PiecewiseLinear::is_zero() const {
    for (double x : v)
        if (x != 0.0) return false;
    return true;
}

PiecewiseLinear PiecewiseLinear::zero() { return {{0.0, 1.0}, {0.0, 0.0}}; }
PiecewiseLinear PiecewiseLinear::constant(double c) { return {{0.0, 1.0}, {c, c}}; }

Fragment::Fragment(int dim, IntervalUnion domain, std::vector<double> ts, std::vector<Vec> values)
    : dim_(dim), domain_(std::move(domain)), ts_(std::move(ts)), values_(std::move(values)) {
    if (dim_ < 1 || dim_ > 3) throw parameter_error("fragment dimension must be 1..3");
    if (ts_.size() != values_.size()) throw parameter_error("fragment breakpoint arrays mismatch");
    for (std::size_t i = 1; i < ts_.size(); ++i)
        if (ts_[i] <= ts_[i - 1]) throw parameter_error("fragment breakpoints must increase");
    for (double t : ts_)
        if (!domain_.contains(t)) throw parameter_error("fragment breakpoint outside its domain");
    for (double e : domain_.endpoints()) {
        if (!std::binary_search(ts_.begin(), ts_.end(), e))
            throw parameter_error("fragment domain endpoint missing from breakpoints");
    }
    for (std::size_t i = 0; i < ts_.size(); ++i)
        for (std::size_t j = i + 1; j < ts_.size(); ++j) {
            if (dist(values_[i], values_[j]) > (ts_[j] - ts_[i]) + kLipTol)
                throw parameter_error("fragment violates the 1-Lipschitz invariant");
        }
}

Fragment Fragment::linear(int dim, IntervalUnion domain, Vec start, Vec velocity, double t0) {
    if (norm(velocity) > 1.0 + kLipTol) throw parameter_error("fragment velocity exceeds 1");
    std::vector<double> ts = domain.endpoints();
    std::vector<Vec> vals;
    vals.reserve(ts.size());
    for (double t : ts) vals.push_back(add(start, scale(velocity, t - t0)));
    return Fragment(dim, std::move(domain), std::move(ts), std::move(vals));
}

Vec Fragment::eval(double t) const {
    if (!domain_.contains(t)) throw parameter_error("fragment evaluated outside its domain");
    auto it = std::upper_bound(ts_.begin(), ts_.end(), t);
    if (it == ts_.begin()) return values_.front();
    std::size_t i = static_cast<std::size_t>(it - ts_.begin()) - 1;
    if (ts_[i] == t || i + 1 >= ts_.size()) return values_[i];
    double w = (t - ts_[i]) / (ts_[i + 1] - ts_[i]);
    return lerp(values_[i], values_[i + 1], w);
}

Vec Fragment::Piece::slope() const {
    return scale(sub(v1, v0), 1.0 / (t1 - t0));
}

std::vector<Fragment::Piece> Fragment::linear_pieces() const {
    std::vector<Piece> out;
    for (std::size_t i = 0; i + 1 < ts_.size(); ++i) {
        // consecutive breakpoints either share a domain piece or span a gap;
        // gaps have positive length, so the midpoint test separates the cases
        if (domain_.contains(0.5 * (ts_[i] + ts_[i + 1])))
            out.push_back({ts_[i], ts_[i + 1], values_[i], values_[i + 1]});
    }
    return out;
}

std::vector<double> Fragment::isolated_points() const {
    std::vector<double> out;
    for (const auto& [a, b] : domain_.pieces())
        if (a == b) out.push_back(a);
    return out;
}

IntervalUnion Fragment::ball_preimage(const Vec& x, double rho) const {
    std::vector<std::pair<double, double>> hits;
    for (const auto& p : linear_pieces()) {
        Vec d0 = sub(p.v0, x);
        Vec s = p.slope();
        // |d0 + (t - t0) s|^2 <= rho^2
        double a = dot(s, s);
        double b = 2.0 * dot(d0, s);
        double c = dot(d0, d0) - rho * rho;
        if (a <= 1e-300) {
            if (c <= 0.0) hits.push_back({p.t0, p.t1});
            continue;
        }
        double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) continue;
        double sq = std::sqrt(disc);
        double u0 = (-b - sq) / (2.0 * a), u1 = (-b + sq) / (2.0 * a);
        double lo = std::max(p.t0, p.t0 + u0), hi = std::min(p.t1, p.t0 + u1);
        if (hi >= lo) hits.push_back({lo, hi});
    }
    for (double t : isolated_points()) {
        if (dist(eval(t), x) <= rho) hits.push_back({t, t});
    }
    return IntervalUnion(std::move(hits));
}

LipschitzMap LipschitzMap::identity(int dim) {
    LipschitzMap m;
    m.m = m.n = dim;
    for (int i = 0; i < dim; ++i) m.A[static_cast<std::size_t>(i) * dim + i] = 1.0;
    m.norm_bound = 1.0;
    return m;
}

LipschitzMap LipschitzMap::affine(int mm, int nn, const std::array<double, 9>& A, Vec offset) {
    LipschitzMap f;
    f.m = mm;
    f.n = nn;
    f.A = A;
    f.offset = offset;
    Mat sq;  // pad into a 3x3 for the norm check
    sq.n = 3;
    for (int i = 0; i < nn; ++i)
        for (int j = 0; j < mm; ++j) sq(i, j) = A[static_cast<std::size_t>(i) * mm + j];
    f.norm_bound = operator_norm(sq);
    if (f.norm_bound > 1.0 + kLipTol)
        throw parameter_error("Lipschitz map operator norm exceeds 1");
    return f;
}

Vec LipschitzMap::apply_linear(const Vec& x) const {
    Vec r{};
    for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int j = 0; j < m; ++j) s += A[static_cast<std::size_t>(i) * m + j] * x[j];
        r[i] = s;
    }
    return r;
}

Vec LipschitzMap::apply(const Vec& x) const { return add(apply_linear(x), offset); }

void ConeSpec::validate() const {
    if (std::abs(norm(e) - 1.0) > 1e-9) throw parameter_error("cone direction must be a unit vector");
    if (!(eps > 0.0 && eps < 1.0)) throw parameter_error("cone aperture eps must be in (0,1)");
    if (!(delta > 0.0 && delta <= 1.0)) throw parameter_error("speed floor delta must be in (0,1]");
    if (theta && !(*theta > 0.0 && *theta < 1.0))
        throw parameter_error("cone parameter theta must be in (0,1)");
}

double CutoffSpec::psi(const Vec& y) const {
    return std::max(2.0 - dist(y, x) / r, 0.0);
}

namespace {

struct PhiPiece {
    double t0, t1;
    Vec v0, v1;  // phi-image values
};

// degenerate pieces join as zero-length entries so pair logic stays uniform
std::vector<PhiPiece> phi_pieces(const Fragment& g, const LipschitzMap& phi) {
    std::vector<PhiPiece> out;
    for (const auto& p : g.linear_pieces())
        out.push_back({p.t0, p.t1, phi.apply(p.v0), phi.apply(p.v1)});
    for (double t : g.isolated_points()) {
        Vec v = phi.apply(g.eval(t));
        out.push_back({t, t, v, v});
    }
    std::sort(out.begin(), out.end(), [](const PhiPiece& a, const PhiPiece& b) {
        return a.t0 < b.t0;
    });
    return out;
}

Vec phi_at(const PhiPiece& p, double t) {
    if (p.t1 == p.t0) return p.v0;
    return lerp(p.v0, p.v1, (t - p.t0) / (p.t1 - p.t0));
}

double speed_slack(const PhiPiece& P, const PhiPiece& Q, double t1, double t2, double delta) {
    return dist(phi_at(Q, t2), phi_at(P, t1)) - delta * (t2 - t1);
}

/// When the corner difference vectors of the rectangle are mutually parallel
/// with a common orientation and never vanish, the difference field has a
/// constant direction, |diff| is affine in (t1, t2) and corner checks are
/// exact. Straight-line corpora hit this path everywhere.
bool affine_difference_field(const PhiPiece& P, const PhiPiece& Q) {
    const Vec diffs[4] = {sub(Q.v0, P.v0), sub(Q.v0, P.v1), sub(Q.v1, P.v0), sub(Q.v1, P.v1)};
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            double ni = norm(diffs[i]), nj = norm(diffs[j]);
            if (ni == 0.0 || nj == 0.0) return false;
            Vec cr = vec(diffs[i][1] * diffs[j][2] - diffs[i][2] * diffs[j][1],
                         diffs[i][2] * diffs[j][0] - diffs[i][0] * diffs[j][2],
                         diffs[i][0] * diffs[j][1] - diffs[i][1] * diffs[j][0]);
            if (norm(cr) > 1e-12 * ni * nj) return false;
            if (dot(diffs[i], diffs[j]) < 0.0) return false;
        }
    }
    return true;
}

/// Midpoint-subdivision check of the speed inequality on the rectangle
/// [a,b] x [c,d] (t1 in P, t2 in Q, only ordered pairs t1 <= t2 count);
/// returns a violating pair if one is found down to `depth`.
std::optional<std::pair<double, double>> speed_violation(const PhiPiece& P, const PhiPiece& Q,
                                                         double a, double b, double c, double d,
                                                         double delta, int depth) {
    if (d < a) return std::nullopt;  // entirely unordered
    double lo = std::numeric_limits<double>::infinity();
    std::optional<std::pair<double, double>> hit;
    auto probe = [&](double t1, double t2) {
        if (t2 < t1 || hit) return;
        double s = speed_slack(P, Q, t1, t2, delta);
        lo = std::min(lo, s);
        if (s < -kIneqTol) hit = std::make_pair(t1, t2);
    };
    double m1 = 0.5 * (a + b), m2 = 0.5 * (c + d);
    probe(a, c);
    probe(a, d);
    probe(b, c);
    probe(b, d);
    probe(m1, m2);
    if (hit) return hit;
    if (depth == 0) return std::nullopt;
    // the slack is Lipschitz with constant <= 1 + delta <= 2 per axis
    if (lo >= 2.0 * ((b - a) + (d - c))) return std::nullopt;
    for (auto [qa, qb] : {std::pair{a, m1}, std::pair{m1, b}})
        for (auto [qc, qd] : {std::pair{c, m2}, std::pair{m2, d}})
            if (auto w = speed_violation(P, Q, qa, qb, qc, qd, delta, depth - 1)) return w;
    return std::nullopt;
}

} // namespace

ConeMembership cone_membership(const Fragment& g, const LipschitzMap& phi, const ConeSpec& cone) {
    cone.validate();
    if (g.empty()) throw parameter_error("cone membership of the empty fragment");
    ConeMembership res;

    const auto& ts = g.breakpoints();
    std::vector<Vec> img(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) img[i] = phi.apply(g.values()[i]);

    const double dir_factor = 1.0 - cone.eps * cone.eps / 2.0;
    for (std::size_t i = 0; i < ts.size(); ++i)
        for (std::size_t j = i + 1; j < ts.size(); ++j) {
            Vec d = sub(img[j], img[i]);
            if (dot(d, cone.e) < dir_factor * norm(d) - kIneqTol) {
                res.cls = ConeClass::out;
                res.witness = {ts[i], ts[j]};
                res.violated = "direction";
                return res;
            }
        }

    // speed floor: breakpoint pairs first, then the subdivision pass
    auto pieces = phi_pieces(g, phi);
    for (std::size_t i = 0; i < ts.size(); ++i)
        for (std::size_t j = i + 1; j < ts.size(); ++j) {
            if (dist(img[j], img[i]) < cone.delta * (ts[j] - ts[i]) - kIneqTol) {
                res.cls = ConeClass::directional;
                res.witness = {ts[i], ts[j]};
                res.violated = "speed";
                return res;
            }
        }
    for (std::size_t pi = 0; pi < pieces.size(); ++pi)
        for (std::size_t qi = pi; qi < pieces.size(); ++qi) {
            const auto& P = pieces[pi];
            const auto& Q = pieces[qi];
            if (Q.t1 < P.t0) continue;
            if (pi == qi) {
                // within one piece the slack is (|slope| - delta)(t2 - t1)
                if (P.t1 > P.t0 &&
                    dist(P.v1, P.v0) < (cone.delta - kIneqTol) * (P.t1 - P.t0)) {
                    res.cls = ConeClass::directional;
                    res.witness = {P.t0, P.t1};
                    res.violated = "speed";
                    return res;
                }
                continue;
            }
            // corner checks are exact on affine difference fields; the
            // breakpoint-pair loop above already covered the corners
            if (affine_difference_field(P, Q)) continue;
            if (auto w = speed_violation(P, Q, P.t0, P.t1, Q.t0, Q.t1, cone.delta, 6)) {
                res.cls = ConeClass::directional;
                res.witness = *w;
                res.violated = "speed";
                return res;
            }
        }

    res.cls = ConeClass::full;
    return res;
}

bool good_point(const Fragment& g, double eps, double R, double t0) {
    if (!g.domain().contains(t0)) return false;
    return density_good_set(g.domain(), eps, R).contains(t0);
}

FullCurve extend_curve(const Fragment& g, const LipschitzMap& phi, const Vec& e) {
    if (g.empty()) throw parameter_error("extend_curve on the empty fragment");
    const double a = g.domain().inf();
    const double b = g.domain().sup();
    const int n = phi.n;

    std::vector<double> ts;
    std::vector<Vec> vals;
    if (a == b) {
        // singleton rule: straight line through phi(gamma(a)) in direction e
        Vec base = phi.apply(g.eval(a));
        ts = {0.0, 1.0};
        vals = {add(base, scale(e, -a)), add(base, scale(e, 1.0 - a))};
        return Fragment(n, IntervalUnion::full(), std::move(ts), std::move(vals));
    }

    Vec va = phi.apply(g.eval(a));
    Vec vb = phi.apply(g.eval(b));
    auto extrapolate = [&](double t) {
        double w = (t - a) / (b - a);
        return lerp(va, vb, w);
    };

    if (a > 0.0) {
        ts.push_back(0.0);
        vals.push_back(extrapolate(0.0));
    }
    for (std::size_t i = 0; i < g.breakpoints().size(); ++i) {
        ts.push_back(g.breakpoints()[i]);
        vals.push_back(phi.apply(g.values()[i]));
    }
    if (b < 1.0) {
        ts.push_back(1.0);
        vals.push_back(extrapolate(1.0));
    }
    return Fragment(n, IntervalUnion::full(), std::move(ts), std::move(vals));
}

namespace {

void append_point(std::vector<double>& ts, std::vector<double>& vs, double t, double v) {
    if (!ts.empty() && t <= ts.back() + 1e-13) return;  // drop (near-)duplicates
    ts.push_back(t);
    vs.push_back(v);
}

} // namespace

PiecewiseLinear extend_cutoff(const Fragment& g, const CutoffSpec& cut, double refine_step) {
    if (g.empty()) throw parameter_error("extend_cutoff on the empty fragment");
    const double r = cut.r;
    const double a = g.domain().inf();
    const double b = g.domain().sup();

    auto psi_at = [&](double t) { return cut.psi(g.eval(t)); };

    std::vector<double> ts, vs;

    // one-sided tent before a
    double pa = psi_at(a);
    if (a > 0.0) {
        double foot = a - pa * r;
        append_point(ts, vs, 0.0, std::max(0.0, pa - a / r));
        if (foot > 0.0 && foot < a) append_point(ts, vs, foot, 0.0);
    }

    // exact zero crossings of psi∘gamma (the boundary of the 2r ball) keep
    // the sampled profile supported inside the cutoff ball
    IntervalUnion psi_support = g.ball_preimage(cut.x, 2.0 * r);

    // walk domain pieces and gaps in order
    const auto& pieces = g.domain().pieces();
    for (std::size_t pi = 0; pi < pieces.size(); ++pi) {
        auto [lo, hi] = pieces[pi];
        // sample psi∘gamma on [lo,hi] at breakpoints, refined
        std::vector<double> nodes;
        nodes.push_back(lo);
        for (double t : g.breakpoints())
            if (t > lo && t < hi) nodes.push_back(t);
        for (double t : psi_support.endpoints())
            if (t > lo && t < hi) nodes.push_back(t);
        nodes.push_back(hi);
        std::sort(nodes.begin(), nodes.end());
        nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
        std::vector<double> refined;
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
            refined.push_back(nodes[i]);
            if (refine_step > 0.0) {
                int extra = static_cast<int>(std::floor((nodes[i + 1] - nodes[i]) / refine_step));
                for (int k = 1; k <= extra; ++k) {
                    double t = nodes[i] + k * (nodes[i + 1] - nodes[i]) / (extra + 1);
                    refined.push_back(t);
                }
            }
        }
        refined.push_back(nodes.back());
        for (double t : refined) append_point(ts, vs, t, psi_at(t));

        if (pi + 1 < pieces.size()) {
            // gap (hi, next_lo): max of two tents and zero
            double ga = hi, gb = pieces[pi + 1].first;
            double va = psi_at(ga), vb = psi_at(gb);
            auto tentmax = [&](double t) {
                return std::max({0.0, va - (t - ga) / r, vb - (gb - t) / r});
            };
            std::vector<double> cand;
            cand.push_back(ga + va * r);           // left tent hits zero
            cand.push_back(gb - vb * r);           // right tent hits zero
            cand.push_back(0.5 * (ga + gb) + 0.5 * r * (va - vb));  // tents cross
            std::sort(cand.begin(), cand.end());
            for (double t : cand)
                if (t > ga && t < gb) append_point(ts, vs, t, tentmax(t));
        }
    }

    // one-sided tent after b
    double pb = psi_at(b);
    if (b < 1.0) {
        double foot = b + pb * r;
        if (foot < 1.0 && foot > b) append_point(ts, vs, foot, 0.0);
        append_point(ts, vs, 1.0, std::max(0.0, pb - (1.0 - b) / r));
    }

    PiecewiseLinear out;
    out.t = std::move(ts);
    out.v = std::move(vs);
    if (out.t.front() != 0.0) {
        out.t.insert(out.t.begin(), 0.0);
        out.v.insert(out.v.begin(), out.v.front());
    }
    if (out.t.back() != 1.0) {
        out.t.push_back(1.0);
        out.v.push_back(out.v.back());
    }
    return out;
}

BallMassResult fragment_ball_mass(const Fragment& g, const LipschitzMap& phi, const ConeSpec& cone,
                                  const Vec& x, double r, double t0) {
    if (g.empty()) throw parameter_error("fragment_ball_mass on the empty fragment");
    auto membership = cone_membership(g, phi, cone);
    if (membership.cls != ConeClass::full)
        throw precondition_error("cone-membership", "fragment is not in Gamma(phi,e,eps,delta)");
    if (!good_point(g, cone.eps, r, t0))
        throw precondition_error("good-set", "t0 is not a density-good point at scale r");
    if (dist(g.eval(t0), x) > 2.0 * r)
        throw precondition_error("ball-membership", "gamma(t0) is not in B(x,2r)");

    IntervalUnion inball = g.ball_preimage(x, 3.0 * r);
    double mass = 0.0;
    for (const auto& p : g.linear_pieces()) {
        double speed = norm(phi.apply_linear(p.slope()));
        mass += speed * inball.measure_within(p.t0, p.t1);
    }
    BallMassResult res;
    res.mass = mass;
    res.lower_bound = 2.0 * (1.0 - cone.eps) * cone.delta * r;
    res.bound_met = mass >= res.lower_bound - kIneqTol;
    return res;
}

Fragment restrict_fragment(const Fragment& g, const IntervalUnion& K) {
    if (g.empty()) return g;
    IntervalUnion dom = g.domain().intersect(K);
    if (dom.empty()) return Fragment();
    std::vector<double> ts;
    std::vector<Vec> vals;
    std::vector<double> cand = g.breakpoints();
    for (double e : dom.endpoints()) cand.push_back(e);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    for (double t : cand) {
        if (dom.contains(t)) {
            ts.push_back(t);
            vals.push_back(g.eval(t));
        }
    }
    return Fragment(g.dim(), std::move(dom), std::move(ts), std::move(vals));
}

MetricDerivative metric_derivative(const Fragment& g, double t) {
    if (g.empty() || !g.domain().contains(t))
        throw parameter_error("metric derivative outside the fragment domain");
    MetricDerivative md;
    for (const auto& p : g.linear_pieces()) {
        if (t > p.t0 && t < p.t1) {
            md.defined = true;
            md.vector = p.slope();
            md.speed = norm(md.vector);
            return md;
        }
    }
    return md;  // breakpoint, endpoint or isolated point: flagged sentinel
}

} // namespace gmtlab

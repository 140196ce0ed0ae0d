#include "gmtlab/interval.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace gmtlab {

IntervalUnion::IntervalUnion(std::vector<std::pair<double, double>> intervals) {
    for (auto& [a, b] : intervals) {
        if (b < a) throw parameter_error("interval with negative length");
        if (a < 0.0 || b > 1.0) throw parameter_error("interval outside [0,1]");
    }
    std::sort(intervals.begin(), intervals.end());
    for (const auto& iv : intervals) {
        if (!pieces_.empty() && iv.first <= pieces_.back().second) {
            pieces_.back().second = std::max(pieces_.back().second, iv.second);
        } else {
            pieces_.push_back(iv);
        }
    }
}

double IntervalUnion::measure() const {
    double s = 0;
    for (const auto& [a, b] : pieces_) s += b - a;
    return s;
}

bool IntervalUnion::contains(double t) const {
    for (const auto& [a, b] : pieces_) {
        if (t < a) return false;
        if (t <= b) return true;
    }
    return false;
}

double IntervalUnion::inf() const {
    if (empty()) throw parameter_error("empty interval union has no infimum");
    return pieces_.front().first;
}

double IntervalUnion::sup() const {
    if (empty()) throw parameter_error("empty interval union has no supremum");
    return pieces_.back().second;
}

double IntervalUnion::distance(double t) const {
    if (empty()) throw parameter_error("distance to empty interval union");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : pieces_) {
        if (t < a)
            best = std::min(best, a - t);
        else if (t > b)
            best = std::min(best, t - b);
        else
            return 0.0;
    }
    return best;
}

double IntervalUnion::measure_within(double lo, double hi) const {
    if (hi <= lo) return 0.0;
    double s = 0;
    for (const auto& [a, b] : pieces_) {
        double l = std::max(a, lo), h = std::min(b, hi);
        if (h > l) s += h - l;
    }
    return s;
}

IntervalUnion IntervalUnion::intersect(const IntervalUnion& other) const {
    std::vector<std::pair<double, double>> out;
    std::size_t i = 0, j = 0;
    while (i < pieces_.size() && j < other.pieces_.size()) {
        double lo = std::max(pieces_[i].first, other.pieces_[j].first);
        double hi = std::min(pieces_[i].second, other.pieces_[j].second);
        if (lo <= hi) out.push_back({lo, hi});
        if (pieces_[i].second < other.pieces_[j].second)
            ++i;
        else
            ++j;
    }
    return IntervalUnion(std::move(out));
}

IntervalUnion IntervalUnion::intersect_interval(double lo, double hi) const {
    lo = std::max(lo, 0.0);
    hi = std::min(hi, 1.0);
    if (hi < lo) return IntervalUnion();
    return intersect(IntervalUnion({{lo, hi}}));
}

IntervalUnion IntervalUnion::subtract(const IntervalUnion& other) const {
    std::vector<std::pair<double, double>> out;
    for (auto [a, b] : pieces_) {
        double cur = a;
        for (const auto& [c, d] : other.pieces_) {
            if (d < cur) continue;
            if (c > b) break;
            if (c > cur) out.push_back({cur, std::min(c, b)});
            cur = std::max(cur, d);
            if (cur >= b) break;
        }
        if (cur <= b) out.push_back({cur, b});
    }
    return IntervalUnion(std::move(out));
}

std::vector<std::pair<double, double>> IntervalUnion::gaps() const {
    std::vector<std::pair<double, double>> g;
    for (std::size_t i = 1; i < pieces_.size(); ++i)
        g.push_back({pieces_[i - 1].second, pieces_[i].first});
    return g;
}

std::vector<double> IntervalUnion::endpoints() const {
    std::vector<double> e;
    for (const auto& [a, b] : pieces_) {
        e.push_back(a);
        if (b != a) e.push_back(b);
    }
    return e;
}

namespace {

/// sup over x in A of dist(x, B); the maximum lives at piece endpoints of A
/// or at gap midpoints of B that fall inside A.
double directed_hausdorff(const IntervalUnion& A, const IntervalUnion& B) {
    double best = 0.0;
    for (const auto& [a, b] : A.pieces()) {
        best = std::max(best, B.distance(a));
        best = std::max(best, B.distance(b));
    }
    for (const auto& [lo, hi] : B.gaps()) {
        double mid = 0.5 * (lo + hi);
        if (A.contains(mid)) best = std::max(best, B.distance(mid));
    }
    // points of A beyond B's extremes attain their maximum at A's endpoints,
    // already covered above
    return best;
}

} // namespace

double hausdorff_distance(const IntervalUnion& A, const IntervalUnion& B) {
    if (A.empty() || B.empty()) throw parameter_error("Hausdorff distance of an empty set");
    return std::max(directed_hausdorff(A, B), directed_hausdorff(B, A));
}

double hausdorff_distance(const std::vector<std::array<double, 3>>& A,
                          const std::vector<std::array<double, 3>>& B) {
    if (A.empty() || B.empty()) throw parameter_error("Hausdorff distance of an empty set");
    auto d = [](const std::array<double, 3>& x, const std::array<double, 3>& y) {
        double s = 0;
        for (int i = 0; i < 3; ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
        return std::sqrt(s);
    };
    auto directed = [&](const std::vector<std::array<double, 3>>& X,
                        const std::vector<std::array<double, 3>>& Y) {
        double worst = 0.0;
        for (const auto& x : X) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& y : Y) best = std::min(best, d(x, y));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(A, B), directed(B, A));
}

namespace {

struct LinearCondition {
    // value(t) linear on the current slab; gate restricts where it applies
    double gate_lo, gate_hi;
    // evaluation callback index: c-entry condition (endpoint c) or the r=R one
    bool is_radius_R;
    double c = 0.0;
};

double eval_condition(const IntervalUnion& K, double eps, double R, const LinearCondition& cond,
                      double t) {
    if (cond.is_radius_R) return K.measure_within(t - R, t + R) - 2.0 * (1.0 - eps) * R;
    double r = std::abs(t - cond.c);
    return K.measure_within(t - r, t + r) - 2.0 * (1.0 - eps) * r;
}

} // namespace

IntervalUnion density_good_set(const IntervalUnion& K, double eps, double R) {
    if (!(eps > 0.0 && eps < 1.0)) throw parameter_error("density good set: eps in (0,1)");
    if (!(R > 0.0)) throw parameter_error("density good set: R > 0");
    if (K.empty()) return K;

    const auto ends = K.endpoints();

    // slab boundaries where some condition changes slope
    std::vector<double> cuts{0.0, 1.0};
    for (double c : ends) {
        cuts.push_back(c);
        cuts.push_back(c - R);
        cuts.push_back(c + R);
        for (double d : ends) cuts.push_back(0.5 * (c + d));
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::vector<LinearCondition> conds;
    for (double c : ends) conds.push_back({c - R, c + R, false, c});
    conds.push_back({-1.0, 2.0, true, 0.0});

    std::vector<std::pair<double, double>> good;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        double lo = cuts[s], hi = cuts[s + 1];
        if (hi < 0.0 || lo > 1.0 || hi <= lo) continue;
        lo = std::max(lo, 0.0);
        hi = std::min(hi, 1.0);
        double mid = 0.5 * (lo + hi);
        // intersection of per-condition good half-slabs
        double glo = lo, ghi = hi;
        for (const auto& cond : conds) {
            if (mid < cond.gate_lo || mid > cond.gate_hi) continue;
            double vlo = eval_condition(K, eps, R, cond, lo);
            double vhi = eval_condition(K, eps, R, cond, hi);
            if (vlo >= 0.0 && vhi >= 0.0) continue;  // linear on the slab
            if (vlo < 0.0 && vhi < 0.0) {
                glo = 1.0;
                ghi = 0.0;
                break;
            }
            double root = lo + (hi - lo) * (vlo / (vlo - vhi));
            if (vlo < 0.0)
                glo = std::max(glo, root);
            else
                ghi = std::min(ghi, root);
        }
        if (ghi >= glo) good.push_back({glo, ghi});
    }
    return IntervalUnion(std::move(good)).intersect(K);
}

bool density_good_at(const IntervalUnion& K, double eps, double R, double t, int scan_points) {
    if (!K.contains(t)) return false;
    const double tol = 1e-12;
    auto ok = [&](double r) {
        return K.measure_within(t - r, t + r) >= 2.0 * (1.0 - eps) * r - tol;
    };
    for (int i = 1; i <= scan_points; ++i) {
        if (!ok(R * i / scan_points)) return false;
    }
    for (double c : K.endpoints()) {
        double r = std::abs(t - c);
        if (r <= R && !ok(r)) return false;
    }
    return true;
}

} // namespace gmtlab

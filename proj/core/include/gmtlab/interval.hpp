#pragma once

#include <array>
#include <utility>
#include <vector>

#include "gmtlab/errors.hpp"

namespace gmtlab {

/// Sorted union of pairwise-disjoint closed intervals [a,b] in [0,1];
/// degenerate points (a == b) allowed. Construction normalizes: sorts and
/// merges overlapping or touching pieces.
class IntervalUnion {
  public:
    IntervalUnion() = default;
    explicit IntervalUnion(std::vector<std::pair<double, double>> intervals);

    static IntervalUnion full() { return IntervalUnion({{0.0, 1.0}}); }
    static IntervalUnion point(double t) { return IntervalUnion({{t, t}}); }

    const std::vector<std::pair<double, double>>& pieces() const { return pieces_; }
    bool empty() const { return pieces_.empty(); }
    std::size_t size() const { return pieces_.size(); }

    /// H^1 measure, sum of lengths.
    double measure() const;
    bool contains(double t) const;
    double inf() const;
    double sup() const;

    /// Distance from t to the set (0 if inside).
    double distance(double t) const;

    /// H^1([lo,hi] ∩ this), exact.
    double measure_within(double lo, double hi) const;

    IntervalUnion intersect(const IntervalUnion& other) const;
    IntervalUnion intersect_interval(double lo, double hi) const;
    /// Closure of this \ other (endpoints of removed open pieces survive
    /// as degenerate points only when they belong to this).
    IntervalUnion subtract(const IntervalUnion& other) const;

    /// Interior gaps (open intervals between consecutive pieces).
    std::vector<std::pair<double, double>> gaps() const;

    /// All interval endpoints, ascending.
    std::vector<double> endpoints() const;

  private:
    std::vector<std::pair<double, double>> pieces_;
};

/// Hausdorff distance between nonempty interval unions, exact. Throws
/// parameter_error on empty input.
double hausdorff_distance(const IntervalUnion& A, const IntervalUnion& B);

/// Hausdorff distance between nonempty finite point sets in R^m (m <= 3),
/// exact pairwise computation.
double hausdorff_distance(const std::vector<std::array<double, 3>>& A,
                          const std::vector<std::array<double, 3>>& B);

/// The set {t in K : H^1([t-r, t+r] ∩ K) >= 2(1-eps) r for all 0 <= r <= R},
/// computed exactly from the piecewise-linear structure: the binding radii
/// are r = R and the entry radii r = |t - c| over endpoints c of K.
IntervalUnion density_good_set(const IntervalUnion& K, double eps, double R);

/// Direct check of the defining inequality at a single t by scanning radii;
/// scan_points uniform radii plus the exact critical radii. Used as the
/// oracle for density_good_set.
bool density_good_at(const IntervalUnion& K, double eps, double R, double t, int scan_points);

} // namespace gmtlab

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "gmtlab/geometry.hpp"
#include "gmtlab/interval.hpp"

namespace gmtlab {

/// Piecewise-linear real function on [0,1], breakpoints sorted strictly.
struct PiecewiseLinear {
    std::vector<double> t;
    std::vector<double> v;

    double eval(double s) const;
    double integral() const;                       // exact
    double integral_abs_derivative() const;        // total variation, exact
    double integral_over(const IntervalUnion& K) const;  // exact
    /// Closure of {s : f(s) != 0}, as an interval union.
    IntervalUnion support() const;
    bool is_zero() const;

    static PiecewiseLinear zero();
    static PiecewiseLinear constant(double c);
};

/// 1-Lipschitz map from a compact interval-union subset of [0,1] into R^m,
/// piecewise linear between breakpoints. Every endpoint of the domain is a
/// breakpoint; extra interior breakpoints are allowed.
class Fragment {
  public:
    Fragment() = default;  // empty sentinel
    Fragment(int dim, IntervalUnion domain, std::vector<double> ts, std::vector<Vec> values);

    /// Straight 1-Lipschitz parametrization t -> start + (t - t0) * velocity
    /// restricted to `domain` (|velocity| <= 1).
    static Fragment linear(int dim, IntervalUnion domain, Vec start, Vec velocity, double t0 = 0.0);

    bool empty() const { return domain_.empty(); }
    int dim() const { return dim_; }
    const IntervalUnion& domain() const { return domain_; }
    const std::vector<double>& breakpoints() const { return ts_; }
    const std::vector<Vec>& values() const { return values_; }

    Vec eval(double t) const;  // t must lie in the domain

    struct Piece {
        double t0, t1;
        Vec v0, v1;
        Vec slope() const;
    };
    /// Nondegenerate linear pieces inside the domain.
    std::vector<Piece> linear_pieces() const;
    /// Degenerate domain components (isolated points).
    std::vector<double> isolated_points() const;

    /// {t in dom : |gamma(t) - x| <= rho}, exact per-piece quadratic solves.
    IntervalUnion ball_preimage(const Vec& x, double rho) const;

  private:
    int dim_ = 0;
    IntervalUnion domain_;
    std::vector<double> ts_;
    std::vector<Vec> values_;
};

/// A Fragment whose domain is exactly [0,1].
using FullCurve = Fragment;

/// Affine 1-Lipschitz map phi: R^m -> R^n (matrix + offset).
struct LipschitzMap {
    int m = 2, n = 2;
    std::array<double, 9> A{};  // row-major n x m
    Vec offset{};
    double norm_bound = 1.0;

    static LipschitzMap identity(int dim);
    static LipschitzMap affine(int m, int n, const std::array<double, 9>& A, Vec offset);

    Vec apply(const Vec& x) const;
    Vec apply_linear(const Vec& x) const;  // matrix part only (for derivatives)
};

/// Direction cone in the phi-image: aperture eps in the Gamma(phi,e,eps)
/// convention (1 - eps^2/2 threshold), speed floor delta, optional theta for
/// the C(w,theta) convention (1 - theta^2 threshold).
struct ConeSpec {
    Vec e{1.0, 0.0, 0.0};
    double eps = 0.5;
    double delta = 1.0;
    std::optional<double> theta;

    void validate() const;
};

/// Cutoff psi(y) = max{2 - |y - x|/r, 0}; (1/r)-Lipschitz, 0 <= psi <= 2,
/// supported on B(x, 2r).
struct CutoffSpec {
    Vec x{};
    double r = 1.0;

    double psi(const Vec& y) const;
};

enum class ConeClass {
    full,         // in Gamma(phi, e, eps, delta)
    directional,  // in Gamma(phi, e, eps) but the speed floor fails
    out,
};

struct ConeMembership {
    ConeClass cls = ConeClass::out;
    std::optional<std::pair<double, double>> witness;  // violating (t1, t2)
    const char* violated = nullptr;  // "direction" or "speed"
};

/// Checks the direction inequality
///   <phi(g(t2)) - phi(g(t1)), e> >= (1 - eps^2/2) |phi(g(t2)) - phi(g(t1))|
/// over all ordered breakpoint pairs (exact on piecewise-linear data), and
/// the speed inequality |phi(g(t2)) - phi(g(t1))| >= delta (t2 - t1) over
/// breakpoint pairs plus a midpoint-subdivision pass (depth 6).
ConeMembership cone_membership(const Fragment& g, const LipschitzMap& phi, const ConeSpec& cone);

/// Whether t0 is a good point of dom(g) at scale R and aperture eps,
/// checked exactly.
bool good_point(const Fragment& g, double eps, double R, double t0);

/// Linear extension to [0,1]: phi∘gamma on the domain, linear interpolation
/// across gaps, the two-endpoint extrapolation rule outside [a,b], and the
/// straight line in direction e for singleton domains.
FullCurve extend_curve(const Fragment& g, const LipschitzMap& phi, const Vec& e);

/// Extended cutoff profile: psi∘gamma sampled on the domain (refined to steps
/// of at most `refine_step` when positive), the max-of-tents rule on gaps and
/// one-sided tents outside [a,b]. All tent kinks are exact.
PiecewiseLinear extend_cutoff(const Fragment& g, const CutoffSpec& cut, double refine_step = 0.0);

struct BallMassResult {
    double mass = 0.0;         // gamma_#(|(phi∘gamma)'| H^1)(B(x, 3r))
    double lower_bound = 0.0;  // 2 (1 - eps) delta r
    bool bound_met = false;
};

/// Mass the fragment carries into B(x, 3r), by exact piecewise-linear
/// arc-length accounting. Preconditions (named on failure): cone membership,
/// (gamma, t0) good at scale r, gamma(t0) in B(x, 2r).
BallMassResult fragment_ball_mass(const Fragment& g, const LipschitzMap& phi, const ConeSpec& cone,
                                  const Vec& x, double r, double t0);

/// restriction gamma|_K with exact interval arithmetic; empty result is the
/// empty-fragment sentinel.
Fragment restrict_fragment(const Fragment& g, const IntervalUnion& K);

struct MetricDerivative {
    bool defined = false;  // false at breakpoints (a measure-zero set)
    Vec vector{};
    double speed = 0.0;
};

/// Local slope at t (t inside a domain interval). Throws if t is outside the
/// domain; returns a flagged sentinel at breakpoints.
MetricDerivative metric_derivative(const Fragment& g, double t);

} // namespace gmtlab

#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace gmtlab {

// Points, vectors and small matrices in ambient dimension <= 3.
// The active dimension travels with the owning object (grid, fragment, ...);
// unused trailing components are kept at zero.

using Vec = std::array<double, 3>;

inline Vec vec(double x, double y = 0.0, double z = 0.0) { return {x, y, z}; }

inline Vec add(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec sub(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec scale(const Vec& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }
inline double dist(const Vec& a, const Vec& b) { return norm(sub(a, b)); }

inline Vec lerp(const Vec& a, const Vec& b, double s) {
    return {a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])};
}

/// Row-major n x n matrix, n <= 3.
struct Mat {
    int n = 2;
    std::array<double, 9> a{};  // a[i*n+j]

    double& operator()(int i, int j) { return a[i * n + j]; }
    double operator()(int i, int j) const { return a[i * n + j]; }

    static Mat identity(int n) {
        Mat m;
        m.n = n;
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline Vec mat_vec(const Mat& m, const Vec& v) {
    Vec r{};
    for (int i = 0; i < m.n; ++i) {
        double s = 0;
        for (int j = 0; j < m.n; ++j) s += m(i, j) * v[j];
        r[i] = s;
    }
    return r;
}

inline double frobenius(const Mat& m) {
    double s = 0;
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

double determinant(const Mat& m);
Mat inverse(const Mat& m);
/// Largest singular value.
double operator_norm(const Mat& m);
/// Smallest singular value.
double smallest_singular_value(const Mat& m);

} // namespace gmtlab

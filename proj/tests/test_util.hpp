#pragma once

// Test-only helpers: random instances and closed-form oracles that do not go through the
// library's kernel code.

#include <cmath>
#include <cstdint>

#include "kgvs/common.hpp"
#include "kgvs/rng.hpp"

namespace kgvs::test {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
    return m;
}

inline Vector random_vector(Index n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
    return v;
}

/// Gaussian kernel in extended precision, written out independently of kgvs::eval.
inline long double gaussian_ld(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u, long double h,
                               Index shift_a = -1, long double da = 0, Index shift_b = -1, long double db = 0) {
    long double d2 = 0;
    for (Index k = 0; k < x.size(); ++k) {
        long double xk = x(k);
        if (k == shift_a) xk += da;
        if (k == shift_b) xk += db;
        const long double d = xk - static_cast<long double>(u(k));
        d2 += d * d;
    }
    return std::exp(-d2 / (2 * h * h));
}

/// Central difference of the Gaussian in x^l, extended precision.
inline double fd_gaussian_grad(const Vector& x, const Vector& u, double h, Index l, long double step) {
    return static_cast<double>((gaussian_ld(x, u, h, l, step) - gaussian_ld(x, u, h, l, -step)) / (2 * step));
}

/// Second-order (mixed when l != k) central difference of the Gaussian, extended precision.
inline double fd_gaussian_grad2(const Vector& x, const Vector& u, double h, Index l, Index k, long double step) {
    if (l == k)
        return static_cast<double>((gaussian_ld(x, u, h, l, step) - 2 * gaussian_ld(x, u, h) +
                                    gaussian_ld(x, u, h, l, -step)) /
                                   (step * step));
    return static_cast<double>((gaussian_ld(x, u, h, l, step, k, step) - gaussian_ld(x, u, h, l, step, k, -step) -
                                gaussian_ld(x, u, h, l, -step, k, step) + gaussian_ld(x, u, h, l, -step, k, -step)) /
                               (4 * step * step));
}

/// |a - b| / max(|b|, floor). The floor keeps near-zero reference values from turning
/// round-off into a huge relative error.
inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max(std::abs(b), floor);
}

}  // namespace kgvs::test

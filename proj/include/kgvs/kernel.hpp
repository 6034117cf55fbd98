#pragma once

// Gaussian and linear kernels with analytic derivatives in the first argument,
// the median-distance bandwidth heuristic, and Gram assembly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kgvs/common.hpp"
#include "kgvs/parallel.hpp"
#include "kgvs/rng.hpp"

namespace kgvs {

enum class KernelFamily { Gaussian, Linear };

inline std::string to_string(KernelFamily f) { return f == KernelFamily::Gaussian ? "gaussian" : "linear"; }

/// Gaussian: K(x,u) = exp(-|x-u|^2 / (2 bandwidth^2)).
/// Linear:   K(x,u) = scale * <x,u>.
struct KernelSpec {
    KernelFamily family = KernelFamily::Gaussian;
    double bandwidth = 1.0;
    double scale = 1.0;

    static KernelSpec gaussian(double bandwidth) {
        KernelSpec k{KernelFamily::Gaussian, bandwidth, 1.0};
        k.validate();
        return k;
    }
    static KernelSpec linear(double scale = 1.0) {
        KernelSpec k{KernelFamily::Linear, 1.0, scale};
        k.validate();
        return k;
    }

    void validate() const {
        if (family == KernelFamily::Gaussian && !(bandwidth > 0.0 && std::isfinite(bandwidth)))
            throw InputError("gaussian kernel: bandwidth must be positive and finite");
        if (family == KernelFamily::Linear && !(scale > 0.0 && std::isfinite(scale)))
            throw InputError("linear kernel: scale must be positive and finite");
    }
};

namespace detail {

template <typename A, typename B>
void check_points(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& u) {
    if (x.size() != u.size())
        throw InputError("kernel: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                         std::to_string(u.size()) + ")");
    if (!x.allFinite() || !u.allFinite()) throw InputError("kernel: non-finite input");
}

inline void check_index(Index l, Index dim) {
    if (l < 0 || l >= dim)
        throw InputError("kernel: variable index " + std::to_string(l) + " out of range [0, " +
                         std::to_string(dim) + ")");
}

template <typename A, typename B>
double sq_dist(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& u) {
    double s = 0.0;
    for (Index k = 0; k < x.size(); ++k) {
        const double d = x(k) - u(k);
        s += d * d;
    }
    return s;
}

}  // namespace detail

/// K(x, u). Points may be any Eigen row or column expressions of equal length.
template <typename A, typename B>
double eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& u) {
    detail::check_points(x, u);
    if (spec.family == KernelFamily::Linear) {
        double s = 0.0;
        for (Index k = 0; k < x.size(); ++k) s += x(k) * u(k);
        return spec.scale * s;
    }
    const double h2 = spec.bandwidth * spec.bandwidth;
    return std::exp(-detail::sq_dist(x, u) / (2.0 * h2));
}

/// dK(x,u)/dx^l. Indices are 0-based.
template <typename A, typename B>
double grad1(const KernelSpec& spec, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& u,
             Index l) {
    detail::check_points(x, u);
    detail::check_index(l, x.size());
    if (spec.family == KernelFamily::Linear) return spec.scale * u(l);
    const double h2 = spec.bandwidth * spec.bandwidth;
    const double k = std::exp(-detail::sq_dist(x, u) / (2.0 * h2));
    return -(x(l) - u(l)) / h2 * k;
}

/// d^2 K(x,u) / dx^l dx^k. Zero for the linear kernel.
template <typename A, typename B>
double grad2(const KernelSpec& spec, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& u,
             Index l, Index k) {
    detail::check_points(x, u);
    detail::check_index(l, x.size());
    detail::check_index(k, x.size());
    if (spec.family == KernelFamily::Linear) return 0.0;
    const double h2 = spec.bandwidth * spec.bandwidth;
    const double kv = std::exp(-detail::sq_dist(x, u) / (2.0 * h2));
    const double dl = x(l) - u(l);
    const double dk = x(k) - u(k);
    return (dl * dk / (h2 * h2) - (l == k ? 1.0 / h2 : 0.0)) * kv;
}

/// Symmetric n x n matrix of squared Euclidean distances between rows of X.
inline Matrix pairwise_sq_dists(const Matrix& X, int threads = 0) {
    const Index n = X.rows();
    const Matrix Xt = X.transpose();  // one observation per contiguous column
    Matrix D = Matrix::Zero(n, n);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
        const auto i = static_cast<Index>(row);
        for (Index j = i + 1; j < n; ++j) {
            const double d = (Xt.col(i) - Xt.col(j)).squaredNorm();
            D(i, j) = d;
            D(j, i) = d;
        }
    });
    return D;
}

/// Median of the strictly-upper-triangle distances sqrt(D(i,j)), i < j. Even counts
/// average the two central order statistics.
inline double median_distance(const Matrix& sq_dists) {
    const Index n = sq_dists.rows();
    if (n < 2) throw NumericalError("median bandwidth: need at least 2 observations");
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index j = 1; j < n; ++j)
        for (Index i = 0; i < j; ++i) d.push_back(std::sqrt(sq_dists(i, j)));
    const std::size_t m = d.size();
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(m / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (m % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
    if (!(med > 0.0))
        throw NumericalError("median bandwidth: median pairwise distance is zero (degenerate inputs)");
    return med;
}

/// Rows used for the bandwidth heuristic are capped at this count.
inline constexpr Index kMedianExactRows = 4000;
inline constexpr std::uint64_t kMedianSubsampleSeed = 0x6B677673ULL;

/// Median pairwise Euclidean distance between rows of X. Above kMedianExactRows rows the
/// median is taken over a fixed-seed uniform subsample of that many rows.
inline double median_bandwidth(const Matrix& X, int threads = 0) {
    if (X.rows() < 2) throw NumericalError("median bandwidth: need at least 2 observations");
    if (!X.allFinite()) throw InputError("median bandwidth: non-finite input");
    if (X.rows() <= kMedianExactRows) return median_distance(pairwise_sq_dists(X, threads));
    Rng rng(kMedianSubsampleSeed);
    auto perm = rng.permutation(X.rows());
    perm.resize(static_cast<std::size_t>(kMedianExactRows));
    std::sort(perm.begin(), perm.end());
    return median_distance(pairwise_sq_dists(take_rows(X, perm), threads));
}

/// Gram matrix from precomputed squared distances (Gaussian only).
inline Matrix gaussian_gram(double bandwidth, const Matrix& sq_dists) {
    const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
    Matrix K = (sq_dists.array() * scale).exp().matrix();
    K.diagonal().setOnes();
    return K;
}

/// K(i,j) = K(x_i, x_j) over rows of X.
inline Matrix gram(const KernelSpec& spec, const Matrix& X, int threads = 0) {
    spec.validate();
    if (!X.allFinite()) throw InputError("gram: non-finite input");
    if (spec.family == KernelFamily::Gaussian) return gaussian_gram(spec.bandwidth, pairwise_sq_dists(X, threads));
    const Index n = X.rows();
    const Matrix Xt = X.transpose();
    Matrix K(n, n);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
        const auto i = static_cast<Index>(row);
        for (Index j = i; j < n; ++j) {
            const double v = spec.scale * Xt.col(i).dot(Xt.col(j));
            K(i, j) = v;
            K(j, i) = v;
        }
    });
    return K;
}

/// Cross-Gram C(i,t) = K(x_i, z_t) between rows of X and rows of Z.
inline Matrix cross_gram(const KernelSpec& spec, const Matrix& X, const Matrix& Z, int threads = 0) {
    spec.validate();
    if (X.cols() != Z.cols()) throw InputError("cross_gram: dimension mismatch");
    const Matrix Xt = X.transpose();
    const Matrix Zt = Z.transpose();
    Matrix C(X.rows(), Z.rows());
    const double h2 = spec.bandwidth * spec.bandwidth;
    parallel_for(static_cast<std::size_t>(X.rows()), threads, [&](std::size_t row) {
        const auto i = static_cast<Index>(row);
        for (Index t = 0; t < Z.rows(); ++t) {
            C(i, t) = spec.family == KernelFamily::Linear
                          ? spec.scale * Xt.col(i).dot(Zt.col(t))
                          : std::exp(-(Xt.col(i) - Zt.col(t)).squaredNorm() / (2.0 * h2));
        }
    });
    return C;
}

}  // namespace kgvs

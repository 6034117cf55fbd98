#pragma once

// Gradients of a fitted model through the derivative reproducing property,
//   g_l(x)  = sum_i alpha_i d/dx^l K(x_i, x)
//   g_lk(x) = sum_i alpha_i d^2/dx^l dx^k K(x_i, x)
// and their empirical norms |g|_n^2 = (1/n) sum_j g(x_j)^2, the importance scores.

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "kgvs/common.hpp"
#include "kgvs/kernel.hpp"
#include "kgvs/krr.hpp"
#include "kgvs/parallel.hpp"

namespace kgvs {

/// Per-variable first-order scores.
struct GradientScores {
    Vector first_order;
};

/// Second-order scores over `subset`: table(a, b) is the score of the pair
/// (subset[a], subset[b]). Symmetric, diagonal included.
struct PairScores {
    std::vector<Index> subset;
    Matrix table;
    /// Set when the kernel has identically zero second derivatives (linear).
    bool degenerate_kernel = false;
};

namespace detail {

template <typename A>
Eigen::RowVectorXd shifted(const KrrModel& model, const Eigen::MatrixBase<A>& x) {
    if (x.size() != model.p())
        throw InputError("gradient: point has " + std::to_string(x.size()) + " coordinates, model expects " +
                         std::to_string(model.p()));
    Eigen::RowVectorXd xs = x.transpose();
    if (model.x_offset.size() == model.p()) xs -= model.x_offset;
    return xs;
}

inline Matrix shifted_rows(const KrrModel& model, const Matrix& X_eval) {
    if (X_eval.cols() != model.p())
        throw InputError("gradient scores: evaluation matrix has " + std::to_string(X_eval.cols()) +
                         " columns, model expects " + std::to_string(model.p()));
    if (!X_eval.allFinite()) throw InputError("gradient scores: non-finite evaluation points");
    if (model.x_offset.size() != model.p()) return X_eval;
    return X_eval.rowwise() - model.x_offset;
}

/// W(i, j) = alpha_i K(x_i, z_j) for training rows x_i and evaluation rows z_j.
inline Matrix weighted_kernel(const KrrModel& model, const Matrix& Z, int threads) {
    Matrix W = (Z.rows() == model.n() && Z == model.train_X) ? *model.training_gram(threads)
                                                               : cross_gram(model.kernel, model.train_X, Z, threads);
    return model.alpha.asDiagonal() * W;
}

}  // namespace detail

/// g_l(x). Index l is 0-based.
template <typename A>
double grad_eval(const KrrModel& model, const Eigen::MatrixBase<A>& x, Index l) {
    const Eigen::RowVectorXd xs = detail::shifted(model, x);
    detail::check_index(l, model.p());
    KahanSum s;
    for (Index i = 0; i < model.n(); ++i) s.add(model.alpha(i) * grad1(model.kernel, xs, model.train_X.row(i), l));
    return s.value();
}

/// g_lk(x).
template <typename A>
double grad2_eval(const KrrModel& model, const Eigen::MatrixBase<A>& x, Index l, Index k) {
    const Eigen::RowVectorXd xs = detail::shifted(model, x);
    detail::check_index(l, model.p());
    detail::check_index(k, model.p());
    KahanSum s;
    for (Index i = 0; i < model.n(); ++i)
        s.add(model.alpha(i) * grad2(model.kernel, xs, model.train_X.row(i), l, k));
    return s.value();
}

/// |g_l|_n^2 for every variable l, averaging over the rows of X_eval. Parallel over l; each
/// variable's sums run over i then j in index order, so the result does not depend on the
/// thread count.
inline GradientScores first_order_scores(const KrrModel& model, const Matrix& X_eval, int threads = 0) {
    const Matrix Z = detail::shifted_rows(model, X_eval);
    const Index p = model.p();
    const Index n_eval = Z.rows();
    if (n_eval < 1) throw InputError("gradient scores: no evaluation points");
    GradientScores out;
    out.first_order = Vector::Zero(p);

    if (model.kernel.family == KernelFamily::Linear) {
        // The gradient is the constant s * X^T alpha.
        for (Index l = 0; l < p; ++l) {
            KahanSum g;
            for (Index i = 0; i < model.n(); ++i) g.add(model.alpha(i) * model.train_X(i, l));
            const double gl = model.kernel.scale * g.value();
            out.first_order(l) = gl * gl;
        }
        return out;
    }

    const Matrix W = detail::weighted_kernel(model, Z, threads);
    const double inv_h2 = 1.0 / (model.kernel.bandwidth * model.kernel.bandwidth);
    const Index n = model.n();
    parallel_for(static_cast<std::size_t>(p), threads, [&](std::size_t var) {
        const auto l = static_cast<Index>(var);
        const double* xl = model.train_X.col(l).data();
        KahanSum norm;
        for (Index j = 0; j < n_eval; ++j) {
            const double zl = Z(j, l);
            const double* w = W.col(j).data();
            KahanSum g;
            for (Index i = 0; i < n; ++i) g.add(w[i] * (xl[i] - zl));
            const double gj = g.value() * inv_h2;
            norm.add(gj * gj);
        }
        out.first_order(l) = norm.value() / static_cast<double>(n_eval);
    });
    return out;
}

/// |g_lk|_n^2 for every unordered pair drawn from `subset` (l == k included). Parallel over
/// pairs. A linear-kernel model yields an all-zero table with degenerate_kernel set.
inline PairScores second_order_scores(const KrrModel& model, const Matrix& X_eval, std::vector<Index> subset,
                                      int threads = 0) {
    const Matrix Z = detail::shifted_rows(model, X_eval);
    std::set<Index> seen;
    for (Index l : subset) {
        detail::check_index(l, model.p());
        if (!seen.insert(l).second) throw InputError("second_order_scores: duplicate index " + std::to_string(l));
    }
    const auto m = static_cast<Index>(subset.size());
    PairScores out;
    out.subset = std::move(subset);
    out.table = Matrix::Zero(m, m);
    if (model.kernel.family == KernelFamily::Linear) {
        out.degenerate_kernel = true;
        return out;
    }
    if (m == 0) return out;
    const Index n_eval = Z.rows();
    if (n_eval < 1) throw InputError("gradient scores: no evaluation points");

    std::vector<std::pair<Index, Index>> pairs;
    for (Index a = 0; a < m; ++a)
        for (Index b = a; b < m; ++b) pairs.emplace_back(a, b);

    const Matrix W = detail::weighted_kernel(model, Z, threads);
    const double inv_h2 = 1.0 / (model.kernel.bandwidth * model.kernel.bandwidth);
    const double inv_h4 = inv_h2 * inv_h2;
    const Index n = model.n();
    parallel_for(pairs.size(), threads, [&](std::size_t q) {
        const auto [a, b] = pairs[q];
        const Index l = out.subset[static_cast<std::size_t>(a)];
        const Index k = out.subset[static_cast<std::size_t>(b)];
        const double diag = (l == k) ? inv_h2 : 0.0;
        const double* xl = model.train_X.col(l).data();
        const double* xk = model.train_X.col(k).data();
        KahanSum norm;
        for (Index j = 0; j < n_eval; ++j) {
            const double zl = Z(j, l);
            const double zk = Z(j, k);
            const double* w = W.col(j).data();
            KahanSum g;
            for (Index i = 0; i < n; ++i) g.add(w[i] * ((xl[i] - zl) * (xk[i] - zk) * inv_h4 - diag));
            const double gj = g.value();
            norm.add(gj * gj);
        }
        const double v = norm.value() / static_cast<double>(n_eval);
        out.table(a, b) = v;
        out.table(b, a) = v;
    });
    return out;
}

}  // namespace kgvs

#pragma once

// Kernel ridge regression:
//   f = argmin (1/n) sum_i (y_i - f(x_i))^2 + lambda |f|_K^2,   f(x) = sum_i alpha_i K(x_i, x)
// solved as (K + n lambda I) alpha = y, with a Moore-Penrose fallback
// alpha = (K^2 + n lambda K)^+ K y and a rank-d Nystrom path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "kgvs/common.hpp"
#include "kgvs/kernel.hpp"
#include "kgvs/rng.hpp"

namespace kgvs {

enum class Solver { Exact, PseudoInverse, Nystrom };

inline std::string to_string(Solver s) {
    switch (s) {
        case Solver::Exact: return "exact";
        case Solver::PseudoInverse: return "pseudo_inverse";
        case Solver::Nystrom: return "nystrom";
    }
    return "unknown";
}

/// A fitted model. Immutable once built; safe to share across threads.
///
/// `x_offset` and `y_offset` describe an optional centering applied before fitting:
/// f(x) = y_offset + sum_i alpha_i K(x_i, x - x_offset). Derivatives ignore both.
struct KrrModel {
    Vector alpha;
    double lambda = 0.0;
    KernelSpec kernel;
    Matrix train_X;
    Solver solver = Solver::Exact;
    std::vector<Index> landmarks;  // Nystrom only, sorted
    std::shared_ptr<const Matrix> gram;  // K over train_X; may be null for Nystrom fits
    Eigen::RowVectorXd x_offset;         // empty, or length p
    double y_offset = 0.0;

    Index n() const { return train_X.rows(); }
    Index p() const { return train_X.cols(); }

    /// Gram over the training rows, computing it if the fit did not keep one.
    std::shared_ptr<const Matrix> training_gram(int threads = 0) const {
        if (gram) return gram;
        return std::make_shared<const Matrix>(kgvs::gram(kernel, train_X, threads));
    }
};

/// lambda_n = n^{-1/(2r+1)} (log n)^{2/(2r+1)}.
inline double default_lambda(Index n, double r = 1.0) {
    if (n < 3) throw InputError("default_lambda: need n >= 3 (got " + std::to_string(n) + ")");
    if (!(r > 0.5 && r <= 1.0)) throw InputError("default_lambda: r must lie in (1/2, 1]");
    const double e = 1.0 / (2.0 * r + 1.0);
    const auto nd = static_cast<double>(n);
    return std::pow(nd, -e) * std::pow(std::log(nd), 2.0 * e);
}

namespace detail {

inline void check_fit_args(const Dataset& data, const KernelSpec& kernel, double lambda) {
    if (data.X.rows() != data.y.size()) throw InputError("fit: X rows and y length differ");
    if (data.X.rows() < 1) throw InputError("fit: empty dataset");
    if (!data.X.allFinite() || !data.y.allFinite()) throw InputError("fit: non-finite data");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("fit: lambda must be positive");
    kernel.validate();
}

inline KrrModel make_model(const Dataset& data, const KernelSpec& kernel, double lambda, Vector alpha,
                           Solver solver, std::shared_ptr<const Matrix> K) {
    KrrModel m;
    m.alpha = std::move(alpha);
    m.lambda = lambda;
    m.kernel = kernel;
    m.train_X = data.X;
    m.solver = solver;
    m.gram = std::move(K);
    return m;
}

}  // namespace detail

/// alpha = (K^2 + n lambda K)^+ K y through the eigendecomposition K = Q diag(s) Q^T.
/// Eigenvalues of K^2 + n lambda K with magnitude below max(n,p) * eps * max are zeroed.
inline Vector pseudo_inverse_alpha(const Matrix& K, const Vector& y, double lambda, Index p) {
    const Index n = K.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(K);
    if (eig.info() != Eigen::Success) throw NumericalError("fit: eigendecomposition of the Gram matrix failed");
    const Vector& s = eig.eigenvalues();
    const double nl = static_cast<double>(n) * lambda;
    Vector m = (s.array().square() + nl * s.array()).matrix();
    const double mmax = m.cwiseAbs().maxCoeff();
    const double cutoff = static_cast<double>(std::max(n, p)) * std::numeric_limits<double>::epsilon() * mmax;
    Vector w(n);
    for (Index i = 0; i < n; ++i) w(i) = std::abs(m(i)) > cutoff ? s(i) / m(i) : 0.0;
    const Matrix& Q = eig.eigenvectors();
    return Q * w.cwiseProduct(Q.transpose() * y);
}

/// Pseudo-inverse route only; kept separate so it can be checked against the exact path.
inline KrrModel fit_pseudo_inverse(const Dataset& data, const KernelSpec& kernel, double lambda,
                                   std::shared_ptr<const Matrix> K = nullptr, int threads = 0) {
    detail::check_fit_args(data, kernel, lambda);
    if (!K) K = std::make_shared<const Matrix>(gram(kernel, data.X, threads));
    if (!K->allFinite()) throw NumericalError("fit: non-finite Gram entries");
    Vector alpha = pseudo_inverse_alpha(*K, data.y, lambda, data.p());
    if (!alpha.allFinite()) throw NumericalError("fit: pseudo-inverse solve produced non-finite coefficients");
    return detail::make_model(data, kernel, lambda, std::move(alpha), Solver::PseudoInverse, std::move(K));
}

/// Solves (K + n lambda I) alpha = y by Cholesky; falls back to the pseudo-inverse form when
/// the factorization fails or yields non-finite values. A precomputed Gram may be passed in.
inline KrrModel fit(const Dataset& data, const KernelSpec& kernel, double lambda,
                    std::shared_ptr<const Matrix> K = nullptr, int threads = 0) {
    detail::check_fit_args(data, kernel, lambda);
    if (!K) K = std::make_shared<const Matrix>(gram(kernel, data.X, threads));
    if (K->rows() != data.n() || K->cols() != data.n()) throw InputError("fit: Gram size does not match data");
    if (!K->allFinite()) throw NumericalError("fit: non-finite Gram entries");
    const Index n = data.n();
    Matrix A = *K;
    A.diagonal().array() += static_cast<double>(n) * lambda;
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() == Eigen::Success) {
        Vector alpha = llt.solve(data.y);
        if (alpha.allFinite())
            return detail::make_model(data, kernel, lambda, std::move(alpha), Solver::Exact, std::move(K));
    }
    return fit_pseudo_inverse(data, kernel, lambda, std::move(K), threads);
}

/// Rank-d Nystrom fit. Landmarks are d rows drawn uniformly without replacement;
/// K~ = C W^+ C^T is applied through Woodbury so the solve costs O(n d^2 + d^3).
inline KrrModel fit_nystrom(const Dataset& data, const KernelSpec& kernel, double lambda, Index d,
                            std::uint64_t seed, int threads = 0) {
    detail::check_fit_args(data, kernel, lambda);
    const Index n = data.n();
    if (d < 1 || d > n)
        throw InputError("fit_nystrom: rank " + std::to_string(d) + " outside [1, " + std::to_string(n) + "]");
    Rng rng(seed);
    auto perm = rng.permutation(n);
    std::vector<Index> landmarks(perm.begin(), perm.begin() + d);
    std::sort(landmarks.begin(), landmarks.end());

    const Matrix C = cross_gram(kernel, data.X, take_rows(data.X, landmarks), threads);
    if (!C.allFinite()) throw NumericalError("fit_nystrom: non-finite cross-Gram entries");
    Matrix W(d, d);
    for (Index a = 0; a < d; ++a) W.row(a) = C.row(landmarks[static_cast<std::size_t>(a)]);
    W = 0.5 * (W + W.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> eig(W);
    if (eig.info() != Eigen::Success) throw NumericalError("fit_nystrom: eigendecomposition of W failed");
    const Vector& s = eig.eigenvalues();
    const double smax = s.cwiseAbs().maxCoeff();
    const double cutoff = static_cast<double>(d) * std::numeric_limits<double>::epsilon() * smax;
    std::vector<Index> keep;
    for (Index i = 0; i < d; ++i)
        if (s(i) > cutoff) keep.push_back(i);
    if (keep.empty()) throw NumericalError("fit_nystrom: landmark Gram is numerically zero");

    // K~ = L L^T with L = C V_k diag(s_k)^{-1/2}.
    const auto r = static_cast<Index>(keep.size());
    Matrix L(n, r);
    for (Index c = 0; c < r; ++c) {
        const Index k = keep[static_cast<std::size_t>(c)];
        L.col(c) = C * eig.eigenvectors().col(k) / std::sqrt(s(k));
    }
    const double mu = static_cast<double>(n) * lambda;
    Matrix inner = L.transpose() * L;
    inner.diagonal().array() += mu;
    Eigen::LLT<Matrix> llt(inner);
    if (llt.info() != Eigen::Success) throw NumericalError("fit_nystrom: Woodbury inner system is not SPD");
    Vector alpha = (data.y - L * llt.solve(L.transpose() * data.y)) / mu;
    if (!alpha.allFinite()) throw NumericalError("fit_nystrom: non-finite coefficients");

    KrrModel m = detail::make_model(data, kernel, lambda, std::move(alpha), Solver::Nystrom, nullptr);
    m.landmarks = std::move(landmarks);
    return m;
}

/// f(x) = y_offset + sum_i alpha_i K(x_i, x - x_offset).
template <typename A>
double predict(const KrrModel& model, const Eigen::MatrixBase<A>& x) {
    if (x.size() != model.p())
        throw InputError("predict: point has " + std::to_string(x.size()) + " coordinates, model expects " +
                         std::to_string(model.p()));
    Eigen::RowVectorXd xs = x.transpose();
    if (model.x_offset.size() == model.p()) xs -= model.x_offset;
    KahanSum s;
    for (Index i = 0; i < model.n(); ++i) s.add(model.alpha(i) * eval(model.kernel, model.train_X.row(i), xs));
    return model.y_offset + s.value();
}

/// (1/n) |y - K alpha|^2 + lambda alpha^T K alpha, on the uncentered fitting targets.
inline double objective(const Matrix& K, const Vector& y, const Vector& alpha, double lambda) {
    const Vector Ka = K * alpha;
    return (y - Ka).squaredNorm() / static_cast<double>(y.size()) + lambda * alpha.dot(Ka);
}

/// Ridge coefficients for the linear kernel on scaled data y~ = y/p, x~ = x/sqrt(p):
///   scaled = (X~^T X~ + n lambda/p I)^{-1} X~^T y~ = X~^T (X~ X~^T + n lambda/p I)^{-1} y~
/// and the unscaled coefficients coef = sqrt(p) * scaled, which minimize
/// (1/n) |y - X b|^2 + lambda |b|^2.
struct LinearFit {
    Vector scaled;
    Vector coef;
    bool dual = false;
};

namespace detail {

inline void check_linear_args(const Dataset& data, double lambda) {
    if (data.X.rows() != data.y.size()) throw InputError("fit_linear_primal: X rows and y length differ");
    if (!data.X.allFinite() || !data.y.allFinite()) throw InputError("fit_linear_primal: non-finite data");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("fit_linear_primal: lambda must be positive");
}

}  // namespace detail

/// p x p normal-equation solve.
inline Vector linear_primal_solve(const Dataset& data, double lambda) {
    detail::check_linear_args(data, lambda);
    const auto n = static_cast<double>(data.n());
    const auto p = static_cast<double>(data.p());
    const Matrix Xs = data.X / std::sqrt(p);
    const Vector ys = data.y / p;
    Matrix A = Xs.transpose() * Xs;
    A.diagonal().array() += n * lambda / p;
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw NumericalError("fit_linear_primal: primal system is not SPD");
    return llt.solve(Xs.transpose() * ys);
}

/// n x n dual solve.
inline Vector linear_dual_solve(const Dataset& data, double lambda) {
    detail::check_linear_args(data, lambda);
    const auto n = static_cast<double>(data.n());
    const auto p = static_cast<double>(data.p());
    const Matrix Xs = data.X / std::sqrt(p);
    const Vector ys = data.y / p;
    Matrix A = Xs * Xs.transpose();
    A.diagonal().array() += n * lambda / p;
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw NumericalError("fit_linear_primal: dual system is not SPD");
    return Xs.transpose() * llt.solve(ys);
}

/// Picks the primal solve when p <= n and the dual solve otherwise.
inline LinearFit fit_linear_primal(const Dataset& data, double lambda) {
    LinearFit out;
    out.dual = data.p() > data.n();
    out.scaled = out.dual ? linear_dual_solve(data, lambda) : linear_primal_solve(data, lambda);
    out.coef = out.scaled * std::sqrt(static_cast<double>(data.p()));
    return out;
}

}  // namespace kgvs

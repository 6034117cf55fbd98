#include <gtest/gtest.h>

#include <cmath>

#include "kgvs/krr.hpp"
#include "kgvs/simgen.hpp"
#include "test_util.hpp"

using namespace kgvs;

namespace {

double rel_diff(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

Dataset toy_data(Index n, Index p, Rng& rng) {
    Dataset d;
    d.X = test::random_matrix(n, p, rng);
    d.y = test::random_vector(n, rng, -2, 2);
    return d;
}

double in_sample_mse(const KrrModel& m, const Dataset& d) {
    double s = 0;
    for (Index i = 0; i < d.n(); ++i) {
        const double r = predict(m, d.X.row(i)) - d.y(i);
        s += r * r;
    }
    return s / static_cast<double>(d.n());
}

}  // namespace

TEST(DefaultLambda, Values) {
    // Reference values from 30-digit arithmetic of n^(-1/3) (ln n)^(2/3).
    EXPECT_NEAR(default_lambda(20), 0.765582504633696, 1e-13);
    EXPECT_NEAR(default_lambda(400), 0.447715364722872, 1e-13);
    EXPECT_LT(default_lambda(1000), default_lambda(100));
    for (Index n = 8; n < 2000; n += 37) EXPECT_LT(default_lambda(n + 1), default_lambda(n));
    // r = 1/2 excluded, r = 3/4 gives n^(-1/2.5) (log n)^(2/2.5).
    EXPECT_NEAR(default_lambda(100, 0.75), std::pow(100.0, -0.4) * std::pow(std::log(100.0), 0.8), 1e-14);
}

TEST(DefaultLambda, Errors) {
    EXPECT_THROW(default_lambda(2), InputError);
    EXPECT_THROW(default_lambda(100, 0.5), InputError);
    EXPECT_THROW(default_lambda(100, 1.5), InputError);
}

TEST(Fit, SinglePoint) {
    Dataset d{Matrix::Constant(1, 1, 0.3), Vector::Constant(1, 2.0)};
    const KrrModel m = fit(d, KernelSpec::gaussian(1.0), 1.0);
    ASSERT_EQ(m.alpha.size(), 1);
    EXPECT_DOUBLE_EQ(m.alpha(0), 1.0);
    EXPECT_EQ(m.solver, Solver::Exact);
}

TEST(Fit, ZeroResponse) {
    Rng rng(1);
    Dataset d{test::random_matrix(10, 3, rng), Vector::Zero(10)};
    const KrrModel m = fit(d, KernelSpec::gaussian(1.0), 0.1);
    EXPECT_EQ(m.alpha, Vector::Zero(10));
    EXPECT_EQ(fit_pseudo_inverse(d, KernelSpec::gaussian(1.0), 0.1).alpha.norm(), 0.0);
}

TEST(Fit, InputErrors) {
    Rng rng(2);
    Dataset d = toy_data(5, 2, rng);
    EXPECT_THROW(fit(d, KernelSpec::gaussian(1.0), 0.0), InputError);
    EXPECT_THROW(fit(d, KernelSpec::gaussian(1.0), -1.0), InputError);
    Dataset bad = d;
    bad.y.resize(4);
    EXPECT_THROW(fit(bad, KernelSpec::gaussian(1.0), 0.1), InputError);
    bad = d;
    bad.X(0, 0) = NAN;
    EXPECT_THROW(fit(bad, KernelSpec::gaussian(1.0), 0.1), InputError);
    EXPECT_THROW(fit_nystrom(d, KernelSpec::gaussian(1.0), 0.1, 0, 1), InputError);
    EXPECT_THROW(fit_nystrom(d, KernelSpec::gaussian(1.0), 0.1, 6, 1), InputError);
}

TEST(FitProperty, ExactResidual) {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto n = static_cast<Index>(5 + rng.below(196));
        const Dataset d = toy_data(n, 1 + static_cast<Index>(rng.below(8)), rng);
        const double lambda = std::pow(10.0, rng.uniform(-4, 0));
        const auto spec = KernelSpec::gaussian(rng.uniform(0.3, 2.0));
        const KrrModel m = fit(d, spec, lambda);
        ASSERT_EQ(m.solver, Solver::Exact);
        Matrix A = gram(spec, d.X);
        A.diagonal().array() += static_cast<double>(n) * lambda;
        EXPECT_LE((A * m.alpha - d.y).norm(), 1e-8 * d.y.norm()) << "instance " << t;
    }
}

TEST(FitProperty, PseudoInverseAgreesWithExact) {
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto n = static_cast<Index>(3 + rng.below(48));
        const Dataset d = toy_data(n, 4, rng);
        const auto spec = KernelSpec::gaussian(rng.uniform(0.3, 1.0));
        const double lambda = std::pow(10.0, rng.uniform(-3, 0));
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram(spec, d.X));
        ASSERT_GT(es.eigenvalues().minCoeff(), 1e-10) << "instance " << t << " is not well conditioned";
        const Vector a = fit(d, spec, lambda).alpha;
        const KrrModel pm = fit_pseudo_inverse(d, spec, lambda);
        EXPECT_EQ(pm.solver, Solver::PseudoInverse);
        EXPECT_LT(rel_diff(pm.alpha, a), 1e-6) << "instance " << t;
    }
}

TEST(Fit, ThreeByThreeSpdCase) {
    Rng rng(5);
    const Dataset d = toy_data(3, 2, rng);
    const auto spec = KernelSpec::gaussian(0.8);
    const Matrix K = gram(spec, d.X);
    // Explicit (K^2 + n lambda K)^{-1} K y with a dense inverse as the oracle.
    const double lambda = 0.05;
    const Matrix M = K * K + 3.0 * lambda * K;
    const Vector oracle = M.inverse() * K * d.y;
    EXPECT_LT(rel_diff(fit(d, spec, lambda).alpha, oracle), 1e-6);
}

TEST(Fit, SingularGramFallsBackToPseudoInverse) {
    // Duplicate rows make K singular; the pseudo-inverse solution still satisfies the
    // normal equations K (K + n lambda I) alpha = K y.
    Matrix X(4, 1);
    X << 0, 0, 1, 1;
    Dataset d{X, Vector::Zero(4)};
    d.y << 1, 3, 2, 2;
    const auto spec = KernelSpec::gaussian(1.0);
    const Matrix K = gram(spec, X);
    const KrrModel pm = fit_pseudo_inverse(d, spec, 0.01);
    Matrix A = K;
    A.diagonal().array() += 4 * 0.01;
    EXPECT_LT((K * A * pm.alpha - K * d.y).norm(), 1e-10);
    // alpha lies in the range of K, so the duplicated rows receive equal weights.
    EXPECT_NEAR(pm.alpha(0), pm.alpha(1), 1e-10);
}

TEST(Nystrom, FullRankMatchesExact) {
    Rng rng(6);
    for (int t = 0; t < 5; ++t) {
        const Dataset d = toy_data(60, 3, rng);
        const auto spec = KernelSpec::gaussian(0.7);
        const KrrModel m = fit_nystrom(d, spec, 0.01, d.n(), 100 + t);
        EXPECT_EQ(m.solver, Solver::Nystrom);
        EXPECT_EQ(m.landmarks.size(), 60u);
        EXPECT_LT(rel_diff(m.alpha, fit(d, spec, 0.01).alpha), 1e-6);
    }
}

TEST(Nystrom, RankOneOnIdenticalRows) {
    Dataset d{Matrix::Constant(7, 3, 0.25), Vector::LinSpaced(7, -1, 2)};
    const auto spec = KernelSpec::gaussian(1.0);
    const KrrModel m = fit_nystrom(d, spec, 0.2, 1, 9);
    EXPECT_LT(rel_diff(m.alpha, fit(d, spec, 0.2).alpha), 1e-12);
}

TEST(Nystrom, LandmarksAreSeeded) {
    Rng rng(7);
    const Dataset d = toy_data(50, 3, rng);
    const auto spec = KernelSpec::gaussian(0.7);
    const KrrModel a = fit_nystrom(d, spec, 0.01, 10, 42);
    const KrrModel b = fit_nystrom(d, spec, 0.01, 10, 42);
    EXPECT_EQ(a.landmarks, b.landmarks);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_TRUE(std::is_sorted(a.landmarks.begin(), a.landmarks.end()));
    EXPECT_NE(a.landmarks, fit_nystrom(d, spec, 0.01, 10, 43).landmarks);
}

TEST(Nystrom, Example1InSampleMse) {
    const SimData sim = gen_example1(400, 500, 0.0, 2024);
    const auto spec = KernelSpec::gaussian(median_bandwidth(sim.data.X));
    const double lambda = default_lambda(400);
    const double exact = in_sample_mse(fit(sim.data, spec, lambda), sim.data);
    const double approx = in_sample_mse(fit_nystrom(sim.data, spec, lambda, 100, 1), sim.data);
    EXPECT_LT(std::abs(approx - exact), 0.10 * exact) << "exact " << exact << " nystrom " << approx;
}

TEST(Predict, Examples) {
    Rng rng(8);
    Dataset d = toy_data(6, 2, rng);
    KrrModel m = fit(d, KernelSpec::gaussian(1.0), 0.1);
    m.alpha.setZero();
    EXPECT_EQ(predict(m, d.X.row(2)), 0.0);

    Dataset one{Matrix::Constant(1, 2, 0.5), Vector::Constant(1, 1.0)};
    KrrModel m1 = fit(one, KernelSpec::gaussian(1.0), 1.0);
    m1.alpha(0) = 2.0;
    EXPECT_EQ(predict(m1, one.X.row(0)), 2.0);

    EXPECT_THROW(predict(m1, Vector::Zero(3)), InputError);
}

TEST(Predict, NearInterpolation) {
    Matrix X(5, 1);
    X << 0, 1, 2, 3, 4;
    Dataset d{X, Vector(5)};
    d.y << 1.0, -0.5, 2.0, 0.3, -1.2;
    const KrrModel m = fit(d, KernelSpec::gaussian(1.0), 1e-10);
    for (Index i = 0; i < 5; ++i) EXPECT_NEAR(predict(m, X.row(i)), d.y(i), 1e-4);
}

TEST(PredictProperty, LinearInAlpha) {
    Rng rng(9);
    for (int t = 0; t < 20; ++t) {
        const Dataset d = toy_data(15, 3, rng);
        KrrModel m = fit(d, KernelSpec::gaussian(0.9), 0.05);
        const Vector x = test::random_vector(3, rng);
        const double base = predict(m, x);
        const double c = rng.uniform(-3, 3);
        m.alpha *= c;
        EXPECT_NEAR(predict(m, x), c * base, 1e-12 * std::max(1.0, std::abs(c * base)));
    }
}

TEST(FitProperty, ObjectiveBelowZeroSolution) {
    Rng rng(10);
    for (int t = 0; t < 20; ++t) {
        const Dataset d = toy_data(30, 4, rng);
        const auto spec = KernelSpec::gaussian(rng.uniform(0.3, 2));
        const double lambda = std::pow(10.0, rng.uniform(-3, 0));
        const KrrModel m = fit(d, spec, lambda);
        const Matrix K = gram(spec, d.X);
        const double at_fit = objective(K, d.y, m.alpha, lambda);
        EXPECT_LE(at_fit, d.y.squaredNorm() / 30.0);
        // The fit is the minimizer, so small perturbations never do better.
        const Vector bump = test::random_vector(30, rng, -1e-3, 1e-3);
        EXPECT_LE(at_fit, objective(K, d.y, m.alpha + bump, lambda) + 1e-14);
    }
}

TEST(Linear, PrimalDualAgree) {
    Rng rng(11);
    for (auto [n, p] : {std::pair<Index, Index>{40, 10}, {10, 40}, {25, 25}}) {
        const Dataset d = toy_data(n, p, rng);
        const Vector a = linear_primal_solve(d, 0.03);
        const Vector b = linear_dual_solve(d, 0.03);
        EXPECT_LT((a - b).norm(), 1e-8 * std::max(1.0, a.norm()));
        EXPECT_EQ(fit_linear_primal(d, 0.03).dual, p > n);
    }
}

TEST(Linear, OneByOneHandCase) {
    // (1 + 1 + 2 * 0.5) b = 2 on unscaled data with p = 1.
    Dataset d{Matrix::Ones(2, 1), Vector::Ones(2)};
    const LinearFit f = fit_linear_primal(d, 0.5);
    EXPECT_NEAR(f.scaled(0), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(f.coef(0), 2.0 / 3.0, 1e-15);
}

TEST(Linear, CoefficientsMinimizeRidgeObjective) {
    Rng rng(12);
    const Dataset d = toy_data(30, 6, rng);
    const double lambda = 0.02;
    const Vector b = fit_linear_primal(d, lambda).coef;
    // Gradient of (1/n)|y - X b|^2 + lambda |b|^2 vanishes at the minimizer.
    const Vector grad = -2.0 / 30.0 * d.X.transpose() * (d.y - d.X * b) + 2.0 * lambda * b;
    EXPECT_LT(grad.norm(), 1e-12);
}

TEST(Linear, ConvergesToScaledTruthAsLambdaShrinks) {
    Rng rng(13);
    Dataset d{test::random_matrix(10, 3, rng), Vector()};
    Vector beta(3);
    beta << 1.5, -2.0, 0.5;
    d.y = d.X * beta;
    const Vector target = beta / std::sqrt(3.0);
    double prev = INFINITY;
    for (double lambda : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8}) {
        const double err = (fit_linear_primal(d, lambda).scaled - target).norm();
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-6);
}

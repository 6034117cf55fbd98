#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "kgvs/interaction.hpp"
#include "kgvs/simgen.hpp"
#include "test_util.hpp"

using namespace kgvs;

namespace {

using Pair = std::pair<Index, Index>;

PairScores random_table(const std::vector<Index>& subset, Rng& rng) {
    const auto m = static_cast<Index>(subset.size());
    PairScores s;
    s.subset = subset;
    s.table = Matrix(m, m);
    for (Index a = 0; a < m; ++a)
        for (Index b = a; b < m; ++b) s.table(a, b) = s.table(b, a) = rng.uniform(0, 1);
    return s;
}

ActiveSet first_k(Index k) {
    ActiveSet a;
    for (Index l = 0; l < k; ++l) a.indices.push_back(l);
    return a;
}

bool has_pair(const InteractionReport& r, Index l, Index k) {
    return std::find(r.pairs.begin(), r.pairs.end(), Pair{l, k}) != r.pairs.end();
}

bool off_diagonal_free(const InteractionReport& r) {
    return std::all_of(r.pairs.begin(), r.pairs.end(), [](const Pair& q) { return q.first == q.second; });
}

/// Example 2 design at p = 10 with the response replaced by `f`.
template <typename F>
Dataset example2_design(std::uint64_t seed, F f) {
    SimData sim = gen_example2(400, 10, 0.0, seed);
    Rng rng(derive_seed(seed, 99));
    for (Index i = 0; i < 400; ++i) sim.data.y(i) = f(sim.data.X.row(i)) + rng.normal();
    return sim.data;
}

/// Oracle active set, stability-tuned interaction threshold, same model for scoring.
InteractionReport tuned_report(const Dataset& d, const ActiveSet& active, std::uint64_t seed, bool diag = true) {
    PipelineConfig cfg = simulation_pipeline();
    cfg.seed = seed;
    const KrrModel m = fit_pipeline(d, cfg, *cfg.lambda, derive_seed(seed, kFullFitStream), 0);
    const StabilityTrace tr = tune_interaction_threshold(d, cfg, active, *cfg.lambda, diag);
    return select_interactions(m, d.X, active, tr.chosen, diag);
}

}  // namespace

TEST(Interaction, ThresholdAboveEveryScore) {
    Rng rng(1);
    PairScores s = random_table({2, 5, 7}, rng);
    const InteractionReport r = interactions_from_scores(s, s.table.maxCoeff(), true);
    EXPECT_TRUE(r.a2.empty());
    EXPECT_TRUE(r.pairs.empty());
    EXPECT_EQ(r.a1, (std::vector<Index>{2, 5, 7}));
}

TEST(InteractionProperty, PartitionAndHeredity) {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        std::vector<Index> subset;
        for (Index l = 0; l < 12; ++l)
            if (rng.below(2)) subset.push_back(l);
        const PairScores s = random_table(subset, rng);
        const bool diag = rng.below(2) == 1;
        const InteractionReport r = interactions_from_scores(s, rng.uniform(0.5, 1.0), diag);
        std::set<Index> in_pairs;
        for (auto [l, k] : r.pairs) {
            EXPECT_LE(l, k);
            if (!diag) EXPECT_NE(l, k);
            in_pairs.insert(l);
            in_pairs.insert(k);
        }
        EXPECT_EQ(std::vector<Index>(in_pairs.begin(), in_pairs.end()), r.a2);
        std::vector<Index> both;
        std::set_intersection(r.a1.begin(), r.a1.end(), r.a2.begin(), r.a2.end(), std::back_inserter(both));
        EXPECT_TRUE(both.empty());
        std::vector<Index> all;
        std::set_union(r.a1.begin(), r.a1.end(), r.a2.begin(), r.a2.end(), std::back_inserter(all));
        EXPECT_EQ(all, subset);
    }
}

TEST(InteractionProperty, MonotoneInThreshold) {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const PairScores s = random_table({0, 1, 2, 3, 4, 5}, rng);
        const double v = rng.uniform(0, 1), w = v + rng.uniform(0, 0.5);
        const InteractionReport a = interactions_from_scores(s, v, true), b = interactions_from_scores(s, w, true);
        EXPECT_TRUE(std::includes(a.a2.begin(), a.a2.end(), b.a2.begin(), b.a2.end()));
        EXPECT_TRUE(std::includes(a.pairs.begin(), a.pairs.end(), b.pairs.begin(), b.pairs.end()));
    }
}

TEST(Interaction, Errors) {
    const SimData sim = gen_example2(60, 6, 0.0, 4);
    const KrrModel lin = fit(sim.data, KernelSpec::linear(1.0), 0.1);
    EXPECT_THROW(select_interactions(lin, sim.data.X, first_k(3), 0.1), InputError);
    PipelineConfig cfg;
    cfg.kernel = KernelFamily::Linear;
    EXPECT_THROW(tune_interaction_threshold(sim.data, cfg, first_k(3), 0.1), InputError);
    cfg.kernel = KernelFamily::Gaussian;
    EXPECT_THROW(tune_interaction_threshold(sim.data, cfg, ActiveSet{}, 0.1), InputError);
    const KrrModel m = fit(sim.data, KernelSpec::gaussian(1.0), 0.1);
    EXPECT_THROW(select_interactions(m, sim.data.X, first_k(3), -1.0), InputError);
}

TEST(Interaction, EmptyActiveSet) {
    const SimData sim = gen_example2(60, 6, 0.0, 5);
    const KrrModel m = fit(sim.data, KernelSpec::gaussian(1.0), 0.1);
    const InteractionReport r = select_interactions(m, sim.data.X, ActiveSet{}, 0.1);
    EXPECT_TRUE(r.a1.empty());
    EXPECT_TRUE(r.a2.empty());
    EXPECT_TRUE(r.pairs.empty());
}

TEST(Interaction, NoDiagonalSkipsSquares) {
    Rng rng(6);
    PairScores s = random_table({0, 1, 2}, rng);
    s.table.diagonal().setConstant(10.0);
    s.table(0, 1) = s.table(1, 0) = 0.0;
    s.table(0, 2) = s.table(2, 0) = 0.0;
    s.table(1, 2) = s.table(2, 1) = 0.0;
    const InteractionReport with = interactions_from_scores(s, 1.0, true);
    const InteractionReport without = interactions_from_scores(s, 1.0, false);
    EXPECT_EQ(with.pairs, (std::vector<Pair>{{0, 0}, {1, 1}, {2, 2}}));
    EXPECT_TRUE(without.pairs.empty());
    EXPECT_EQ(without.a1, (std::vector<Index>{0, 1, 2}));
}

TEST(Interaction, ScoresComeFromTheMainEffectModel) {
    const SimData sim = gen_example2(80, 8, 0.0, 7);
    PipelineConfig cfg;
    cfg.threshold = 0.0;
    const SelectionReport rep = select(sim.data, cfg);
    const InteractionReport r = select_interactions(rep.model, sim.data.X, first_k(4), 0.0);
    const PairScores direct = second_order_scores(rep.model, sim.data.X, {0, 1, 2, 3});
    EXPECT_EQ(r.pair_scores.table, direct.table);
}

TEST(Interaction, QuadraticDiagonalStandsOut) {
    // y = 5 x4^2 + 6 x1 + 5 x5: the square of x4 against off-diagonal pairs that touch an
    // uninformative variable, and against the mixed pair of the two linear terms.
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset d = example2_design(
            400 + seed, [](const auto& x) { return 5.0 * x(3) * x(3) + 6.0 * x(0) + 5.0 * x(4); });
        PipelineConfig cfg = simulation_pipeline();
        const KrrModel m = fit_pipeline(d, cfg, *cfg.lambda, 1, 0);
        std::vector<Index> all(10);
        for (Index l = 0; l < 10; ++l) all[static_cast<std::size_t>(l)] = l;
        const Matrix T = second_order_scores(m, d.X, all).table;
        double null_off = 0;
        for (Index a = 0; a < 10; ++a)
            for (Index b = a + 1; b < 10; ++b)
                if (a >= 5 || b >= 5) null_off = std::max(null_off, T(a, b));
        EXPECT_GT(T(3, 3), 5.0 * null_off) << "seed " << seed;
        EXPECT_GT(T(3, 3), 5.0 * T(0, 4)) << "seed " << seed;
    }
}

TEST(Interaction, AdditiveSignalHasNoMixedPairs) {
    int ok_two = 0, ok_five = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset d = example2_design(500 + seed, [](const auto& x) { return 6.0 * x(0) + 5.0 * x(4); });
        if (off_diagonal_free(tuned_report(d, ActiveSet{{0, 4}, 0.0}, seed))) ++ok_two;
        if (off_diagonal_free(tuned_report(d, first_k(5), seed))) ++ok_five;
    }
    EXPECT_GE(ok_two, 9);
    EXPECT_GE(ok_five, 9);
}

TEST(Interaction, Example2TunedThresholdFindsTheProductTerm) {
    const std::vector<Index> product{0, 1, 2};
    const std::vector<Pair> cross{{0, 1}, {0, 2}, {1, 2}};
    int found = 0, top_ranked = 0, cross_only = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SimData sim = gen_example2(400, 10, 0.0, 600 + seed);
        const InteractionReport r = tuned_report(sim.data, first_k(5), seed);
        if (std::all_of(cross.begin(), cross.end(), [&](const Pair& q) { return has_pair(r, q.first, q.second); }) &&
            std::includes(r.a2.begin(), r.a2.end(), product.begin(), product.end()))
            ++found;
        // The four pairs with nonzero true mixed or pure second derivatives lead the ranking.
        const Matrix& T = r.pair_scores.table;
        const double weakest_true = std::min({T(0, 1), T(0, 2), T(1, 2), T(3, 3)});
        double strongest_null = 0;
        for (Index a = 0; a < 5; ++a)
            for (Index b = a; b < 5; ++b)
                if (!((a == 0 && (b == 1 || b == 2)) || (a == 1 && b == 2) || (a == 3 && b == 3)))
                    strongest_null = std::max(strongest_null, T(a, b));
        if (weakest_true > strongest_null) ++top_ranked;
        if (tuned_report(sim.data, first_k(5), seed, false).pairs == cross) ++cross_only;
    }
    EXPECT_GE(found, 8);
    EXPECT_GE(top_ranked, 7);
    EXPECT_GE(cross_only, 7);
}

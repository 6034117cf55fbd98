#pragma once

// Two-stage interaction selection: score second-order gradient norms over pairs drawn from
// a main-effect active set A, then split A into A2 (variables in some pair scoring above
// v_int) and A1 = A \ A2.

#include <algorithm>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "kgvs/common.hpp"
#include "kgvs/gradients.hpp"
#include "kgvs/krr.hpp"
#include "kgvs/selection.hpp"

namespace kgvs {

struct InteractionReport {
    std::vector<Index> a1;                        // main effect only
    std::vector<Index> a2;                        // involved in an interaction
    std::vector<std::pair<Index, Index>> pairs;   // (l, k) with l <= k, score > threshold
    PairScores pair_scores;
    double threshold = 0.0;
    bool include_diagonal = true;
};

/// Upper-triangle entries of a pair table in row-major order; the diagonal is skipped
/// when include_diagonal is false.
inline Vector flatten_pairs(const PairScores& s, bool include_diagonal) {
    const Index m = s.table.rows();
    std::vector<double> v;
    for (Index a = 0; a < m; ++a)
        for (Index b = include_diagonal ? a : a + 1; b < m; ++b) v.push_back(s.table(a, b));
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline InteractionReport interactions_from_scores(PairScores scores, double v_int, bool include_diagonal) {
    if (!(v_int >= 0.0)) throw InputError("interaction threshold must be nonnegative");
    InteractionReport rep;
    rep.threshold = v_int;
    rep.include_diagonal = include_diagonal;
    const Index m = scores.table.rows();
    std::set<Index> in_pairs;
    for (Index a = 0; a < m; ++a) {
        for (Index b = include_diagonal ? a : a + 1; b < m; ++b) {
            if (scores.table(a, b) > v_int) {
                const Index l = scores.subset[static_cast<std::size_t>(a)];
                const Index k = scores.subset[static_cast<std::size_t>(b)];
                rep.pairs.emplace_back(std::min(l, k), std::max(l, k));
                in_pairs.insert(l);
                in_pairs.insert(k);
            }
        }
    }
    std::sort(rep.pairs.begin(), rep.pairs.end());
    for (Index l : scores.subset) (in_pairs.count(l) ? rep.a2 : rep.a1).push_back(l);
    std::sort(rep.a1.begin(), rep.a1.end());
    std::sort(rep.a2.begin(), rep.a2.end());
    rep.pair_scores = std::move(scores);
    return rep;
}

/// Scores pairs over `active` with the same fitted model used for main effects.
/// An empty active set gives an empty report.
inline InteractionReport select_interactions(const KrrModel& model, const Matrix& X_eval, const ActiveSet& active,
                                             double v_int, bool include_diagonal = true, int threads = 0) {
    if (model.kernel.family == KernelFamily::Linear)
        throw InputError("interaction selection needs a curved kernel; the linear kernel has zero second derivatives");
    PairScores scores = second_order_scores(model, X_eval, active.indices, threads);
    return interactions_from_scores(std::move(scores), v_int, include_diagonal);
}

inline constexpr std::uint64_t kInteractionStream = 0x1A7E2AC7ULL;

/// Stability tuning of v_int. Each half is refitted with the main-effect pipeline and the
/// agreement is taken over the unordered pairs of `active`.
inline StabilityTrace tune_interaction_threshold(const Dataset& data, const PipelineConfig& cfg,
                                                 const ActiveSet& active, double lambda,
                                                 bool include_diagonal = true) {
    validate(data);
    if (active.indices.empty()) throw InputError("interaction tuning: active set is empty");
    if (cfg.kernel == KernelFamily::Linear)
        throw InputError("interaction selection needs a curved kernel; the linear kernel has zero second derivatives");
    return stability_search(data, cfg.grid, cfg.splits, derive_seed(cfg.seed, kInteractionStream), cfg.threads,
                            [&](const Dataset& half, std::uint64_t half_seed, int threads) {
                                const KrrModel m = fit_pipeline(half, cfg, lambda, half_seed, threads);
                                return flatten_pairs(second_order_scores(m, half.X, active.indices, threads),
                                                     include_diagonal);
                            });
}

}  // namespace kgvs

#pragma once

// Hard thresholding of gradient scores, stability-based threshold tuning, and the
// fit -> score -> threshold pipeline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kgvs/common.hpp"
#include "kgvs/gradients.hpp"
#include "kgvs/kernel.hpp"
#include "kgvs/krr.hpp"
#include "kgvs/parallel.hpp"
#include "kgvs/rng.hpp"

namespace kgvs {

/// Variables whose score is strictly above `threshold`; indices are 0-based and ascending.
struct ActiveSet {
    std::vector<Index> indices;
    double threshold = 0.0;

    bool contains(Index l) const { return std::binary_search(indices.begin(), indices.end(), l); }
    std::size_t size() const { return indices.size(); }
};

inline ActiveSet threshold(const Vector& scores, double v) {
    if (!(v >= 0.0)) throw InputError("threshold: v must be nonnegative");
    ActiveSet out;
    out.threshold = v;
    for (Index l = 0; l < scores.size(); ++l)
        if (scores(l) > v) out.indices.push_back(l);
    return out;
}

/// Cohen's kappa between two inclusion masks of equal length. Both-empty and both-full
/// tables are defined as 0.
inline double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
    if (a.size() != b.size()) throw InputError("cohen_kappa: mask lengths differ");
    const auto total = static_cast<double>(a.size());
    if (a.empty()) return 0.0;
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] && b[i]) ++n11;
        else if (a[i]) ++n10;
        else if (b[i]) ++n01;
        else ++n00;
    }
    const bool both_empty = n11 + n10 + n01 == 0.0;
    const bool both_full = n00 + n10 + n01 == 0.0;
    if (both_empty || both_full) return 0.0;
    const double po = (n11 + n00) / total;
    const double pe = ((n11 + n10) * (n11 + n01) + (n01 + n00) * (n10 + n00)) / (total * total);
    if (pe >= 1.0) return 0.0;
    return (po - pe) / (1.0 - pe);
}

/// {10^(lo + (hi - lo) s / (steps - 1)) : s = 0..steps-1}.
inline std::vector<double> log_grid(double lo_exp, double hi_exp, int steps) {
    if (steps < 1) throw InputError("grid: need at least one step");
    if (steps > 1 && !(hi_exp > lo_exp)) throw InputError("grid: max exponent must exceed min exponent");
    std::vector<double> g;
    g.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        const double e = steps == 1 ? lo_exp : lo_exp + (hi_exp - lo_exp) * s / (steps - 1);
        g.push_back(std::pow(10.0, e));
    }
    return g;
}

/// {10^(-3 + 0.1 s) : s = 0..60}.
inline std::vector<double> default_grid() { return log_grid(-3.0, 3.0, 61); }

struct StabilityTrace {
    std::vector<double> grid;
    std::vector<double> stability;  // mean kappa per grid value
    double chosen = 0.0;
    std::size_t chosen_index = 0;
    int splits = 0;
    std::uint64_t seed = 0;
};

inline void validate_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw InputError("stability: threshold grid is empty");
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (!(grid[g] >= 0.0) || !std::isfinite(grid[g])) throw InputError("stability: grid values must be finite and >= 0");
        if (g > 0 && !(grid[g] > grid[g - 1])) throw InputError("stability: grid must be strictly ascending");
    }
}

/// Shared split-and-compare machinery. For each split b, the rows are permuted with a seed
/// derived from (seed, b) and cut into halves of size floor(n/2) and ceil(n/2);
/// score_half(half, half_seed) returns one score per item for that half. stability(v) is the
/// mean over splits of the kappa between {item: score > v} on the two halves. The chosen
/// value maximizes stability, ties going to the largest grid value.
using HalfScorer = std::function<Vector(const Dataset& half, std::uint64_t half_seed, int threads)>;

inline StabilityTrace stability_search(const Dataset& data, const std::vector<double>& grid, int splits,
                                       std::uint64_t seed, int threads, const HalfScorer& score_half) {
    validate_grid(grid);
    if (splits < 1) throw InputError("stability: need at least one split");
    if (data.n() < 4) throw NumericalError("stability: need n >= 4 to split the sample");
    const Index n = data.n();
    const std::size_t G = grid.size();
    std::vector<std::vector<double>> kappas(static_cast<std::size_t>(splits), std::vector<double>(G, 0.0));

    const int outer = resolve_threads(threads);
    const int inner = splits > 1 && outer > 1 ? 1 : outer;
    parallel_for(static_cast<std::size_t>(splits), outer, [&](std::size_t b) {
        const std::uint64_t split_seed = derive_seed(seed, b);
        Rng rng(derive_seed(split_seed, 0));
        const auto perm = rng.permutation(n);
        const auto cut = static_cast<std::ptrdiff_t>(n / 2);
        const std::vector<Index> first(perm.begin(), perm.begin() + cut);
        const std::vector<Index> second(perm.begin() + cut, perm.end());
        const Vector s1 = score_half(take_rows(data, first), derive_seed(split_seed, 1), inner);
        const Vector s2 = score_half(take_rows(data, second), derive_seed(split_seed, 2), inner);
        if (s1.size() != s2.size()) throw NumericalError("stability: halves produced different score counts");
        std::vector<bool> a(static_cast<std::size_t>(s1.size())), c(a.size());
        for (std::size_t g = 0; g < G; ++g) {
            for (Index l = 0; l < s1.size(); ++l) {
                a[static_cast<std::size_t>(l)] = s1(l) > grid[g];
                c[static_cast<std::size_t>(l)] = s2(l) > grid[g];
            }
            kappas[b][g] = cohen_kappa(a, c);
        }
    });

    StabilityTrace trace;
    trace.grid = grid;
    trace.splits = splits;
    trace.seed = seed;
    trace.stability.assign(G, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
        double s = 0.0;
        for (int b = 0; b < splits; ++b) s += kappas[static_cast<std::size_t>(b)][g];
        trace.stability[g] = s / splits;
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < G; ++g)
        if (trace.stability[g] >= trace.stability[best]) best = g;
    trace.chosen_index = best;
    trace.chosen = grid[best];
    return trace;
}

/// Everything needed to run selection end to end. Unset optionals fall back to the
/// defaults: lambda = n^{-1/3} (log n)^{2/3}, the median-distance bandwidth, and stability
/// tuning.
struct PipelineConfig {
    KernelFamily kernel = KernelFamily::Gaussian;
    std::optional<double> lambda;
    std::optional<double> bandwidth;
    double linear_scale = 1.0;
    std::optional<Index> nystrom_rank;
    std::optional<double> threshold;
    std::vector<double> grid = default_grid();
    int splits = 20;
    std::uint64_t seed = 0;
    int threads = 0;
    /// Subtract the mean of y (and, for the linear kernel, of each column) before fitting.
    bool center = true;
};

inline double resolve_lambda(const PipelineConfig& cfg, Index n) {
    if (cfg.lambda) {
        if (!(*cfg.lambda > 0.0) || !std::isfinite(*cfg.lambda)) throw InputError("lambda must be positive");
        return *cfg.lambda;
    }
    if (n < 3) throw NumericalError("default lambda needs at least 3 observations");
    return default_lambda(n, 1.0);
}

/// Centers, picks the bandwidth, and fits. `lambda` is already resolved; `seed` drives
/// Nystrom landmark sampling.
inline KrrModel fit_pipeline(const Dataset& data, const PipelineConfig& cfg, double lambda, std::uint64_t seed,
                             int threads) {
    validate(data);
    Dataset d = data;
    Eigen::RowVectorXd x_offset;
    double y_offset = 0.0;
    if (cfg.center) {
        y_offset = d.y.mean();
        d.y.array() -= y_offset;
        if (cfg.kernel == KernelFamily::Linear) {
            x_offset = d.X.colwise().mean();
            d.X.rowwise() -= x_offset;
        }
    }

    KernelSpec spec;
    std::shared_ptr<const Matrix> K;
    if (cfg.kernel == KernelFamily::Gaussian) {
        const bool exact_median = !cfg.bandwidth && d.n() <= kMedianExactRows;
        Matrix D2;
        if (exact_median || !cfg.nystrom_rank) D2 = pairwise_sq_dists(d.X, threads);
        const double bw = cfg.bandwidth ? *cfg.bandwidth
                          : exact_median ? median_distance(D2)
                                         : median_bandwidth(d.X, threads);
        spec = KernelSpec::gaussian(bw);
        if (!cfg.nystrom_rank) K = std::make_shared<const Matrix>(gaussian_gram(bw, D2));
    } else {
        spec = KernelSpec::linear(cfg.linear_scale);
    }

    KrrModel model = cfg.nystrom_rank
                         ? fit_nystrom(d, spec, lambda, std::min<Index>(*cfg.nystrom_rank, d.n()), seed, threads)
                         : fit(d, spec, lambda, std::move(K), threads);
    model.x_offset = std::move(x_offset);
    model.y_offset = y_offset;
    return model;
}

/// Stability tuning of the main-effect threshold: each half is refitted from scratch
/// (bandwidth recomputed, lambda held at `lambda`) and scored on its own rows.
inline StabilityTrace stability_tune(const Dataset& data, const PipelineConfig& cfg, double lambda) {
    validate(data);
    return stability_search(data, cfg.grid, cfg.splits, cfg.seed, cfg.threads,
                            [&](const Dataset& half, std::uint64_t half_seed, int threads) {
                                const KrrModel m = fit_pipeline(half, cfg, lambda, half_seed, threads);
                                return first_order_scores(m, half.X, threads).first_order;
                            });
}

struct SelectionReport {
    double lambda = 0.0;
    KrrModel model;
    GradientScores scores;
    ActiveSet active;
    std::optional<StabilityTrace> trace;
};

/// Seed stream used for the full-data Nystrom landmarks, distinct from the split streams.
inline constexpr std::uint64_t kFullFitStream = 0xF011F17ULL;

/// bandwidth -> fit -> first-order scores -> threshold (explicit or stability-tuned).
inline SelectionReport select(const Dataset& data, const PipelineConfig& cfg) {
    validate(data);
    if (cfg.threshold && !(*cfg.threshold >= 0.0)) throw InputError("threshold must be nonnegative");
    SelectionReport rep;
    rep.lambda = resolve_lambda(cfg, data.n());
    rep.model = fit_pipeline(data, cfg, rep.lambda, derive_seed(cfg.seed, kFullFitStream), cfg.threads);
    rep.scores = first_order_scores(rep.model, data.X, cfg.threads);
    double v;
    if (cfg.threshold) {
        v = *cfg.threshold;
    } else {
        rep.trace = stability_tune(data, cfg, rep.lambda);
        v = rep.trace->chosen;
    }
    rep.active = threshold(rep.scores.first_order, v);
    return rep;
}

}  // namespace kgvs

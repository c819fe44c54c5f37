#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <vector>

#include "betkit/testers.hpp"

namespace betkit {

/// Log-wealth series of one test per concept; entry t-1 holds log K_t.
struct ConceptTrajectories {
    std::vector<std::vector<double>> log_wealth;
    double alpha = 0.05;

    std::size_t concepts() const noexcept { return log_wealth.size(); }
};

struct FdrRejection {
    std::size_t concept_id = 0;
    /// First step at which the concept's wealth reached the threshold of its round.
    std::size_t adjusted_tau = 0;
    /// Log-wealth at adjusted_tau.
    double log_wealth = 0.0;
};

struct RankOutput {
    /// Rejected concepts in acceptance order.
    std::vector<FdrRejection> rejected;
    /// Per-concept membership in the rejected set.
    std::vector<bool> is_rejected;

    std::size_t size() const noexcept { return rejected.size(); }
};

/// Greedy FDR post-processor. Round s accepts the unrejected concept whose wealth first
/// reaches m / (alpha * s); ties prefer larger wealth at that step, then lower index.
/// Stops at the first round nobody reaches its threshold.
RankOutput greedy_fdr(const ConceptTrajectories& trajectories);

/// Every rejected concept has K at its adjusted time >= m / (alpha |S|).
bool is_self_consistent(const ConceptTrajectories& trajectories, const RankOutput& rank);

struct ConceptSummary {
    double rejection_rate = 0.0;
    double mean_normalized_tau = 1.0;
};

/// Means over repetitions; non-rejections count as normalized time 1.
ConceptSummary aggregate_outcomes(std::span<const TestOutcome> outcomes);

/// Rank-agreement of `other` against `reference` (each lists item ids from most to least
/// important). Pair weights are additive hyperbolic in the reference ranks:
/// w_ij = 1/(r_i + 1) + 1/(r_j + 1), ranks 0-based. Not symmetric in its arguments.
double weighted_kendall_tau(std::span<const std::size_t> reference,
                            std::span<const std::size_t> other);

/// Fraction of concepts on which rate > alpha agrees between the two vectors.
double importance_agreement(std::span<const double> rates_a, std::span<const double> rates_b,
                            double alpha);

/// F1 of predicted versus ground-truth important concepts; 0 when both precision and
/// recall vanish.
double importance_f1(const std::set<std::size_t>& predicted, const std::set<std::size_t>& truth,
                     std::size_t universe);

}  // namespace betkit

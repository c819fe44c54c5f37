#include "betkit/multiplicity.hpp"

#include <cmath>
#include <limits>

namespace betkit {

RankOutput greedy_fdr(const ConceptTrajectories& traj) {
    const std::size_t m = traj.concepts();
    if (m == 0) throw ConfigError("greedy FDR needs at least one concept");
    if (!(traj.alpha > 0.0 && traj.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");

    RankOutput out;
    out.is_rejected.assign(m, false);
    for (std::size_t s = 1; s <= m; ++s) {
        const double threshold =
            std::log(static_cast<double>(m) / (traj.alpha * static_cast<double>(s)));
        std::size_t best = m;
        std::size_t best_tau = std::numeric_limits<std::size_t>::max();
        double best_wealth = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            if (out.is_rejected[j]) continue;
            const auto& series = traj.log_wealth[j];
            for (std::size_t t = 0; t < series.size() && t + 1 <= best_tau; ++t) {
                if (series[t] < threshold) continue;
                const std::size_t tau = t + 1;
                if (tau < best_tau || series[t] > best_wealth) {
                    best = j;
                    best_tau = tau;
                    best_wealth = series[t];
                }
                break;
            }
        }
        if (best == m) break;
        out.is_rejected[best] = true;
        out.rejected.push_back({best, best_tau, best_wealth});
    }
    return out;
}

bool is_self_consistent(const ConceptTrajectories& traj, const RankOutput& rank) {
    if (rank.rejected.empty()) return true;
    const double bound = std::log(static_cast<double>(traj.concepts()) /
                                  (traj.alpha * static_cast<double>(rank.size())));
    for (const auto& r : rank.rejected) {
        const auto& series = traj.log_wealth.at(r.concept_id);
        if (r.adjusted_tau == 0 || r.adjusted_tau > series.size()) return false;
        if (series[r.adjusted_tau - 1] < bound) return false;
    }
    return true;
}

ConceptSummary aggregate_outcomes(std::span<const TestOutcome> outcomes) {
    ConceptSummary s;
    if (outcomes.empty()) return s;
    double rejections = 0.0, tau = 0.0;
    for (const auto& o : outcomes) {
        rejections += o.rejected ? 1.0 : 0.0;
        tau += o.rejected ? o.normalized_tau : 1.0;
    }
    const auto n = static_cast<double>(outcomes.size());
    s.rejection_rate = rejections / n;
    s.mean_normalized_tau = tau / n;
    return s;
}

namespace {

std::vector<std::size_t> rank_positions(std::span<const std::size_t> order, std::size_t m) {
    std::vector<std::size_t> pos(m, m);
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (order[r] >= m || pos[order[r]] != m) {
            throw ConfigError("rankings must be permutations of the same items");
        }
        pos[order[r]] = r;
    }
    return pos;
}

}  // namespace

double weighted_kendall_tau(std::span<const std::size_t> reference,
                            std::span<const std::size_t> other) {
    if (reference.size() != other.size()) throw ConfigError("rankings differ in length");
    const std::size_t m = reference.size();
    const auto ref = rank_positions(reference, m);
    const auto oth = rank_positions(other, m);
    double num = 0.0, den = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            const double w = 1.0 / static_cast<double>(ref[a] + 1) +
                             1.0 / static_cast<double>(ref[b] + 1);
            const bool concordant = (ref[a] < ref[b]) == (oth[a] < oth[b]);
            num += concordant ? w : -w;
            den += w;
        }
    }
    return den > 0.0 ? num / den : 1.0;
}

double importance_agreement(std::span<const double> rates_a, std::span<const double> rates_b,
                            double alpha) {
    if (rates_a.size() != rates_b.size()) throw ConfigError("rate vectors differ in length");
    if (rates_a.empty()) return 1.0;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < rates_a.size(); ++i) {
        agree += (rates_a[i] > alpha) == (rates_b[i] > alpha) ? 1 : 0;
    }
    return static_cast<double>(agree) / static_cast<double>(rates_a.size());
}

double importance_f1(const std::set<std::size_t>& predicted, const std::set<std::size_t>& truth,
                     std::size_t universe) {
    for (std::size_t x : predicted)
        if (x >= universe) throw ConfigError("predicted concept outside the universe");
    for (std::size_t x : truth)
        if (x >= universe) throw ConfigError("ground-truth concept outside the universe");
    std::size_t tp = 0;
    for (std::size_t x : predicted) tp += truth.count(x);
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(predicted.size());
    const double recall = static_cast<double>(tp) / static_cast<double>(truth.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace betkit

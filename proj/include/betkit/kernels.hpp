#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace betkit {

enum class KernelFamily { linear, rbf };

struct FixedBandwidth {
    double sigma = 1.0;
};

/// Bandwidth = q-quantile of pairwise distances among previous observations.
struct QuantileBandwidth {
    double q = 0.5;
};

struct KernelSpec {
    KernelFamily family = KernelFamily::rbf;
    std::variant<FixedBandwidth, QuantileBandwidth> bandwidth_rule = QuantileBandwidth{0.5};
    double fallback_bandwidth = 1.0;

    static KernelSpec linear() { return {KernelFamily::linear, QuantileBandwidth{0.5}, 1.0}; }
    static KernelSpec rbf_quantile(double q) { return {KernelFamily::rbf, QuantileBandwidth{q}, 1.0}; }
    static KernelSpec rbf_fixed(double sigma) { return {KernelFamily::rbf, FixedBandwidth{sigma}, 1.0}; }

    /// Throws ConfigError unless sigma > 0, q in (0,1] and the fallback is positive.
    void validate() const;
};

/// linear: <x,y>.  rbf: exp(-|x-y|^2 / (2 sigma^2)).
double eval_kernel(const KernelSpec& spec, double bandwidth, std::span<const double> x,
                   std::span<const double> y);

double eval_kernel(const KernelSpec& spec, double bandwidth, double x, double y);

/// Linearly interpolated q-quantile of an ascending-sorted sample.
double interpolated_quantile(std::span<const double> sorted, double q);

/// Bandwidth for `spec` given the observations seen so far (brute force over all pairs).
double bandwidth_from_history(const KernelSpec& spec,
                              const std::vector<std::vector<double>>& history);

/// Maintains every pairwise Euclidean distance among a growing point set and answers
/// exact interpolated quantile queries.
///
/// Distances live in a large sorted run plus a smaller sorted pending run; order
/// statistics are read across both runs by binary search, and the pending run is
/// folded into the main run once it outgrows sqrt(|main| * batch).  Per-insert cost
/// is O(t^1.5) instead of the O(t^2) of keeping a single sorted vector.
class PairwiseDistanceQuantile {
public:
    explicit PairwiseDistanceQuantile(std::size_t dim = 1) : dim_(dim) {}

    void add(std::span<const double> point);
    void add(double value) { add(std::span<const double>(&value, 1)); }

    std::size_t points() const noexcept { return count_; }
    std::size_t pairs() const noexcept { return main_.size() + pending_.size(); }
    std::size_t dim() const noexcept { return dim_; }

    /// Interpolated q-quantile of all pairwise distances. Requires pairs() > 0.
    double quantile(double q) const;

private:
    double kth(std::size_t k) const;

    std::size_t dim_;
    std::size_t count_ = 0;
    std::vector<double> coords_;
    std::vector<double> main_;
    std::vector<double> pending_;
    std::vector<double> scratch_;
};

/// Incremental counterpart of bandwidth_from_history.
class BandwidthTracker {
public:
    BandwidthTracker(KernelSpec spec, std::size_t dim);

    void add(std::span<const double> point);
    void add(double value) { add(std::span<const double>(&value, 1)); }

    /// Bandwidth implied by all points added so far.
    double bandwidth() const;
    const KernelSpec& spec() const noexcept { return spec_; }

private:
    KernelSpec spec_;
    bool tracks_ = false;
    PairwiseDistanceQuantile distances_;
};

}  // namespace betkit

#include "betkit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "betkit/common.hpp"

namespace betkit {

void KernelSpec::validate() const {
    if (!(fallback_bandwidth > 0.0)) throw ConfigError("fallback bandwidth must be positive");
    if (const auto* f = std::get_if<FixedBandwidth>(&bandwidth_rule)) {
        if (!(f->sigma > 0.0)) throw ConfigError("fixed bandwidth must be positive");
    } else {
        const double q = std::get<QuantileBandwidth>(bandwidth_rule).q;
        if (!(q > 0.0 && q <= 1.0)) throw ConfigError("bandwidth quantile must lie in (0,1]");
    }
}

double eval_kernel(const KernelSpec& spec, double bandwidth, std::span<const double> x,
                   std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) throw ConfigError("kernel: dimension mismatch");
    if (spec.family == KernelFamily::linear) return dot(x, y);
    if (!(bandwidth > 0.0)) throw ConfigError("kernel: bandwidth must be positive");
    return std::exp(-squared_distance(x, y) / (2.0 * bandwidth * bandwidth));
}

double eval_kernel(const KernelSpec& spec, double bandwidth, double x, double y) {
    return eval_kernel(spec, bandwidth, std::span<const double>(&x, 1),
                       std::span<const double>(&y, 1));
}

double interpolated_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ConfigError("quantile of empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double bandwidth_from_history(const KernelSpec& spec,
                              const std::vector<std::vector<double>>& history) {
    spec.validate();
    if (const auto* f = std::get_if<FixedBandwidth>(&spec.bandwidth_rule)) return f->sigma;
    if (spec.family == KernelFamily::linear || history.size() < 2) {
        return spec.fallback_bandwidth;
    }
    std::vector<double> distances;
    distances.reserve(history.size() * (history.size() - 1) / 2);
    for (std::size_t i = 0; i < history.size(); ++i) {
        for (std::size_t j = i + 1; j < history.size(); ++j) {
            distances.push_back(std::sqrt(squared_distance(history[i], history[j])));
        }
    }
    std::sort(distances.begin(), distances.end());
    const double value =
        interpolated_quantile(distances, std::get<QuantileBandwidth>(spec.bandwidth_rule).q);
    return value > 0.0 ? value : spec.fallback_bandwidth;
}

void PairwiseDistanceQuantile::add(std::span<const double> point) {
    if (point.size() != dim_) throw ConfigError("distance tracker: dimension mismatch");
    scratch_.clear();
    scratch_.reserve(count_);
    for (std::size_t i = 0; i < count_; ++i) {
        std::span<const double> other(coords_.data() + i * dim_, dim_);
        scratch_.push_back(std::sqrt(squared_distance(other, point)));
    }
    coords_.insert(coords_.end(), point.begin(), point.end());
    ++count_;
    if (scratch_.empty()) return;

    std::sort(scratch_.begin(), scratch_.end());
    const std::size_t mid = pending_.size();
    pending_.insert(pending_.end(), scratch_.begin(), scratch_.end());
    std::inplace_merge(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(mid),
                       pending_.end());

    const double limit =
        std::max(256.0, std::sqrt(static_cast<double>(main_.size()) *
                                  static_cast<double>(scratch_.size())));
    if (static_cast<double>(pending_.size()) > limit) {
        const std::size_t split = main_.size();
        main_.insert(main_.end(), pending_.begin(), pending_.end());
        std::inplace_merge(main_.begin(), main_.begin() + static_cast<std::ptrdiff_t>(split),
                           main_.end());
        pending_.clear();
    }
}

double PairwiseDistanceQuantile::kth(std::size_t k) const {
    const auto& a = main_;
    const auto& b = pending_;
    // Take i elements from a and k+1-i from b; find the smallest i with a[i] >= b[k-i].
    std::size_t lo = (k + 1 > b.size()) ? k + 1 - b.size() : 0;
    std::size_t hi = std::min(k + 1, a.size());
    while (lo < hi) {
        const std::size_t i = lo + (hi - lo) / 2;
        const std::size_t j = k + 1 - i;
        if (a[i] < b[j - 1]) {
            lo = i + 1;
        } else {
            hi = i;
        }
    }
    const std::size_t j = k + 1 - lo;
    const double from_a = lo > 0 ? a[lo - 1] : -std::numeric_limits<double>::infinity();
    const double from_b = j > 0 ? b[j - 1] : -std::numeric_limits<double>::infinity();
    return std::max(from_a, from_b);
}

double PairwiseDistanceQuantile::quantile(double q) const {
    const std::size_t n = pairs();
    if (n == 0) throw ConfigError("quantile of empty distance set");
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    const double low = kth(lo);
    if (frac == 0.0) return low;
    return low + frac * (kth(hi) - low);
}

BandwidthTracker::BandwidthTracker(KernelSpec spec, std::size_t dim)
    : spec_(spec), distances_(dim) {
    spec_.validate();
    tracks_ = spec_.family == KernelFamily::rbf &&
              std::holds_alternative<QuantileBandwidth>(spec_.bandwidth_rule);
}

void BandwidthTracker::add(std::span<const double> point) {
    if (tracks_) distances_.add(point);
}

double BandwidthTracker::bandwidth() const {
    if (const auto* f = std::get_if<FixedBandwidth>(&spec_.bandwidth_rule)) return f->sigma;
    if (!tracks_ || distances_.points() < 2) return spec_.fallback_bandwidth;
    const double value = distances_.quantile(std::get<QuantileBandwidth>(spec_.bandwidth_rule).q);
    return value > 0.0 ? value : spec_.fallback_bandwidth;
}

}  // namespace betkit

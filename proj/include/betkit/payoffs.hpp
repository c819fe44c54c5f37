#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "betkit/kernels.hpp"

namespace betkit {

/// tanh clipped to the open interval (-1,1) so a full bet can never zero the wealth.
double bounded_tanh(double x);

/// One (prediction, concept) observation.
struct PairObservation {
    double y = 0.0;
    double z = 0.0;
};

/// Plug-in witness for the independence MMD between (Y, Z_j) and the product of marginals.
///
/// rho(y, z) = mean_i kY(y_i,y) kZ(z_i,z) - mean_i kY(y_i,y) * mean_i kZ(z_i,z)
/// over every stored observation (V-statistic means; no diagonal removal).
class SkitPayoff {
public:
    SkitPayoff(KernelSpec kernel_y, KernelSpec kernel_z);

    /// Zero while the history is empty.
    double rho(double y, double z) const;

    /// Swaps the concept coordinates of the two observations to build the null pair,
    /// returns tanh(rho(d1) + rho(d2) - rho(d1~) - rho(d2~)) and then stores d1, d2.
    double step(const PairObservation& d1, const PairObservation& d2);

    /// Stores an observation without betting; bandwidths refresh immediately.
    void append(const PairObservation& d);

    std::span<const double> history_y() const noexcept { return ys_; }
    std::span<const double> history_z() const noexcept { return zs_; }
    double bandwidth_y() const noexcept { return bw_y_; }
    double bandwidth_z() const noexcept { return bw_z_; }
    const KernelSpec& kernel_y() const noexcept { return kernel_y_; }
    const KernelSpec& kernel_z() const noexcept { return kernel_z_; }

private:
    KernelSpec kernel_y_;
    KernelSpec kernel_z_;
    BandwidthTracker tracker_y_;
    BandwidthTracker tracker_z_;
    double bw_y_;
    double bw_z_;
    std::vector<double> ys_;
    std::vector<double> zs_;
};

/// (prediction, tested concept, remaining concepts) triplet.
struct TripletObservation {
    double y = 0.0;
    double zj = 0.0;
    std::vector<double> zrest;
};

/// Plug-in witness for the MMD between (Y, Z_j, Z_-j) and (Y, Z~_j, Z_-j), Z~_j drawn
/// from the conditional of Z_j given Z_-j. Joint kernels are tensor products.
class CskitPayoff {
public:
    CskitPayoff(KernelSpec kernel_y, KernelSpec kernel_zj, KernelSpec kernel_rest,
                std::size_t rest_dim);

    double rho(double y, double zj, std::span<const double> zrest) const;

    /// tanh(rho(y, zj, zrest) - rho(y, zj_tilde, zrest)); then stores the observed triplet
    /// and its resampled twin.
    double step(const TripletObservation& obs, double zj_tilde);

    /// Stores an (observed, resampled) pair of triplets without betting.
    void append(const TripletObservation& observed, const TripletObservation& resampled);

    std::size_t size() const noexcept { return ys_.size(); }
    std::size_t rest_dim() const noexcept { return rest_dim_; }
    double bandwidth_y() const noexcept { return bw_y_; }
    double bandwidth_zj() const noexcept { return bw_zj_; }
    double bandwidth_rest() const noexcept { return bw_rest_; }
    const KernelSpec& kernel_y() const noexcept { return kernel_y_; }
    const KernelSpec& kernel_zj() const noexcept { return kernel_zj_; }
    const KernelSpec& kernel_rest() const noexcept { return kernel_rest_; }

private:
    void check_rest(std::span<const double> zrest) const;
    double rest_kernel(std::span<const double> a, std::span<const double> b) const;

    KernelSpec kernel_y_;
    KernelSpec kernel_zj_;
    KernelSpec kernel_rest_;
    std::size_t rest_dim_;
    BandwidthTracker tracker_y_;
    BandwidthTracker tracker_zj_;
    BandwidthTracker tracker_rest_;
    double bw_y_;
    double bw_zj_;
    double bw_rest_;
    // Observed history.
    std::vector<double> ys_, zjs_, rests_;
    // Resampled history.
    std::vector<double> tys_, tzjs_, trests_;
    // True while every resampled triplet shares y and z_-j with its observed twin.
    bool twins_share_context_ = true;
};

/// Plug-in witness for the MMD between responses with and without the tested concept.
class XskitPayoff {
public:
    explicit XskitPayoff(KernelSpec kernel_y);

    double rho(double y) const;

    /// tanh(rho(y_test) - rho(y_null)); then stores both responses.
    double step(double y_test, double y_null);

    void append(double y_test, double y_null);

    std::span<const double> history_test() const noexcept { return test_; }
    std::span<const double> history_null() const noexcept { return null_; }
    double bandwidth() const noexcept { return bw_; }
    const KernelSpec& kernel() const noexcept { return kernel_; }

private:
    KernelSpec kernel_;
    BandwidthTracker tracker_;
    double bw_;
    std::vector<double> test_;
    std::vector<double> null_;
};

}  // namespace betkit

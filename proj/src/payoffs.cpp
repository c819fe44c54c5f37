#include "betkit/payoffs.hpp"

#include <cmath>

#include "betkit/common.hpp"

namespace betkit {

namespace {

constexpr double kPayoffLimit = 1.0 - 1e-12;

/// Scalar kernel with the bandwidth folded in once per evaluation batch.
struct ScalarKernel {
    bool linear;
    double inv_two_sigma_sq;

    ScalarKernel(const KernelSpec& spec, double bandwidth)
        : linear(spec.family == KernelFamily::linear),
          inv_two_sigma_sq(1.0 / (2.0 * bandwidth * bandwidth)) {}

    double operator()(double a, double b) const {
        if (linear) return a * b;
        const double d = a - b;
        return std::exp(-d * d * inv_two_sigma_sq);
    }
};

}  // namespace

double bounded_tanh(double x) {
    const double t = std::tanh(x);
    if (t > kPayoffLimit) return kPayoffLimit;
    if (t < -kPayoffLimit) return -kPayoffLimit;
    return t;
}

// ---------------------------------------------------------------------------
// SKIT

SkitPayoff::SkitPayoff(KernelSpec kernel_y, KernelSpec kernel_z)
    : kernel_y_(kernel_y),
      kernel_z_(kernel_z),
      tracker_y_(kernel_y, 1),
      tracker_z_(kernel_z, 1),
      bw_y_(tracker_y_.bandwidth()),
      bw_z_(tracker_z_.bandwidth()) {}

double SkitPayoff::rho(double y, double z) const {
    const std::size_t n = ys_.size();
    if (n == 0) return 0.0;
    const ScalarKernel ky(kernel_y_, bw_y_);
    const ScalarKernel kz(kernel_z_, bw_z_);
    double joint = 0.0, sum_y = 0.0, sum_z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = ky(ys_[i], y);
        const double b = kz(zs_[i], z);
        joint += a * b;
        sum_y += a;
        sum_z += b;
    }
    const double inv = 1.0 / static_cast<double>(n);
    return joint * inv - (sum_y * inv) * (sum_z * inv);
}

double SkitPayoff::step(const PairObservation& d1, const PairObservation& d2) {
    double kappa = 0.0;
    const std::size_t n = ys_.size();
    if (n > 0) {
        const ScalarKernel ky(kernel_y_, bw_y_);
        const ScalarKernel kz(kernel_z_, bw_z_);
        double sy1 = 0, sy2 = 0, sz1 = 0, sz2 = 0;
        double s11 = 0, s22 = 0, s12 = 0, s21 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a1 = ky(ys_[i], d1.y), a2 = ky(ys_[i], d2.y);
            const double b1 = kz(zs_[i], d1.z), b2 = kz(zs_[i], d2.z);
            sy1 += a1;
            sy2 += a2;
            sz1 += b1;
            sz2 += b2;
            s11 += a1 * b1;
            s22 += a2 * b2;
            s12 += a1 * b2;
            s21 += a2 * b1;
        }
        const double inv = 1.0 / static_cast<double>(n);
        auto rho_of = [&](double joint, double my, double mz) {
            return joint * inv - (my * inv) * (mz * inv);
        };
        const double observed = rho_of(s11, sy1, sz1) + rho_of(s22, sy2, sz2);
        const double swapped = rho_of(s12, sy1, sz2) + rho_of(s21, sy2, sz1);
        kappa = bounded_tanh(observed - swapped);
    }
    append(d1);
    append(d2);
    return kappa;
}

void SkitPayoff::append(const PairObservation& d) {
    ys_.push_back(d.y);
    zs_.push_back(d.z);
    tracker_y_.add(d.y);
    tracker_z_.add(d.z);
    bw_y_ = tracker_y_.bandwidth();
    bw_z_ = tracker_z_.bandwidth();
}

// ---------------------------------------------------------------------------
// c-SKIT

CskitPayoff::CskitPayoff(KernelSpec kernel_y, KernelSpec kernel_zj, KernelSpec kernel_rest,
                         std::size_t rest_dim)
    : kernel_y_(kernel_y),
      kernel_zj_(kernel_zj),
      kernel_rest_(kernel_rest),
      rest_dim_(rest_dim),
      tracker_y_(kernel_y, 1),
      tracker_zj_(kernel_zj, 1),
      tracker_rest_(kernel_rest, rest_dim == 0 ? 1 : rest_dim),
      bw_y_(tracker_y_.bandwidth()),
      bw_zj_(tracker_zj_.bandwidth()),
      bw_rest_(tracker_rest_.bandwidth()) {}

void CskitPayoff::check_rest(std::span<const double> zrest) const {
    if (zrest.size() != rest_dim_) throw ConfigError("c-SKIT: conditioning vector length mismatch");
}

double CskitPayoff::rest_kernel(std::span<const double> a, std::span<const double> b) const {
    // An empty conditioning set carries no information: constant kernel.
    if (rest_dim_ == 0) return 1.0;
    if (kernel_rest_.family == KernelFamily::linear) return dot(a, b);
    return std::exp(-squared_distance(a, b) / (2.0 * bw_rest_ * bw_rest_));
}

double CskitPayoff::rho(double y, double zj, std::span<const double> zrest) const {
    check_rest(zrest);
    const std::size_t n = ys_.size();
    if (n == 0) return 0.0;
    const ScalarKernel ky(kernel_y_, bw_y_);
    const ScalarKernel kz(kernel_zj_, bw_zj_);
    double observed = 0.0, resampled = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> r(rests_.data() + i * rest_dim_, rest_dim_);
        std::span<const double> tr(trests_.data() + i * rest_dim_, rest_dim_);
        observed += ky(ys_[i], y) * kz(zjs_[i], zj) * rest_kernel(r, zrest);
        resampled += ky(tys_[i], y) * kz(tzjs_[i], zj) * rest_kernel(tr, zrest);
    }
    return (observed - resampled) / static_cast<double>(n);
}

double CskitPayoff::step(const TripletObservation& obs, double zj_tilde) {
    check_rest(obs.zrest);
    double kappa = 0.0;
    const std::size_t n = ys_.size();
    if (n > 0) {
        // rho(y, zj, r) - rho(y, zj~, r), sharing the y and rest kernels.
        double diff = 0.0;
        const bool all_rbf = kernel_y_.family == KernelFamily::rbf && kernel_zj_.family == KernelFamily::rbf &&
                             (rest_dim_ == 0 || kernel_rest_.family == KernelFamily::rbf);
        if (twins_share_context_ && all_rbf) {
            // One exponential per kernel product: exp(-(a + b + c)) = kY kZ kRest.
            const double iy = 1.0 / (2.0 * bw_y_ * bw_y_);
            const double iz = 1.0 / (2.0 * bw_zj_ * bw_zj_);
            const double ir = 1.0 / (2.0 * bw_rest_ * bw_rest_);
            for (std::size_t i = 0; i < n; ++i) {
                const double dy = ys_[i] - obs.y;
                double e = dy * dy * iy;
                if (rest_dim_ > 0) {
                    std::span<const double> r(rests_.data() + i * rest_dim_, rest_dim_);
                    e += squared_distance(r, obs.zrest) * ir;
                }
                const double a = zjs_[i] - obs.zj, b = zjs_[i] - zj_tilde;
                const double c = tzjs_[i] - obs.zj, d = tzjs_[i] - zj_tilde;
                diff += std::exp(-e - a * a * iz) - std::exp(-e - b * b * iz) - std::exp(-e - c * c * iz) +
                        std::exp(-e - d * d * iz);
            }
        } else {
            const ScalarKernel ky(kernel_y_, bw_y_);
            const ScalarKernel kz(kernel_zj_, bw_zj_);
            for (std::size_t i = 0; i < n; ++i) {
                std::span<const double> r(rests_.data() + i * rest_dim_, rest_dim_);
                std::span<const double> tr(trests_.data() + i * rest_dim_, rest_dim_);
                const double w_obs = ky(ys_[i], obs.y) * rest_kernel(r, obs.zrest);
                const double w_res = twins_share_context_ ? w_obs : ky(tys_[i], obs.y) * rest_kernel(tr, obs.zrest);
                diff += w_obs * (kz(zjs_[i], obs.zj) - kz(zjs_[i], zj_tilde));
                diff -= w_res * (kz(tzjs_[i], obs.zj) - kz(tzjs_[i], zj_tilde));
            }
        }
        kappa = bounded_tanh(diff / static_cast<double>(n));
    }
    TripletObservation twin{obs.y, zj_tilde, obs.zrest};
    append(obs, twin);
    return kappa;
}

void CskitPayoff::append(const TripletObservation& observed, const TripletObservation& resampled) {
    check_rest(observed.zrest);
    check_rest(resampled.zrest);
    ys_.push_back(observed.y);
    zjs_.push_back(observed.zj);
    rests_.insert(rests_.end(), observed.zrest.begin(), observed.zrest.end());
    if (resampled.y != observed.y || resampled.zrest != observed.zrest) twins_share_context_ = false;
    tys_.push_back(resampled.y);
    tzjs_.push_back(resampled.zj);
    trests_.insert(trests_.end(), resampled.zrest.begin(), resampled.zrest.end());

    tracker_y_.add(observed.y);
    tracker_zj_.add(observed.zj);
    if (rest_dim_ > 0) tracker_rest_.add(observed.zrest);
    bw_y_ = tracker_y_.bandwidth();
    bw_zj_ = tracker_zj_.bandwidth();
    bw_rest_ = tracker_rest_.bandwidth();
}

// ---------------------------------------------------------------------------
// x-SKIT

XskitPayoff::XskitPayoff(KernelSpec kernel_y)
    : kernel_(kernel_y), tracker_(kernel_y, 1), bw_(tracker_.bandwidth()) {}

double XskitPayoff::rho(double y) const {
    const std::size_t n = test_.size();
    if (n == 0) return 0.0;
    const ScalarKernel k(kernel_, bw_);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += k(test_[i], y) - k(null_[i], y);
    return s / static_cast<double>(n);
}

double XskitPayoff::step(double y_test, double y_null) {
    double kappa = 0.0;
    const std::size_t n = test_.size();
    if (n > 0) {
        const ScalarKernel k(kernel_, bw_);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += k(test_[i], y_test) - k(null_[i], y_test);
            s -= k(test_[i], y_null) - k(null_[i], y_null);
        }
        kappa = bounded_tanh(s / static_cast<double>(n));
    }
    append(y_test, y_null);
    return kappa;
}

void XskitPayoff::append(double y_test, double y_null) {
    test_.push_back(y_test);
    null_.push_back(y_null);
    // Bandwidth from the pooled responses, so swapping the two streams leaves it unchanged.
    tracker_.add(y_test);
    tracker_.add(y_null);
    bw_ = tracker_.bandwidth();
}

}  // namespace betkit

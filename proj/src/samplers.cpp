#include "betkit/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace betkit {

NormalMoments gaussian_conditional(const GaussianConditionalParams& p, double z3) {
    const double v1 = p.sigma1 * p.sigma1;
    const double v3 = p.sigma3 * p.sigma3;
    return {v1 / (v1 + v3) * z3 + v3 / (v1 + v3) * p.mu1, 1.0 / (1.0 / v1 + 1.0 / v3)};
}

namespace {

constexpr double kNuLow = 1e-6;
constexpr double kNuHigh = 1e6;
constexpr double kNeffTolerance = 0.01;
constexpr int kMaxBisection = 200;
// exp(-x) underflows to zero for x beyond ~745.
constexpr double kUnderflowExponent = 740.0;

void check_subset(std::span<const std::size_t> subset, std::span<const double> values,
                  std::size_t dims) {
    if (subset.size() != values.size()) throw ConfigError("conditioning values/subset mismatch");
    std::vector<bool> seen(dims, false);
    for (std::size_t c : subset) {
        if (c >= dims) throw ConfigError("conditioning index out of range");
        if (seen[c]) throw ConfigError("duplicate conditioning index");
        seen[c] = true;
    }
}

double neff_of(const std::vector<double>& sq, double dmin, double nu) {
    const double inv = 1.0 / (2.0 * nu * nu);
    double s = 0.0, s2 = 0.0;
    for (double d : sq) {
        const double w = std::exp(-(d - dmin) * inv);
        s += w;
        s2 += w * w;
    }
    return s * s / s2;
}

double fit_nu(const std::vector<double>& sq, double dmin, double goal) {
    double lo = std::log(kNuLow), hi = std::log(kNuHigh);
    if (neff_of(sq, dmin, kNuLow) >= goal * (1.0 - kNeffTolerance)) return kNuLow;
    if (neff_of(sq, dmin, kNuHigh) < goal * (1.0 - kNeffTolerance)) return kNuHigh;
    for (int it = 0; it < kMaxBisection; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double n_eff = neff_of(sq, dmin, std::exp(mid));
        if (std::abs(n_eff - goal) <= kNeffTolerance * goal) return std::exp(mid);
        if (n_eff < goal) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::exp(0.5 * (lo + hi));
}

}  // namespace

WeightedKdeSampler::WeightedKdeSampler(Matrix data_z, double target_neff, double smoothing_scale)
    : data_(std::move(data_z)), target_(target_neff), smoothing_(smoothing_scale) {
    if (data_.rows() < 2) throw ConfigError("KDE sampler needs at least two rows");
    if (!(target_ > 1.0)) throw ConfigError("target n_eff must exceed 1");
    if (!(smoothing_ >= 0.0)) throw ConfigError("smoothing scale must be nonnegative");
}

std::vector<double> WeightedKdeSampler::squared_offsets(std::span<const std::size_t> cond_dims,
                                                        std::span<const double> condition) const {
    check_subset(cond_dims, condition, dims());
    std::vector<double> sq(rows(), 0.0);
    for (std::size_t i = 0; i < rows(); ++i) {
        auto r = data_.row(i);
        double s = 0.0;
        for (std::size_t k = 0; k < cond_dims.size(); ++k) {
            const double d = r[cond_dims[k]] - condition[k];
            s += d * d;
        }
        sq[i] = s;
    }
    return sq;
}

double WeightedKdeSampler::effective_size(std::span<const std::size_t> cond_dims,
                                          std::span<const double> condition, double nu) const {
    const auto sq = squared_offsets(cond_dims, condition);
    return neff_of(sq, *std::min_element(sq.begin(), sq.end()), nu);
}

double WeightedKdeSampler::fit_bandwidth_for_neff(std::span<const std::size_t> cond_dims,
                                                  std::span<const double> condition,
                                                  double target) const {
    if (!(target > 1.0)) throw ConfigError("target n_eff must exceed 1");
    const auto sq = squared_offsets(cond_dims, condition);
    return fit_nu(sq, *std::min_element(sq.begin(), sq.end()),
                  std::min(target, static_cast<double>(rows())));
}

KdeWeights WeightedKdeSampler::weights_for(std::span<const std::size_t> cond_dims,
                                           std::span<const double> condition) const {
    KdeWeights out;
    if (cond_dims.empty()) {
        out.nu = std::numeric_limits<double>::infinity();
        out.weights.assign(rows(), 1.0);
        out.n_eff = static_cast<double>(rows());
        return out;
    }
    const auto sq = squared_offsets(cond_dims, condition);
    const double dmin = *std::min_element(sq.begin(), sq.end());
    out.nu = fit_nu(sq, dmin, std::min(target_, static_cast<double>(rows())));
    const double inv = 1.0 / (2.0 * out.nu * out.nu);
    if (dmin * inv > kUnderflowExponent) {
        throw SamplerError("conditioning point lies outside the data support");
    }
    out.weights.resize(rows());
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
        const double w = std::exp(-(sq[i] - dmin) * inv);
        out.weights[i] = w;
        s += w;
        s2 += w * w;
    }
    out.n_eff = s * s / s2;
    return out;
}

namespace {

std::vector<double> cumulative_sum(const std::vector<double>& weights) {
    std::vector<double> cumulative(weights.size());
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        s += weights[i];
        cumulative[i] = s;
    }
    return cumulative;
}

std::size_t draw_from_cumulative(const std::vector<double>& cumulative, Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, cumulative.back())(rng);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = static_cast<std::size_t>(it - cumulative.begin());
    return std::min(idx, cumulative.size() - 1);
}

}  // namespace

std::size_t WeightedKdeSampler::draw_row(const std::vector<double>& weights, Rng& rng) const {
    return draw_from_cumulative(cumulative_sum(weights), rng);
}

double WeightedKdeSampler::scott_noise_scale(const KdeWeights& w, std::size_t column) const {
    if (smoothing_ == 0.0) return 0.0;
    double s = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
        s += w.weights[i];
        mean += w.weights[i] * data_(i, column);
    }
    mean /= s;
    double var = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
        const double d = data_(i, column) - mean;
        var += w.weights[i] * d * d;
    }
    var /= s;
    return smoothing_ * std::sqrt(std::max(var, 0.0)) * std::pow(w.n_eff, -0.2);
}

double WeightedKdeSampler::sample_zj_given_rest(std::size_t j, std::span<const double> zrest,
                                                Rng& rng) const {
    if (j >= dims()) throw ConfigError("concept index out of range");
    if (zrest.size() + 1 != dims()) throw ConfigError("conditioning vector must have m-1 entries");
    std::vector<std::size_t> rest;
    rest.reserve(dims() - 1);
    for (std::size_t k = 0; k < dims(); ++k) {
        if (k != j) rest.push_back(k);
    }
    const KdeWeights w = weights_for(rest, zrest);
    const std::size_t row = draw_row(w.weights, rng);
    const double scale = scott_noise_scale(w, j);
    const double noise = std::normal_distribution<double>(0.0, 1.0)(rng);
    return data_(row, j) + scale * noise;
}

PreparedConditional WeightedKdeSampler::prepare(std::span<const std::size_t> subset,
                                                std::span<const double> values) const {
    check_subset(subset, values, dims());
    PreparedConditional p;
    p.base.assign(dims(), 0.0);
    p.noise.assign(dims(), 0.0);
    std::vector<bool> pinned(dims(), false);
    for (std::size_t k = 0; k < subset.size(); ++k) {
        p.base[subset[k]] = values[k];
        pinned[subset[k]] = true;
    }
    for (std::size_t k = 0; k < dims(); ++k) {
        if (!pinned[k]) p.free.push_back(k);
    }
    if (p.free.empty()) return p;
    const KdeWeights w = weights_for(subset, values);
    p.n_eff = w.n_eff;
    p.cumulative = cumulative_sum(w.weights);
    for (std::size_t k : p.free) p.noise[k] = scott_noise_scale(w, k);
    return p;
}

std::vector<double> WeightedKdeSampler::sample(const PreparedConditional& p, Rng& rng) const {
    std::vector<double> out = p.base;
    if (p.free.empty()) return out;
    const std::size_t row = draw_from_cumulative(p.cumulative, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t k : p.free) out[k] = data_(row, k) + p.noise[k] * normal(rng);
    return out;
}

std::vector<double> WeightedKdeSampler::sample_full_z_given_subset(
    std::span<const std::size_t> subset, std::span<const double> values, Rng& rng) const {
    return sample(prepare(subset, values), rng);
}

EmbeddingSampler::EmbeddingSampler(Matrix data_h, Matrix data_z, double target_neff,
                                   double smoothing_scale)
    : data_h_(std::move(data_h)), data_z_(std::move(data_z)) {
    if (data_h_.rows() != data_z_.rows()) {
        throw ConfigError("embeddings and concepts must share the row count");
    }
    if (data_h_.rows() == 0) throw ConfigError("embedding sampler needs data");
    if (data_z_.rows() >= 2) kde_.emplace(data_z_, target_neff, smoothing_scale);
}

std::size_t EmbeddingSampler::nearest_row(std::span<const double> z) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data_z_.rows(); ++i) {
        const double d = squared_distance(data_z_.row(i), z);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

PreparedConditional EmbeddingSampler::prepare(std::span<const std::size_t> subset,
                                              std::span<const double> values) const {
    if (!kde_) {
        check_subset(subset, values, data_z_.cols());
        return {};
    }
    return kde_->prepare(subset, values);
}

std::size_t EmbeddingSampler::sample_row(const PreparedConditional& prepared, Rng& rng) const {
    if (!kde_) return 0;
    return nearest_row(kde_->sample(prepared, rng));
}

std::size_t EmbeddingSampler::sample_row(std::span<const std::size_t> subset,
                                         std::span<const double> values, Rng& rng) const {
    return sample_row(prepare(subset, values), rng);
}

std::size_t sample_matching_binary(const Matrix& data_z, std::span<const std::size_t> subset,
                                   std::span<const double> values, Rng& rng) {
    check_subset(subset, values, data_z.cols());
    for (double v : values) {
        if (v != 0.0 && v != 1.0) throw ConfigError("binary conditioning values must be 0 or 1");
    }
    std::vector<std::size_t> matches;
    for (std::size_t i = 0; i < data_z.rows(); ++i) {
        bool ok = true;
        for (std::size_t k = 0; k < subset.size() && ok; ++k) {
            const double v = data_z(i, subset[k]);
            if (v != 0.0 && v != 1.0) throw ConfigError("binary annotations must be 0 or 1");
            ok = v == values[k];
        }
        if (ok) matches.push_back(i);
    }
    if (matches.empty()) throw SamplerError("no dataset row matches the conditioning vector");
    std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);
    return matches[pick(rng)];
}

}  // namespace betkit

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "betkit/common.hpp"

namespace betkit {

// ---------------------------------------------------------------------------
// Analytic Gaussian conditional

struct GaussianConditionalParams {
    double mu1 = 1.0;
    double sigma1 = 1.0;
    double sigma3 = 1.0;
};

struct NormalMoments {
    double mean = 0.0;
    double variance = 1.0;
};

/// Law of Z1 given Z3 = z3 when Z1 ~ N(mu1, sigma1^2) and Z3 | Z1 ~ N(Z1, sigma3^2).
NormalMoments gaussian_conditional(const GaussianConditionalParams& params, double z3);

// ---------------------------------------------------------------------------
// Weighted KDE conditional sampler

/// Weights over dataset rows for one conditioning event.
struct KdeWeights {
    /// Gaussian bandwidth on the conditioning coordinates.
    double nu = 0.0;
    /// (sum w)^2 / sum w^2.
    double n_eff = 0.0;
    /// Proportional to exp(-|z_C^(i) - z_C|^2 / (2 nu^2)); rescaled so the largest is 1.
    std::vector<double> weights;
};

/// Conditional law for a fixed conditioning event, reusable across draws.
struct PreparedConditional {
    /// Pinned values at their coordinates; zero elsewhere.
    std::vector<double> base;
    /// Coordinates that are resampled.
    std::vector<std::size_t> free;
    /// Per-coordinate smoothing noise standard deviation.
    std::vector<double> noise;
    /// Running sum of the row weights.
    std::vector<double> cumulative;
    double n_eff = 0.0;
};

/// Nonparametric sampler for concept conditionals.
///
/// Conditioning on coordinates C at values z_C weights every row by a Gaussian kernel
/// on its distance to z_C, with the kernel bandwidth chosen so the effective number of
/// points hits a target. A draw picks a row proportionally to its weight and perturbs
/// each free coordinate with Gaussian noise of standard deviation
/// `smoothing_scale * weighted_std * n_eff^(-1/5)` (Scott's rule on n_eff points).
class WeightedKdeSampler {
public:
    static constexpr double kDefaultTargetNeff = 2000.0;

    explicit WeightedKdeSampler(Matrix data_z, double target_neff = kDefaultTargetNeff,
                                double smoothing_scale = 1.0);

    std::size_t rows() const noexcept { return data_.rows(); }
    std::size_t dims() const noexcept { return data_.cols(); }
    double target_neff() const noexcept { return target_; }
    const Matrix& data() const noexcept { return data_; }

    /// Effective sample size of the weights induced by bandwidth `nu`.
    double effective_size(std::span<const std::size_t> cond_dims,
                          std::span<const double> condition, double nu) const;

    /// Bisection on log(nu) over [1e-6, 1e6] until n_eff is within 1% of
    /// min(target, n). Throws ConfigError when target <= 1.
    double fit_bandwidth_for_neff(std::span<const std::size_t> cond_dims,
                                  std::span<const double> condition, double target) const;

    /// Full weight computation at the sampler's target; throws SamplerError when the
    /// condition lies so far from the data that every raw weight underflows.
    KdeWeights weights_for(std::span<const std::size_t> cond_dims,
                           std::span<const double> condition) const;

    /// Draws Z_j given the other m-1 coordinates (in ascending index order).
    double sample_zj_given_rest(std::size_t j, std::span<const double> zrest, Rng& rng) const;

    /// Precomputes weights and noise scales for repeated draws at one condition.
    PreparedConditional prepare(std::span<const std::size_t> subset,
                                std::span<const double> values) const;
    std::vector<double> sample(const PreparedConditional& prepared, Rng& rng) const;

    /// Draws a full concept vector with coordinates `subset` pinned to `values`.
    std::vector<double> sample_full_z_given_subset(std::span<const std::size_t> subset,
                                                   std::span<const double> values,
                                                   Rng& rng) const;

private:
    std::vector<double> squared_offsets(std::span<const std::size_t> cond_dims,
                                        std::span<const double> condition) const;
    std::size_t draw_row(const std::vector<double>& weights, Rng& rng) const;
    double scott_noise_scale(const KdeWeights& w, std::size_t column) const;

    Matrix data_;
    double target_;
    double smoothing_;
};

/// Samples dense embeddings whose concept projections match a partial concept vector:
/// a KDE draw of the full concept vector, then the dataset row whose concepts are
/// nearest to it (ties to the lowest index).
class EmbeddingSampler {
public:
    EmbeddingSampler(Matrix data_h, Matrix data_z,
                     double target_neff = WeightedKdeSampler::kDefaultTargetNeff,
                     double smoothing_scale = 1.0);

    PreparedConditional prepare(std::span<const std::size_t> subset,
                                std::span<const double> values) const;
    std::size_t sample_row(const PreparedConditional& prepared, Rng& rng) const;
    std::size_t sample_row(std::span<const std::size_t> subset, std::span<const double> values,
                           Rng& rng) const;

    std::span<const double> sample_embedding(std::span<const std::size_t> subset,
                                             std::span<const double> values, Rng& rng) const {
        return data_h_.row(sample_row(subset, values, rng));
    }

    /// Lowest-index row minimizing the distance between its concepts and `z`.
    std::size_t nearest_row(std::span<const double> z) const;

    const Matrix& embeddings() const noexcept { return data_h_; }
    const Matrix& concepts() const noexcept { return data_z_; }

private:
    Matrix data_h_;
    Matrix data_z_;
    std::optional<WeightedKdeSampler> kde_;
};

/// Uniform draw among rows whose binary concept annotations equal `values` on `subset`.
/// Throws SamplerError when no row matches.
std::size_t sample_matching_binary(const Matrix& data_z, std::span<const std::size_t> subset,
                                   std::span<const double> values, Rng& rng);

}  // namespace betkit

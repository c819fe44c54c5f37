#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "betkit/common.hpp"
#include "betkit/samplers.hpp"

namespace betkit {

// ---------------------------------------------------------------------------
// Gaussian concepts with a sigmoid response

struct GaussianDgpParams {
    double mu1 = 1.0;
    double sigma1 = 1.0;
    double mu2 = -1.0;
    double sigma2 = 1.0;
    double sigma3 = 1.0;
    double sigma0 = 0.01;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta3 = 0.0;

    GaussianConditionalParams conditional() const { return {mu1, sigma1, sigma3}; }
};

struct GaussianSample {
    Matrix z;               ///< n x 3
    std::vector<double> y;  ///< n
};

double sigmoid(double x);

/// Noiseless response S(b1 z1 + b2 z2 z3 + b3 z3).
double gaussian_response(const GaussianDgpParams& params, std::span<const double> z);

GaussianSample sample_gaussian_dgp(const GaussianDgpParams& params, std::size_t n, Rng& rng);

/// Exact draw of (Z1, Z2, Z3) with the coordinates in `subset` fixed to `values`.
std::array<double, 3> sample_gaussian_given_subset(const GaussianDgpParams& params,
                                                   std::span<const std::size_t> subset,
                                                   std::span<const double> values, Rng& rng);

/// Exact draw of Z_j given the other two coordinates (ascending index order).
double sample_gaussian_zj_given_rest(const GaussianDgpParams& params, std::size_t j,
                                     std::span<const double> zrest, Rng& rng);

// ---------------------------------------------------------------------------
// Digit-counting concepts

namespace counting {
inline constexpr std::size_t kBlueZeros = 0;
inline constexpr std::size_t kOrangeThrees = 1;
inline constexpr std::size_t kGreenFives = 2;
inline constexpr std::size_t kRedThrees = 3;
inline constexpr std::size_t kBlueTwos = 4;
inline constexpr std::size_t kPurpleSevens = 5;
inline constexpr std::size_t kConcepts = 6;

std::string_view name(std::size_t idx);
}  // namespace counting

struct CountingDgpParams {
    /// Probability of the larger red-threes count when orange * fives >= 3.
    double alpha_flip = 0.9;
};

using CountVector = std::array<int, counting::kConcepts>;

/// Integer support of each idx.
std::span<const int> counting_support(std::size_t idx);

/// Joint probability of a vector of rounded counts.
double counting_joint_probability(const CountingDgpParams& params, const CountVector& counts);

/// n x 6 matrix of dithered counts (columns in counting:: order).
Matrix sample_counting_dgp(const CountingDgpParams& params, std::size_t n, Rng& rng);

/// Posterior over the support of concept `j` given rounded values of other concepts,
/// obtained by enumerating the joint. Throws SamplerError on a zero-probability event.
std::vector<std::pair<int, double>> counting_posterior(
    const CountingDgpParams& params, std::size_t j,
    std::span<const std::pair<std::size_t, double>> given);

/// Exact conditional draw of concept `j` (dithered by U(-0.5, 0.5)).
double counting_conditional_sample(const CountingDgpParams& params, std::size_t j,
                                   std::span<const std::pair<std::size_t, double>> given,
                                   Rng& rng);

/// Exact conditional draw of the full concept vector with `given` coordinates held fixed.
std::array<double, counting::kConcepts> counting_conditional_joint(
    const CountingDgpParams& params, std::span<const std::pair<std::size_t, double>> given,
    Rng& rng);

/// Perfect-accuracy stand-in for a trained red-threes counter: round(z_red) + U(-0.5, 0.5).
double counting_oracle_predictor(std::span<const double> z, Rng& rng);

}  // namespace betkit

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "betkit/betting.hpp"
#include "betkit/classifier.hpp"
#include "betkit/common.hpp"
#include "betkit/kernels.hpp"
#include "betkit/payoffs.hpp"
#include "betkit/samplers.hpp"

namespace betkit {

struct TestConfig {
    double alpha = 0.05;
    /// Sample budget. SKIT consumes two observations per step, c-SKIT one, and x-SKIT
    /// one pair of sampler draws.
    std::size_t tau_max = 1000;
    KernelSpec kernel_y = KernelSpec::rbf_quantile(0.5);
    KernelSpec kernel_z = KernelSpec::rbf_quantile(0.5);
    KernelSpec kernel_rest = KernelSpec::rbf_quantile(0.5);
    BettingStrategy strategy = OnsBetting{};
    std::uint64_t seed = 0;
    /// When false the session keeps betting after rejection until the budget runs out,
    /// so the full wealth trajectory is available for multiple-testing correction.
    bool stop_on_reject = true;
    /// With stop_on_reject off, stop once log-wealth reaches this value instead of
    /// exhausting the budget.
    std::optional<double> stop_log_wealth;

    void validate() const;
    /// Same kernel family and bandwidth rule for every coordinate.
    void set_kernel(const KernelSpec& spec);
};

struct TestOutcome {
    bool rejected = false;
    /// Samples consumed up to the rejection, or in total when not rejected.
    std::size_t samples_used = 0;
    /// samples_used / tau_max on rejection, otherwise 1.
    double normalized_tau = 1.0;
    /// log K_t after each step t = 1, 2, ...
    std::vector<double> wealth_trajectory;
    std::optional<std::size_t> rejection_step;
};

/// Draws Z~_j from the conditional of Z_j given the supplied Z_-j.
using ConditionalSampler = std::function<double(std::span<const double> zrest, Rng& rng)>;

/// Draws one model response with the concepts in `subset` fixed at the explained
/// observation's values (all other concepts resampled).
using ResponseSampler = std::function<double(std::span<const std::size_t> subset, Rng& rng)>;

/// Global importance: tests Y independent of Z_j from a stream of (y, z_j) pairs.
TestOutcome run_skit(std::span<const PairObservation> stream, const TestConfig& config);

/// Global conditional importance: tests Y independent of Z_j given Z_-j.
TestOutcome run_cskit(std::span<const TripletObservation> stream, const ConditionalSampler& sampler,
                      const TestConfig& config);

/// Local conditional importance of concept j for one observation given the subset S.
TestOutcome run_xskit(const ResponseSampler& sampler, std::size_t j,
                      std::span<const std::size_t> subset, const TestConfig& config);

/// x-SKIT with the embedding sampler and a linear classifier.
TestOutcome run_xskit(std::span<const double> z_obs, std::size_t j,
                      std::span<const std::size_t> subset, const EmbeddingSampler& sampler,
                      const Classifier& classifier, const TestConfig& config);

}  // namespace betkit

#include "betkit/testers.hpp"

#include <algorithm>

namespace betkit {

void TestConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (tau_max < 2) throw ConfigError("tau_max must be at least 2");
    kernel_y.validate();
    kernel_z.validate();
    kernel_rest.validate();
    if (const auto* c = std::get_if<ConstantBetting>(&strategy)) {
        if (!(c->v >= 0.0 && c->v <= 1.0)) throw ConfigError("constant bet must lie in [0,1]");
    }
}

void TestConfig::set_kernel(const KernelSpec& spec) {
    kernel_y = spec;
    kernel_z = spec;
    kernel_rest = spec;
}

namespace {

/// Shared bookkeeping for the three drivers.
class Session {
public:
    explicit Session(const TestConfig& config)
        : config_(config), wealth_(wealth_init(config.alpha, config.strategy)) {}

    /// Returns false once the driver should stop.
    bool bet(double kappa, std::size_t samples_after_step) {
        wealth_ = wealth_.rejected() ? wealth_extend(wealth_, kappa) : wealth_step(wealth_, kappa);
        outcome_.wealth_trajectory.push_back(wealth_.log_wealth);
        if (wealth_.rejected() && !outcome_.rejected) {
            outcome_.rejected = true;
            outcome_.rejection_step = wealth_.rejected_at;
            outcome_.samples_used = samples_after_step;
            outcome_.normalized_tau =
                static_cast<double>(samples_after_step) / static_cast<double>(config_.tau_max);
        }
        if (!outcome_.rejected) outcome_.samples_used = samples_after_step;
        if (outcome_.rejected && config_.stop_on_reject) return false;
        return !(config_.stop_log_wealth && wealth_.log_wealth >= *config_.stop_log_wealth);
    }

    TestOutcome finish() && { return std::move(outcome_); }

private:
    const TestConfig& config_;
    WealthState wealth_;
    TestOutcome outcome_;
};

}  // namespace

TestOutcome run_skit(std::span<const PairObservation> stream, const TestConfig& config) {
    config.validate();
    Session session(config);
    SkitPayoff payoff(config.kernel_y, config.kernel_z);
    const std::size_t budget = std::min(config.tau_max, stream.size());
    for (std::size_t used = 0; used + 2 <= budget; used += 2) {
        const double kappa = payoff.step(stream[used], stream[used + 1]);
        if (!session.bet(kappa, used + 2)) break;
    }
    return std::move(session).finish();
}

TestOutcome run_cskit(std::span<const TripletObservation> stream, const ConditionalSampler& sampler,
                      const TestConfig& config) {
    config.validate();
    Session session(config);
    if (stream.empty()) return std::move(session).finish();
    const std::size_t rest_dim = stream.front().zrest.size();
    CskitPayoff payoff(config.kernel_y, config.kernel_z, config.kernel_rest, rest_dim);
    Rng rng(config.seed);
    const std::size_t budget = std::min(config.tau_max, stream.size());
    for (std::size_t t = 0; t < budget; ++t) {
        const auto& obs = stream[t];
        const double zj_tilde = sampler(obs.zrest, rng);
        const double kappa = payoff.step(obs, zj_tilde);
        if (!session.bet(kappa, t + 1)) break;
    }
    return std::move(session).finish();
}

TestOutcome run_xskit(const ResponseSampler& sampler, std::size_t j,
                      std::span<const std::size_t> subset, const TestConfig& config) {
    config.validate();
    if (std::find(subset.begin(), subset.end(), j) != subset.end()) {
        throw ConfigError("x-SKIT: tested concept must not belong to the conditioning set");
    }
    std::vector<std::size_t> with_j(subset.begin(), subset.end());
    with_j.push_back(j);

    Session session(config);
    XskitPayoff payoff(config.kernel_y);
    Rng rng(config.seed);
    for (std::size_t t = 0; t < config.tau_max; ++t) {
        const double y_test = sampler(with_j, rng);
        const double y_null = sampler(subset, rng);
        const double kappa = payoff.step(y_test, y_null);
        if (!session.bet(kappa, t + 1)) break;
    }
    return std::move(session).finish();
}

TestOutcome run_xskit(std::span<const double> z_obs, std::size_t j,
                      std::span<const std::size_t> subset, const EmbeddingSampler& sampler,
                      const Classifier& classifier, const TestConfig& config) {
    const std::size_t m = sampler.concepts().cols();
    if (z_obs.size() != m) throw ConfigError("x-SKIT: observation length must equal concept count");
    if (j >= m) throw ConfigError("x-SKIT: concept index out of range");
    classifier.validate();
    if (std::find(subset.begin(), subset.end(), j) != subset.end()) {
        throw ConfigError("x-SKIT: tested concept must not belong to the conditioning set");
    }
    auto pin = [&](std::span<const std::size_t> c) {
        std::vector<double> values;
        for (std::size_t k : c) values.push_back(z_obs[k]);
        return sampler.prepare(c, values);
    };
    std::vector<std::size_t> with_j(subset.begin(), subset.end());
    with_j.push_back(j);
    const PreparedConditional test_law = pin(with_j);
    const PreparedConditional null_law = pin(subset);
    ResponseSampler respond = [&](std::span<const std::size_t> c, Rng& rng) {
        const auto& law = c.size() == with_j.size() ? test_law : null_law;
        return classify(classifier, sampler.embeddings().row(sampler.sample_row(law, rng)));
    };
    return run_xskit(respond, j, subset, config);
}

}  // namespace betkit

#include "betkit/betting.hpp"

#include <algorithm>
#include <cmath>

#include "betkit/common.hpp"

namespace betkit {

double ons_step_size() { return 2.0 / (2.0 - std::log(3.0)); }

OnsState ons_init() { return OnsState{1.0, 0.0}; }

OnsState ons_update(const OnsState& state, double kappa) {
    if (!(kappa > -1.0 && kappa < 1.0)) throw ConfigError("payoff must lie in (-1,1)");
    const double z = kappa / (1.0 + state.v * kappa);
    OnsState next;
    next.a = state.a + z * z;
    next.v = std::clamp(state.v + ons_step_size() * z / next.a, 0.0, 1.0);
    return next;
}

double WealthState::fraction() const {
    if (const auto* c = std::get_if<ConstantBetting>(&strategy)) return c->v;
    return ons.v;
}

double WealthState::threshold() const { return -std::log(alpha); }

WealthState wealth_init(double alpha, BettingStrategy strategy) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (const auto* c = std::get_if<ConstantBetting>(&strategy)) {
        if (!(c->v >= 0.0 && c->v <= 1.0)) throw ConfigError("constant bet must lie in [0,1]");
    }
    WealthState s;
    s.alpha = alpha;
    s.strategy = strategy;
    return s;
}

namespace {

WealthState advance(WealthState state, double kappa) {
    if (!(kappa > -1.0 && kappa < 1.0)) throw ConfigError("payoff must lie in (-1,1)");
    const double factor = 1.0 + state.fraction() * kappa;
    if (!(factor > 0.0)) throw ConfigError("bet would bankrupt the session");
    state.log_wealth += std::log1p(state.fraction() * kappa);
    ++state.step;
    if (!state.rejected_at && state.log_wealth >= state.threshold()) {
        state.rejected_at = state.step;
    }
    if (std::holds_alternative<OnsBetting>(state.strategy)) {
        state.ons = ons_update(state.ons, kappa);
    }
    return state;
}

}  // namespace

WealthState wealth_step(WealthState state, double kappa) {
    if (state.rejected()) throw ConfigError("cannot step a rejected session");
    return advance(std::move(state), kappa);
}

WealthState wealth_extend(WealthState state, double kappa) {
    return advance(std::move(state), kappa);
}

}  // namespace betkit

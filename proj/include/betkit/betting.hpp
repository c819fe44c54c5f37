#pragma once

#include <cstddef>
#include <optional>
#include <variant>

namespace betkit {

/// Online Newton step state: running curvature sum `a` and the next betting fraction `v`.
struct OnsState {
    double a = 1.0;
    double v = 0.0;

    friend bool operator==(const OnsState&, const OnsState&) = default;
};

struct OnsBetting {};

struct ConstantBetting {
    double v = 0.5;
};

using BettingStrategy = std::variant<OnsBetting, ConstantBetting>;

/// 2 / (2 - ln 3), the ONS step-size constant.
double ons_step_size();

OnsState ons_init();

/// One ONS step after observing payoff `kappa` in (-1,1):
///   z = kappa / (1 + v kappa),  a' = a + z^2,  v' = clip(v + c z / a', [0,1]).
OnsState ons_update(const OnsState& state, double kappa);

/// A single betting session: log-wealth, step counter and rejection status.
struct WealthState {
    double log_wealth = 0.0;
    std::size_t step = 0;
    double alpha = 0.05;
    BettingStrategy strategy = OnsBetting{};
    OnsState ons = ons_init();
    /// Step at which wealth first reached 1/alpha.
    std::optional<std::size_t> rejected_at;

    bool rejected() const noexcept { return rejected_at.has_value(); }
    /// Betting fraction the next step will wager.
    double fraction() const;
    double threshold() const;
};

WealthState wealth_init(double alpha, BettingStrategy strategy = OnsBetting{});

/// Bets on `kappa`, flips to rejected at the first crossing of 1/alpha, then updates the
/// strategy. Throws on a rejected session or when kappa is outside (-1,1).
WealthState wealth_step(WealthState state, double kappa);

/// Same transition as wealth_step but allowed after rejection; the recorded rejection
/// step is left untouched. Used to keep recording trajectories for multiple testing.
WealthState wealth_extend(WealthState state, double kappa);

}  // namespace betkit

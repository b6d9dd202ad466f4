#pragma once

#include <cstdint>
#include <vector>

#include "tontine/types.hpp"

namespace tontine {

// One year of the individual tontine account, at decision time t_m:
//   gross wealth -> mortality credit -> fee -> withdrawal -> rebalance.
// All functions are pure.

// Mortality credit gain applied at t_m to wealth that survived year m.
// Zero at m = 0 and whenever the account is not strictly positive.
// delta_prev is delta_m, the death probability over (t_{m-1}, t_m].
double effective_gain(int m, double delta_prev, double gross_wealth);

// W_{m^-}: gross wealth after credit and after the proportional fee.
// The fee is skipped at m = 0 and on non-positive balances.
double apply_credit_and_fee(int m, double delta_prev, double gross_wealth, double fee);

// Admissible withdrawal interval at t_m. Terminal time: {0}. Otherwise
// [q_min, q_max] when wealth covers q_max, else [q_min, max(q_min, W)]:
// the floor is owed even when it drives the account negative.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};
Interval withdrawal_bounds(double wealth_pre, int m, int horizon, double q_min, double q_max);

// Post-withdrawal account. Insolvent accounts hold the designated bond
// leg only; p is ignored for them.
struct AccountState {
    double wealth_pre = 0.0;   // W_{m^-}
    double wealth_post = 0.0;  // W_{m^+} = W_{m^-} - q
    Vec allocations;           // amount per asset, sums to wealth_post
    bool insolvent = false;    // wealth_post <= 0
};

// Splits wealth_post across assets by weights p (must lie on the simplex
// within 1e-12; ContractError otherwise). bond_leg picks the insolvency
// asset.
AccountState allocate(double wealth_pre, double q, const Vec& p, int bond_leg);

// Wealth at t_{m+1}^- given this year's gross returns. Negative balances
// grow at the bond gross return times e^{mu_bc}.
double grow(const AccountState& state, const Vec& gross_returns, int bond_leg, double mu_bc);

// allocate + grow in one call.
double step_account(double wealth_pre, double q, const Vec& p, const Vec& gross_returns,
                    int bond_leg, double mu_bc);

// Pool-level credits for one year.
struct PoolMember {
    double wealth = 0.0;  // W^k_{m^-} entering the credit event
    double delta = 0.0;   // delta^k_m
};
using Pool = std::vector<PoolMember>;

enum class GainMode {
    Exact,  // group factor balances forfeited wealth exactly
    Unit    // group factor fixed at 1 (large-pool approximation)
};

struct PoolCredits {
    Vec credits;         // per member; zero for the deceased
    double gamma = 0.0;  // group gain factor used
};

// survived[k] is 1 when member k is alive at t_m. Exact mode:
// gamma = sum_dead W / sum_alive (delta/(1-delta)) W, so that paid credits
// equal forfeited wealth; DomainError when the denominator vanishes while
// the forfeited amount is positive.
PoolCredits pool_credits(const Pool& pool, const std::vector<std::uint8_t>& survived,
                         GainMode mode);

// Ratio (delta_j/(1-delta_j)) W_j / sum_k delta_k W_k per member; members
// above `threshold` materially bias the group factor away from fairness.
struct BiasReport {
    Vec ratios;
    std::vector<int> flagged;
    bool degenerate = false;  // denominator was zero
};

BiasReport small_bias_check(const Pool& pool, double threshold);

}  // namespace tontine

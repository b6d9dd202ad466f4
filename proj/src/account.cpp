#include "tontine/account.hpp"

#include <cmath>
#include <string>

#include "tontine/errors.hpp"
#include "tontine/io.hpp"

namespace tontine {

double effective_gain(int m, double delta_prev, double gross_wealth) {
    if (m < 0) throw ContractError("effective_gain: negative period index");
    if (m == 0 || !(gross_wealth > 0.0)) return 0.0;
    if (!(delta_prev >= 0.0 && delta_prev < 1.0))
        throw DomainError("effective_gain: death probability " + format_double(delta_prev) +
                          " outside [0, 1)");
    return delta_prev / (1.0 - delta_prev);
}

double apply_credit_and_fee(int m, double delta_prev, double gross_wealth, double fee) {
    if (!(fee >= 0.0 && fee < 1.0))
        throw ContractError("apply_credit_and_fee: fee outside [0, 1)");
    double credited = (1.0 + effective_gain(m, delta_prev, gross_wealth)) * gross_wealth;
    if (m >= 1 && credited > 0.0) credited *= 1.0 - fee;
    return credited;
}

Interval withdrawal_bounds(double wealth_pre, int m, int horizon, double q_min, double q_max) {
    if (m < 0 || m > horizon) throw ContractError("withdrawal_bounds: period outside 0..horizon");
    if (!(q_max >= q_min && q_min >= 0.0))
        throw ContractError("withdrawal_bounds: need 0 <= q_min <= q_max");
    if (m == horizon) return {0.0, 0.0};
    if (wealth_pre >= q_max) return {q_min, q_max};
    // The floor is owed even when the account cannot cover it.
    return {q_min, std::max(q_min, wealth_pre)};
}

AccountState allocate(double wealth_pre, double q, const Vec& p, int bond_leg) {
    if (bond_leg < 0 || bond_leg >= p.size())
        throw ContractError("allocate: bond_leg outside the asset range");
    AccountState state;
    state.wealth_pre = wealth_pre;
    state.wealth_post = wealth_pre - q;
    state.allocations = Vec::Zero(p.size());
    if (state.wealth_post > 0.0) {
        double sum = p.sum();
        if (std::abs(sum - 1.0) > 1e-12 || (p.array() < -1e-12).any())
            throw ContractError("allocate: weights must lie on the simplex");
        state.allocations = p * state.wealth_post;
    } else {
        state.insolvent = true;
        state.allocations(bond_leg) = state.wealth_post;
    }
    return state;
}

double grow(const AccountState& state, const Vec& gross_returns, int bond_leg, double mu_bc) {
    if (gross_returns.size() != state.allocations.size())
        throw ContractError("grow: returns and allocations disagree on asset count");
    if ((gross_returns.array() <= 0.0).any())
        throw ContractError("grow: gross returns must be positive");
    if (state.insolvent)
        return state.wealth_post * gross_returns(bond_leg) * std::exp(mu_bc);
    return state.allocations.dot(gross_returns);
}

double step_account(double wealth_pre, double q, const Vec& p, const Vec& gross_returns,
                    int bond_leg, double mu_bc) {
    return grow(allocate(wealth_pre, q, p, bond_leg), gross_returns, bond_leg, mu_bc);
}

PoolCredits pool_credits(const Pool& pool, const std::vector<std::uint8_t>& survived,
                         GainMode mode) {
    if (survived.size() != pool.size())
        throw ContractError("pool_credits: survival flags do not match the pool size");
    const int n = static_cast<int>(pool.size());
    PoolCredits out;
    out.credits = Vec::Zero(n);

    double forfeited = 0.0;
    double entitled = 0.0;  // sum over survivors of (delta/(1-delta)) W
    for (int j = 0; j < n; ++j) {
        double d = pool[j].delta;
        if (!(d >= 0.0 && d < 1.0))
            throw DomainError("pool_credits: death probability " + format_double(d) +
                              " outside [0, 1) for member " + std::to_string(j));
        if (survived[j])
            entitled += d / (1.0 - d) * pool[j].wealth;
        else
            forfeited += pool[j].wealth;
    }

    if (mode == GainMode::Unit) {
        out.gamma = 1.0;
    } else if (forfeited == 0.0) {
        out.gamma = 0.0;
    } else {
        if (entitled == 0.0)
            throw DomainError(
                "pool_credits: forfeited wealth with no surviving entitlement, group gain "
                "undefined");
        out.gamma = forfeited / entitled;
    }

    for (int j = 0; j < n; ++j)
        if (survived[j])
            out.credits(j) = pool[j].delta / (1.0 - pool[j].delta) * pool[j].wealth * out.gamma;
    return out;
}

BiasReport small_bias_check(const Pool& pool, double threshold) {
    BiasReport report;
    report.ratios = Vec::Zero(static_cast<Eigen::Index>(pool.size()));
    double denom = 0.0;
    for (const auto& member : pool) denom += member.delta * member.wealth;
    if (denom == 0.0) {
        report.degenerate = true;
        return report;
    }
    for (std::size_t j = 0; j < pool.size(); ++j) {
        double d = pool[j].delta;
        if (!(d >= 0.0 && d < 1.0))
            throw DomainError("small_bias_check: death probability outside [0, 1)");
        report.ratios(static_cast<Eigen::Index>(j)) = d / (1.0 - d) * pool[j].wealth / denom;
        if (report.ratios(static_cast<Eigen::Index>(j)) > threshold)
            report.flagged.push_back(static_cast<int>(j));
    }
    return report;
}

}  // namespace tontine

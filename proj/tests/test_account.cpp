#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tontine/account.hpp"
#include "tontine/errors.hpp"
#include "tontine/rng.hpp"

using namespace tontine;

namespace {

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("mortality credit gain") {
    CHECK(effective_gain(0, 0.5, 100.0) == 0.0);       // no credit at the start
    CHECK(effective_gain(3, 0.02, 0.0) == 0.0);        // nothing to credit
    CHECK(effective_gain(3, 0.02, -25.0) == 0.0);      // insolvent accounts get none
    CHECK(effective_gain(1, 0.02, 100.0) == doctest::Approx(0.020408163265306121).epsilon(1e-15));
    CHECK(effective_gain(1, 0.0, 100.0) == 0.0);
    CHECK_THROWS_AS(effective_gain(2, 1.0, 100.0), DomainError);
    CHECK_THROWS_AS(effective_gain(2, -0.1, 100.0), DomainError);
    CHECK_THROWS_AS(effective_gain(-1, 0.02, 100.0), ContractError);
}

TEST_CASE("credit then fee, in that order") {
    // At t_0 there is neither credit nor fee.
    CHECK(apply_credit_and_fee(0, 0.5, 1000.0, 0.25) == 1000.0);
    // Later: zero delta means the fee acts alone.
    CHECK(apply_credit_and_fee(3, 0.0, 1000.0, 0.0011) == doctest::Approx(998.9).epsilon(1e-15));
    // Negative balances skip both credit and fee.
    CHECK(apply_credit_and_fee(5, 0.02, -50.0, 0.0011) == -50.0);
    // Composition: (1 + delta/(1-delta)) * W * (1 - fee) = W/(1-delta) * (1-fee).
    double expect = 100.0 / 0.98 * 0.99;
    CHECK(apply_credit_and_fee(2, 0.02, 100.0, 0.01) == doctest::Approx(expect).epsilon(1e-15));
    CHECK_THROWS_AS(apply_credit_and_fee(1, 0.02, 100.0, 1.0), ContractError);
    CHECK_THROWS_AS(apply_credit_and_fee(1, 0.02, 100.0, -0.1), ContractError);
}

TEST_CASE("withdrawal bounds by wealth regime") {
    Interval full = withdrawal_bounds(500.0, 3, 30, 40.0, 80.0);
    CHECK(full.lo == 40.0);
    CHECK(full.hi == 80.0);
    Interval thin = withdrawal_bounds(60.0, 3, 30, 40.0, 80.0);
    CHECK(thin.lo == 40.0);
    CHECK(thin.hi == 60.0);
    // The floor is owed even when the account cannot cover it.
    Interval broke = withdrawal_bounds(10.0, 3, 30, 40.0, 80.0);
    CHECK(broke.lo == 40.0);
    CHECK(broke.hi == 40.0);
    Interval negative = withdrawal_bounds(-500.0, 3, 30, 40.0, 80.0);
    CHECK(negative.lo == 40.0);
    CHECK(negative.hi == 40.0);
    // Terminal time: no withdrawal.
    Interval last = withdrawal_bounds(500.0, 30, 30, 40.0, 80.0);
    CHECK(last.lo == 0.0);
    CHECK(last.hi == 0.0);
    CHECK_THROWS_AS(withdrawal_bounds(500.0, 31, 30, 40.0, 80.0), ContractError);
    CHECK_THROWS_AS(withdrawal_bounds(500.0, 3, 30, 80.0, 40.0), ContractError);
}

TEST_CASE("allocation splits wealth or parks debt on the bond leg") {
    AccountState ok = allocate(100.0, 40.0, vec2(0.25, 0.75), 1);
    CHECK(ok.wealth_post == 60.0);
    CHECK(ok.allocations(0) == 15.0);
    CHECK(ok.allocations(1) == 45.0);
    CHECK_FALSE(ok.insolvent);

    // Withdrawing everything style: wealth_post = 0 counts as insolvent.
    AccountState drained = allocate(40.0, 40.0, vec2(0.5, 0.5), 1);
    CHECK(drained.insolvent);
    CHECK(drained.allocations(0) == 0.0);
    CHECK(drained.allocations(1) == 0.0);

    // Debt sits on the designated leg; the weights are ignored entirely.
    AccountState debt = allocate(30.0, 40.0, vec2(5.0, -3.0), 0);
    CHECK(debt.insolvent);
    CHECK(debt.allocations(0) == -10.0);
    CHECK(debt.allocations(1) == 0.0);

    CHECK_THROWS_AS(allocate(100.0, 40.0, vec2(0.5, 0.4), 1), ContractError);
    CHECK_THROWS_AS(allocate(100.0, 40.0, vec2(1.2, -0.2), 1), ContractError);
    CHECK_THROWS_AS(allocate(100.0, 40.0, vec2(0.5, 0.5), 2), ContractError);
}

TEST_CASE("growth of solvent and insolvent accounts") {
    AccountState ok = allocate(100.0, 40.0, vec2(0.3, 0.7), 1);
    CHECK(grow(ok, vec2(1.1, 1.01), 1, 0.02) == doctest::Approx(62.22).epsilon(1e-14));

    AccountState debt = allocate(30.0, 40.0, vec2(0.5, 0.5), 1);
    double expect = -10.0 * 1.01 * std::exp(0.02);
    CHECK(grow(debt, vec2(1.1, 1.01), 1, 0.02) == doctest::Approx(expect).epsilon(1e-15));

    CHECK_THROWS_AS(grow(ok, vec2(1.1, 0.0), 1, 0.02), ContractError);
    Vec three(3);
    three << 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(grow(ok, three, 1, 0.02), ContractError);
}

TEST_CASE("one-step composition") {
    CHECK(step_account(100.0, 40.0, vec2(0.5, 0.5), vec2(1.2, 1.0), 1, 0.02) ==
          doctest::Approx(66.0).epsilon(1e-15));
    // q = 0 with unit returns conserves wealth.
    CHECK(step_account(100.0, 0.0, vec2(0.25, 0.75), vec2(1.0, 1.0), 1, 0.02) == 100.0);
}

TEST_CASE("insolvency is absorbing and debt compounds") {
    double w = -5.0;
    double prev = w;
    for (int i = 0; i < 3; ++i) {
        Interval b = withdrawal_bounds(w, 3 + i, 30, 40.0, 80.0);
        CHECK(b.lo == 40.0);
        CHECK(b.hi == 40.0);
        w = step_account(w, b.lo, vec2(0.5, 0.5), vec2(1.07, 1.01), 1, 0.02);
        CHECK(w < prev);
        prev = w;
    }
    CHECK(w < -90.0);  // three owed floors plus compounding
}

TEST_CASE("pool credits with no deaths pay nothing in exact mode") {
    Pool pool{{100.0, 0.5}, {100.0, 0.5}};
    PoolCredits none = pool_credits(pool, {1, 1}, GainMode::Exact);
    CHECK(none.gamma == 0.0);
    CHECK(none.credits.cwiseAbs().maxCoeff() == 0.0);
    // The large-pool approximation pays the entitlement regardless.
    PoolCredits unit = pool_credits(pool, {1, 1}, GainMode::Unit);
    CHECK(unit.gamma == 1.0);
    CHECK(unit.credits(0) == doctest::Approx(100.0).epsilon(1e-15));
}

TEST_CASE("two-member pool transfers the forfeited wealth") {
    Pool pool{{100.0, 0.5}, {100.0, 0.5}};
    PoolCredits credits = pool_credits(pool, {1, 0}, GainMode::Exact);
    CHECK(credits.gamma == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(credits.credits(0) == doctest::Approx(100.0).epsilon(1e-15));
    CHECK(credits.credits(1) == 0.0);
}

TEST_CASE("forfeiture without entitlement is a domain error") {
    Pool pool{{100.0, 0.0}, {100.0, 0.5}};
    // The delta = 0 survivor has no entitlement; the other member died.
    CHECK_THROWS_AS(pool_credits(pool, {1, 0}, GainMode::Exact), DomainError);
    CHECK_THROWS_AS(pool_credits(pool, {1}, GainMode::Exact), ContractError);
    Pool bad{{100.0, 1.0}};
    CHECK_THROWS_AS(pool_credits(bad, {1}, GainMode::Exact), DomainError);
}

TEST_CASE("exact credits balance the budget on heterogeneous pools") {
    auto rng = path_stream(4242, 0);
    std::uniform_real_distribution<double> wealth(10.0, 1000.0);
    std::uniform_real_distribution<double> delta(0.001, 0.1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        Pool pool(200);
        std::vector<std::uint8_t> survived(200);
        for (int j = 0; j < 200; ++j) {
            pool[j] = {wealth(rng), delta(rng)};
            survived[j] = unif(rng) < 0.95 ? 1 : 0;
        }
        double forfeited = 0.0;
        for (int j = 0; j < 200; ++j)
            if (!survived[j]) forfeited += pool[j].wealth;
        PoolCredits credits = pool_credits(pool, survived, GainMode::Exact);
        if (forfeited == 0.0) {
            CHECK(credits.gamma == 0.0);
            continue;
        }
        CHECK(credits.credits.sum() == doctest::Approx(forfeited).epsilon(1e-9));
        for (int j = 0; j < 200; ++j)
            if (!survived[j]) CHECK(credits.credits(j) == 0.0);
    }
}

TEST_CASE("homogeneous pools keep the group factor near one") {
    const int members = 10000, reps = 50;
    const double d = 0.02;
    double gamma_sum = 0.0;
    auto rng = path_stream(777, 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Pool pool(members, PoolMember{1.0, d});
    std::vector<std::uint8_t> survived(members);
    for (int rep = 0; rep < reps; ++rep) {
        for (int j = 0; j < members; ++j) survived[j] = unif(rng) < d ? 0 : 1;
        gamma_sum += pool_credits(pool, survived, GainMode::Exact).gamma;
    }
    CHECK(std::abs(gamma_sum / reps - 1.0) < 0.04);
}

TEST_CASE("bias ratios expose concentrated pools") {
    Pool even(100, PoolMember{50.0, 0.02});
    BiasReport report = small_bias_check(even, 0.05);
    CHECK_FALSE(report.degenerate);
    CHECK(report.flagged.empty());
    CHECK(report.ratios(0) == doctest::Approx(1.0 / (0.98 * 100)).epsilon(1e-12));

    Pool solo{{500.0, 0.02}};
    BiasReport single = small_bias_check(solo, 0.05);
    REQUIRE(single.flagged.size() == 1);
    CHECK(single.flagged[0] == 0);
    CHECK(single.ratios(0) == doctest::Approx(1.0 / 0.98).epsilon(1e-12));

    Pool lopsided{{990.0, 0.02}, {10.0, 0.02}};
    BiasReport skew = small_bias_check(lopsided, 0.1);
    REQUIRE(skew.flagged.size() == 1);
    CHECK(skew.flagged[0] == 0);

    Pool dead(3, PoolMember{100.0, 0.0});
    BiasReport degenerate = small_bias_check(dead, 0.05);
    CHECK(degenerate.degenerate);
    CHECK(degenerate.flagged.empty());
    CHECK(degenerate.ratios.cwiseAbs().maxCoeff() == 0.0);
}

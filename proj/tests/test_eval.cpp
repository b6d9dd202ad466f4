#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "tontine/errors.hpp"
#include "tontine/eval.hpp"
#include "tontine/io.hpp"
#include "tontine/rng.hpp"

using namespace tontine;

namespace {

Scenario run_scenario(double w0, int horizon, double fee = 0.0, double mu_bc = 0.0) {
    Scenario sc;
    sc.w0 = w0;
    sc.horizon_years = horizon;
    sc.q_min = 40.0;
    sc.q_max = 80.0;
    sc.fee = fee;
    sc.mu_bc = mu_bc;
    sc.alpha = 0.05;
    sc.epsilon = -1e-4;
    return sc;
}

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Vec iota_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = i + 1.0;
    return v;
}

}  // namespace

TEST_CASE("empirical tail statistics use the ceil convention") {
    VarCvar tail = empirical_var_cvar(iota_vec(100), 0.05);
    CHECK(tail.var == 5.0);
    CHECK(tail.cvar == 3.0);

    VarCvar all = empirical_var_cvar(iota_vec(100), 1.0);
    CHECK(all.var == 100.0);
    CHECK(all.cvar == doctest::Approx(50.5).epsilon(1e-15));

    // Tiny alpha still keeps at least one sample.
    VarCvar one = empirical_var_cvar(iota_vec(100), 0.004);
    CHECK(one.var == 1.0);
    CHECK(one.cvar == 1.0);

    VarCvar flat = empirical_var_cvar(Vec::Constant(7, 3.25), 0.3);
    CHECK(flat.var == 3.25);
    CHECK(flat.cvar == 3.25);

    CHECK_THROWS_AS(empirical_var_cvar(Vec(), 0.05), ContractError);
    CHECK_THROWS_AS(empirical_var_cvar(iota_vec(5), 0.0), ContractError);
    CHECK_THROWS_AS(empirical_var_cvar(iota_vec(5), 1.5), ContractError);
}

TEST_CASE("tail ordering cvar <= var <= mean on random samples") {
    auto rng = path_stream(51, 0);
    std::normal_distribution<double> gauss(100.0, 25.0);
    Vec samples(400);
    for (int i = 0; i < 400; ++i) samples(i) = gauss(rng);
    VarCvar tail = empirical_var_cvar(samples, 0.05);
    CHECK(tail.cvar <= tail.var);
    CHECK(tail.var <= samples.mean());
}

TEST_CASE("constant floor withdrawals drive the account to -200") {
    // Unit returns, no fee, no spread, no mortality: thirty years of the
    // owed floor on 1000 leaves exactly -200 at the end.
    Scenario sc = run_scenario(1000.0, 30);
    PathSet paths = testsup::flat_paths(3, 30, 2, 1.0);
    ConstantRule rule{40.0, vec2(0.5, 0.5)};
    RolloutResult res = rollout(PolicyRule{rule}, paths, sc);
    for (int n = 0; n < 3; ++n) {
        CHECK(res.terminal_wealth(n) == -200.0);
        CHECK(res.insolvency_at(n) == 24);  // 1000 - 24*40 = 40 covers one last q
        CHECK(res.withdrawals(n, 30) == 0.0);
        CHECK(res.withdrawals.row(n).sum() == 1200.0);
        CHECK(res.wealth_pre(n, 0) == 1000.0);
        CHECK(res.wealth_pre(n, 30) == -200.0);
    }
    CHECK(ew_annualized(res, 30) == 40.0);
}

TEST_CASE("zero withdrawals with unit returns conserve wealth") {
    Scenario sc = run_scenario(1000.0, 5);
    sc.q_min = 0.0;
    sc.q_max = 0.0;
    PathSet paths = testsup::flat_paths(2, 5, 2, 1.0);
    ConstantRule rule{0.0, vec2(0.25, 0.75)};
    RolloutResult res = rollout(PolicyRule{rule}, paths, sc);
    CHECK(res.terminal_wealth(0) == 1000.0);
    CHECK(res.withdrawals.cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.insolvency_at(0) == -1);
}

TEST_CASE("requested withdrawals clamp into the admissible interval") {
    Scenario sc = run_scenario(1000.0, 14);
    PathSet paths = testsup::flat_paths(1, 14, 2, 1.0);
    ConstantRule rule{500.0, vec2(0.5, 0.5)};  // far above the cap
    RolloutResult res = rollout(PolicyRule{rule}, paths, sc);
    for (int m = 0; m < 14; ++m) {
        double q = res.withdrawals(0, m);
        double hi = std::max(sc.q_min, std::min(sc.q_max, res.wealth_pre(0, m)));
        CHECK(q >= sc.q_min);
        CHECK(q <= hi + 1e-12);
    }
    // 1000/80 = 12.5: the cap binds for 12 years, then the floor is owed.
    CHECK(res.withdrawals(0, 0) == 80.0);
    CHECK(res.withdrawals(0, 12) == 40.0);
}

TEST_CASE("constant rule validates its weights") {
    Scenario sc = run_scenario(1000.0, 2);
    PathSet paths = testsup::flat_paths(1, 2, 2, 1.0);
    CHECK_THROWS_AS(rollout(PolicyRule{ConstantRule{40.0, vec2(0.6, 0.6)}}, paths, sc),
                    ContractError);
    Vec three = Vec::Constant(3, 1.0 / 3.0);
    CHECK_THROWS_AS(rollout(PolicyRule{ConstantRule{40.0, three}}, paths, sc), ContractError);
}

TEST_CASE("neural rollouts respect the control constraints") {
    Scenario sc = run_scenario(1000.0, 4);
    PathSet paths = simulate_kou(
        [] {
            KouMarket m;
            m.stock.mu = 0.06;
            m.stock.sigma = 0.18;
            m.bond.mu = 0.005;
            m.bond.sigma = 0.01;
            m.rho_sb = 0.1;
            return m;
        }(),
        64, 4, 8);
    PolicyModel model = make_policy_model(2, {4}, Activation::Tanh, 1000.0, 4);
    PolicyParams params = init_params(model, 12, 1000.0, 0.5);
    RolloutResult res = rollout(PolicyRule{NeuralRule{model, params}}, paths, sc);
    for (int n = 0; n < 64; ++n)
        for (int m = 0; m < 4; ++m) {
            double q = res.withdrawals(n, m);
            double hi = std::max(sc.q_min, std::min(sc.q_max, res.wealth_pre(n, m)));
            CHECK(q >= sc.q_min - 1e-12);
            CHECK(q <= hi + 1e-12);
        }
    CHECK(res.withdrawals.col(4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("benchmark grid counts match the simplex enumeration") {
    Scenario sc = run_scenario(1000.0, 2);
    PathSet paths = testsup::flat_paths(4, 2, 2, 1.0);
    BenchmarkResult two = benchmark_search(paths, sc, 0.1);
    CHECK(two.grid.size() == 11);

    Scenario four = sc;
    four.asset_count = 4;
    four.bond_leg = 1;
    PathSet paths4 = testsup::flat_paths(4, 2, 4, 1.0);
    BenchmarkResult big = benchmark_search(paths4, four, 0.1);
    CHECK(big.grid.size() == 286);  // compositions of 10 into 4 parts

    CHECK_THROWS_AS(benchmark_search(paths, sc, 0.3), ContractError);
    CHECK_THROWS_AS(benchmark_search(paths, sc, 0.0), ContractError);
}

TEST_CASE("benchmark picks the dominating asset") {
    Scenario sc = run_scenario(1000.0, 2);
    PathSet paths = testsup::flat_paths(4, 2, 2, 1.0);
    // Asset 1 strictly dominates asset 0 on every path.
    for (int n = 0; n < 4; ++n)
        for (int m = 0; m < 2; ++m) {
            paths.gross(n, m * 2 + 0) = 0.9;
            paths.gross(n, m * 2 + 1) = 1.05;
        }
    BenchmarkResult result = benchmark_search(paths, sc, 0.1);
    CHECK(result.best.weights(0) == 0.0);
    CHECK(result.best.weights(1) == 1.0);
    double expect_cvar = result.best.cvar;
    for (const auto& cand : result.grid) CHECK(cand.cvar <= expect_cvar);
    CHECK(result.best.ew == doctest::Approx(40.0));
}

TEST_CASE("benchmark ties resolve to the lexicographically smallest weights") {
    Scenario sc = run_scenario(1000.0, 2);
    PathSet paths = testsup::flat_paths(4, 2, 2, 1.0);  // both assets identical
    BenchmarkResult result = benchmark_search(paths, sc, 0.5);
    CHECK(result.best.weights(0) == 0.0);
    CHECK(result.best.weights(1) == 1.0);
}

TEST_CASE("control surfaces export to csv grids") {
    Scenario sc = run_scenario(1000.0, 2);
    PolicyModel model;
    model.q_net = NetSpec{2, {}, 1, Activation::Tanh};
    model.p_net = NetSpec{2, {}, 2, Activation::Tanh};
    model.scaling.wealth_scale = 1000.0;
    model.scaling.time_scale = 2.0;
    PolicyParams params;
    params.theta_q = Vec::Zero(3);
    params.theta_p = Vec::Zero(8);
    params.w_star = 0.0;

    auto dir = testsup::temp_dir("heatmaps");
    Vec grid = vec2(10.0, 500.0);
    export_heatmaps(model, params, sc, grid, dir);

    auto q_lines = read_lines(dir + "/heatmap_withdrawal.csv");
    REQUIRE(q_lines.size() >= 3);
    CHECK(q_lines[0] == "wealth,t0,t1");
    CHECK(q_lines[1] == "10,40,40");    // below the floor: the floor rules
    CHECK(q_lines[2] == "500,60,60");   // sigmoid(0) = 1/2 of [40, 80]

    auto p_lines = read_lines(dir + "/heatmap_asset_0.csv");
    REQUIRE(p_lines.size() >= 3);
    CHECK(p_lines[1] == "10,0.5,0.5");
    auto p1_lines = read_lines(dir + "/heatmap_asset_1.csv");
    CHECK(p1_lines[2] == "500,0.5,0.5");
}

TEST_CASE("wealth percentile bands use the tail rank convention") {
    RolloutResult res;
    res.wealth_pre = Mat(100, 2);
    for (int i = 0; i < 100; ++i) {
        res.wealth_pre(i, 0) = i + 1.0;          // 1..100
        res.wealth_pre(i, 1) = 2.0 * (i + 1.0);  // 2..200
    }
    res.withdrawals = Mat::Zero(100, 2);
    res.terminal_wealth = Vec::Zero(100);
    res.insolvency_at = Eigen::VectorXi::Constant(100, -1);

    auto dir = testsup::temp_dir("percentiles");
    std::string path = dir + "/percentiles.csv";
    export_percentiles(res, path);
    auto lines = read_lines(path);
    REQUIRE(lines.size() >= 3);
    CHECK(lines[0] == "time,p5,p50,p95");
    CHECK(lines[1] == "0,5,50,95");
    CHECK(lines[2] == "1,10,100,190");
}

TEST_CASE("annualized withdrawals guard the horizon") {
    RolloutResult res;
    res.withdrawals = Mat::Constant(4, 3, 50.0);
    res.withdrawals.col(2).setZero();
    CHECK(ew_annualized(res, 2) == 50.0);
    CHECK_THROWS_AS(ew_annualized(res, 0), ContractError);
}

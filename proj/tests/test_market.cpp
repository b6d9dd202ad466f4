#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "tontine/errors.hpp"
#include "tontine/io.hpp"
#include "tontine/market.hpp"
#include "tontine/rng.hpp"

using namespace tontine;

namespace {

KouParams stock_params() {
    return {0.08912, 0.1460, 0.3263, 0.2258, 4.3625, 5.5335};
}

KouParams bond_params() {
    return {0.00460, 0.0130, 0.5053, 0.3958, 65.801, 57.793};
}

KouMarket desk_market() {
    KouMarket m;
    m.stock = stock_params();
    m.bond = bond_params();
    m.rho_sb = 0.08420;
    return m;
}

std::string month_panel(int n_months, const std::vector<double>& returns, double cpi = 0.0) {
    std::string body = "date,asset,cpi\n";
    for (int i = 0; i < n_months; ++i) {
        int year = 1990 + i / 12, month = 1 + i % 12;
        char date[16];
        std::snprintf(date, sizeof date, "%04d-%02d", year, month);
        body += std::string(date) + "," + format_double(returns[i % returns.size()]) + "," +
                format_double(cpi) + "\n";
    }
    return body;
}

}  // namespace

TEST_CASE("jump compensator matches closed forms") {
    KouParams sym;
    sym.zeta = 0.5;
    sym.eta1 = 2.0;
    sym.eta2 = 2.0;
    CHECK(kou_compensator(sym) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    CHECK(kou_compensator(stock_params()) ==
          doctest::Approx(-0.051344560761053204).epsilon(1e-14));
    CHECK(kou_compensator(bond_params()) ==
          doctest::Approx(-0.004168803191578863).epsilon(1e-14));

    KouParams bad = sym;
    bad.eta1 = 1.0;
    CHECK_THROWS_AS(kou_compensator(bad), ValidationError);
}

TEST_CASE("log drift includes the mean jump correction") {
    CHECK(kou_log_drift(stock_params()) == doctest::Approx(0.06645168815729838).epsilon(1e-14));
    CHECK(kou_log_drift(bond_params()) == doctest::Approx(0.004378743599621815).epsilon(1e-14));
    // Without jumps the drift is just mu - sigma^2/2.
    KouParams plain;
    plain.mu = 0.05;
    plain.sigma = 0.2;
    CHECK(kou_log_drift(plain) == doctest::Approx(0.05 - 0.02).epsilon(1e-15));
}

TEST_CASE("deterministic market returns exactly e^mu") {
    KouMarket m;
    m.stock.mu = 0.05;
    m.bond.mu = 0.01;
    m.rho_sb = 0.3;
    PathSet paths = simulate_kou(m, 3, 2, 7);
    REQUIRE(paths.n_assets == 2);
    for (int n = 0; n < 3; ++n)
        for (int p = 0; p < 2; ++p) {
            CHECK(paths.gross_at(n, p, 0) == doctest::Approx(std::exp(0.05)).epsilon(1e-14));
            CHECK(paths.gross_at(n, p, 1) == doctest::Approx(std::exp(0.01)).epsilon(1e-14));
        }
    CHECK(paths.cpi_index.minCoeff() == 1.0);
    CHECK(paths.cpi_index.maxCoeff() == 1.0);
    CHECK(paths.deltas.cwiseAbs().maxCoeff() == 0.0);
    CHECK(paths.seed == 7);
}

TEST_CASE("mean gross return honors E[R] = e^mu under jumps") {
    PathSet paths = simulate_kou(desk_market(), 20000, 1, 31337);
    PathStats stats = path_stats(paths);
    double target = 1.093211833875585;  // e^0.08912
    CHECK(std::abs(stats.mean_gross(0) - target) <= 4.0 * stats.se_gross(0));
    CHECK(std::abs(stats.mean_gross(1) - std::exp(0.00460)) <= 4.0 * stats.se_gross(1));
    // Yearly log drift approaches mu - lambda*kappa - sigma^2/2 + lambda E[Y].
    double se_log_b = stats.vol_log(1) / std::sqrt(20000.0);
    CHECK(std::abs(stats.mean_log(1) - kou_log_drift(bond_params())) <= 4.0 * se_log_b);
}

TEST_CASE("brownian correlation carries into yearly log returns") {
    KouMarket m;
    m.stock.mu = 0.06;
    m.stock.sigma = 0.2;
    m.bond.mu = 0.01;
    m.bond.sigma = 0.05;
    m.rho_sb = 0.999;
    PathStats high = path_stats(simulate_kou(m, 2000, 1, 5));
    CHECK(high.corr_log(0, 1) > 0.99);
    m.rho_sb = 0.0;
    PathStats zero = path_stats(simulate_kou(m, 2000, 1, 5));
    CHECK(std::abs(zero.corr_log(0, 1)) < 0.1);
}

TEST_CASE("per-path streams make prefixes independent of path count") {
    PathSet small = simulate_kou(desk_market(), 4, 3, 99);
    PathSet big = simulate_kou(desk_market(), 8, 3, 99);
    CHECK((big.gross.topRows(4) - small.gross).cwiseAbs().maxCoeff() == 0.0);
    PathSet again = simulate_kou(desk_market(), 4, 3, 99);
    CHECK((again.gross - small.gross).cwiseAbs().maxCoeff() == 0.0);
    PathSet other = simulate_kou(desk_market(), 4, 3, 100);
    CHECK((other.gross - small.gross).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("panel loader enforces shape and month continuity") {
    auto dir = testsup::temp_dir("panel");
    auto ok = testsup::write_temp(dir, "ok.csv",
                                  "date,stock,bond,cpi\n"
                                  "2001-01,0.01,0.002,0.001\n"
                                  "2001-02,-0.03,0.001,0.002\n");
    AssetPanel panel = load_panel(ok);
    CHECK(panel.asset_names == std::vector<std::string>{"stock", "bond"});
    CHECK(panel.returns(1, 0) == -0.03);
    CHECK(panel.cpi(0) == 0.001);
    CHECK(panel.dates[1] == "2001-02");

    auto dup = testsup::write_temp(dir, "dup.csv",
                                   "date,a,cpi\n"
                                   "2001-01,0.01,0\n"
                                   "2001-01,0.02,0\n");
    CHECK_THROWS_AS(load_panel(dup), ValidationError);
    auto gap = testsup::write_temp(dir, "gap.csv",
                                   "date,a,cpi\n"
                                   "2001-01,0.01,0\n"
                                   "2001-03,0.02,0\n");
    CHECK_THROWS_WITH_AS(load_panel(gap), doctest::Contains("consecutive"), ValidationError);
    auto crash = testsup::write_temp(dir, "crash.csv",
                                     "date,a,cpi\n"
                                     "2001-01,-1.5,0\n");
    CHECK_THROWS_AS(load_panel(crash), ValidationError);
    auto head = testsup::write_temp(dir, "head.csv", "time,a,cpi\n2001-01,0.01,0\n");
    CHECK_THROWS_AS(load_panel(head), ParseError);
}

TEST_CASE("flat panel summarizes to zeros") {
    auto dir = testsup::temp_dir("panel_flat");
    auto path = testsup::write_temp(dir, "flat.csv", month_panel(12, {0.0}));
    PanelSummary s = summarize_panel(load_panel(path));
    CHECK(s.mean_arith(0) == 0.0);
    CHECK(s.mean_geom(0) == doctest::Approx(0.0));
    CHECK(s.vol(0) == 0.0);
    CHECK(s.var05(0) == 0.0);
    CHECK(s.cvar05(0) == 0.0);
    CHECK(s.cpi_drift == 0.0);
}

TEST_CASE("panel tail statistics use the empirical convention") {
    // Returns 0.01 .. 1.00 over 100 months: the 5% tail is the lowest five.
    std::vector<double> r(100);
    for (int i = 0; i < 100; ++i) r[i] = 0.01 * (i + 1);
    auto dir = testsup::temp_dir("panel_tail");
    auto path = testsup::write_temp(dir, "tail.csv", month_panel(100, r, 0.002));
    PanelSummary s = summarize_panel(load_panel(path));
    CHECK(s.var05(0) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(s.cvar05(0) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(s.mean_arith(0) == doctest::Approx(12.0 * 0.505).epsilon(1e-12));
    CHECK(s.cpi_drift == doctest::Approx(0.024).epsilon(1e-12));
}

TEST_CASE("single-month panel bootstraps to a constant power") {
    auto dir = testsup::temp_dir("panel_one");
    auto path = testsup::write_temp(dir, "one.csv", month_panel(1, {0.01}, 0.002));
    AssetPanel panel = load_panel(path);
    PathSet paths = bootstrap_paths(panel, BootstrapSpec{}, 5, 3, 11);
    double yearly = std::pow(1.01, 12);
    for (int n = 0; n < 5; ++n)
        for (int m = 0; m < 3; ++m)
            CHECK(paths.gross_at(n, m, 0) == doctest::Approx(yearly).epsilon(1e-13));
    // CPI index compounds the same single month.
    CHECK(paths.cpi_index(0, 1) == doctest::Approx(std::pow(1.002, 12)).epsilon(1e-13));
    CHECK(paths.cpi_index(2, 3) == doctest::Approx(std::pow(1.002, 36)).epsilon(1e-13));
}

TEST_CASE("bootstrap is an exact replay of the block indices") {
    std::vector<double> r(48);
    for (int i = 0; i < 48; ++i) r[i] = 0.001 * i - 0.01;
    auto dir = testsup::temp_dir("panel_replay");
    auto path = testsup::write_temp(dir, "p.csv", month_panel(48, r, 0.001));
    AssetPanel panel = load_panel(path);
    BootstrapSpec spec;
    spec.expected_block_len = 6.0;
    PathSet paths = bootstrap_paths(panel, spec, 3, 2, 77);
    for (int n = 0; n < 3; ++n) {
        auto rng = path_stream(77, static_cast<std::uint64_t>(n));
        auto idx = stationary_block_indices(48, 24, 6.0, rng);
        REQUIRE(idx.size() == 24);
        for (int m = 0; m < 2; ++m) {
            double g = 1.0;
            for (int j = 0; j < 12; ++j) g *= 1.0 + panel.returns(idx[m * 12 + j], 0);
            CHECK(paths.gross_at(n, m, 0) == g);
        }
    }
}

TEST_CASE("block indices stay in range and honor length one") {
    auto rng = path_stream(3, 0);
    auto idx = stationary_block_indices(10, 500, 24.0, rng);
    CHECK(idx.size() == 500);
    for (int i : idx) {
        CHECK(i >= 0);
        CHECK(i < 10);
    }
    CHECK_THROWS_AS(stationary_block_indices(10, 5, 0.5, rng), ValidationError);
    CHECK_THROWS_AS(stationary_block_indices(0, 5, 2.0, rng), ContractError);
}

TEST_CASE("bootstrap preserves the monthly log mean") {
    // Uniform starts with wraparound keep each month equally likely, so the
    // yearly log mean converges to 12x the panel's monthly log mean.
    std::vector<double> r(36);
    for (int i = 0; i < 36; ++i) r[i] = (i % 2 == 0 ? 0.02 : -0.015) + 0.0002 * i;
    auto dir = testsup::temp_dir("panel_mean");
    auto path = testsup::write_temp(dir, "p.csv", month_panel(36, r));
    AssetPanel panel = load_panel(path);
    double monthly = (panel.returns.col(0).array() + 1.0).log().mean();
    PathSet paths = bootstrap_paths(panel, BootstrapSpec{}, 4000, 1, 13);
    PathStats stats = path_stats(paths);
    CHECK(std::abs(stats.mean_log(0) - 12.0 * monthly) <=
          4.0 * stats.vol_log(0) / std::sqrt(4000.0));
}

TEST_CASE("attach_deltas broadcasts or matches row counts") {
    PathSet paths = testsup::flat_paths(3, 4, 2, 1.0);
    DeathProbPaths one;
    one.deltas = Mat::Constant(1, 4, 0.02);
    attach_deltas(paths, one);
    CHECK(paths.deltas.rows() == 3);
    CHECK(paths.deltas(2, 3) == 0.02);

    DeathProbPaths full;
    full.deltas = Mat::Constant(3, 4, 0.05);
    attach_deltas(paths, full);
    CHECK(paths.deltas(1, 1) == 0.05);

    DeathProbPaths bad;
    bad.deltas = Mat::Constant(2, 4, 0.05);
    CHECK_THROWS_AS(attach_deltas(paths, bad), ContractError);
    DeathProbPaths short_horizon;
    short_horizon.deltas = Mat::Constant(1, 3, 0.05);
    CHECK_THROWS_AS(attach_deltas(paths, short_horizon), ContractError);
}

TEST_CASE("constant paths are flagged degenerate") {
    PathSet paths = testsup::flat_paths(4, 3, 2, 1.05);
    PathStats stats = path_stats(paths);
    CHECK(stats.degenerate);
    CHECK(stats.vol_log(0) == 0.0);
    CHECK(stats.corr_log(0, 1) == 0.0);
    CHECK(stats.mean_log(0) == doctest::Approx(std::log(1.05)).epsilon(1e-15));
    CHECK(stats.mean_gross(1) == doctest::Approx(1.05).epsilon(1e-15));
    CHECK(stats.se_gross(0) <= 1e-15);
    CHECK(stats.cpi_drift == 0.0);
}

TEST_CASE("identical asset columns correlate perfectly") {
    PathSet paths;
    paths.n_paths = 50;
    paths.periods = 2;
    paths.n_assets = 2;
    paths.gross = Mat(50, 4);
    auto rng = path_stream(21, 0);
    std::uniform_real_distribution<double> unif(0.8, 1.3);
    for (int n = 0; n < 50; ++n)
        for (int m = 0; m < 2; ++m) {
            double g = unif(rng);
            paths.gross(n, m * 2 + 0) = g;
            paths.gross(n, m * 2 + 1) = g;
        }
    paths.cpi_index = Mat::Ones(50, 3);
    paths.deltas = Mat::Zero(50, 2);
    PathStats stats = path_stats(paths);
    CHECK(stats.corr_log(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(stats.degenerate);
}

TEST_CASE("path sets round-trip through the binary format") {
    PathSet paths = simulate_kou(desk_market(), 6, 4, 12345);
    DeathProbPaths deaths;
    deaths.deltas = Mat::Constant(1, 4, 0.013);
    attach_deltas(paths, deaths);

    auto dir = testsup::temp_dir("pathset_io");
    std::string bin = dir + "/paths.bin";
    std::string sidecar = dir + "/paths.json";
    save_pathset(paths, bin, sidecar, "kou2(steps_per_year=12)+table");

    PathSet back = load_pathset(bin);
    CHECK(back.n_paths == 6);
    CHECK(back.periods == 4);
    CHECK(back.n_assets == 2);
    CHECK(back.seed == 12345);
    CHECK((back.gross - paths.gross).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.cpi_index - paths.cpi_index).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.deltas - paths.deltas).cwiseAbs().maxCoeff() == 0.0);

    std::string meta = read_file(sidecar);
    CHECK(meta.find("pathset-v1") != std::string::npos);
    CHECK(meta.find("kou2(steps_per_year=12)+table") != std::string::npos);

    std::string garbage = dir + "/bad.bin";
    write_file(garbage, "not a pathset");
    CHECK_THROWS_AS(load_pathset(garbage), ParseError);
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tontine/eval.hpp"
#include "tontine/market.hpp"
#include "tontine/types.hpp"

namespace tontine {

// Money-back guarantee payout at death: the real value of the shortfall
// between the initial capital and what was withdrawn so far.
// cpi_ratio_at_death = CPI_{m_tau} / CPI_0.
double mbg_payout(double l0, double cum_nominal_withdrawals, double cpi_ratio_at_death);

struct PricingConfig {
    double l0 = 1000.0;        // guaranteed capital
    double alpha_g = 0.05;     // upper-tail level for the capital charge
    double lambda = 0.5;       // weight on the tail charge in the fee
    std::uint64_t death_seed = 0;  // death draws, independent of the market
};

struct MbgQuote {
    double e_hat = 0.0;        // mean payout per issued guarantee
    double cvar_hat = 0.0;     // mean of the ceil(alpha_g * K) largest payouts
    double f_hat = 0.0;        // (e_hat + lambda * cvar_hat) / l0
    double trigger_rate = 0.0; // fraction of paths with a positive payout
    int deaths = 0;            // paths on which death occurred in-horizon
};

struct MbgResult {
    MbgQuote quote;
    Vec payouts;                    // per path; zero for survivors
    Eigen::VectorXi death_period;   // m_tau per path, -1 for survivors
};

// Prices the guarantee by rolling the account forward under `rule` and
// drawing one death indicator per year from stream (death_seed, path):
// death in (t_m, t_{m+1}] when U < delta_{m+1}. Withdrawals accumulate in
// nominal terms (q_m * CPI_m / CPI_0); the payout deflates by CPI at the
// end of the death year. The account recursion matches rollout() exactly.
MbgResult price(const PolicyRule& rule, const PathSet& paths, const Scenario& scenario,
                const PricingConfig& pricing);

// Fee rates on a (gamma, alpha_g) grid, one column per lambda; the stored
// per-gamma policies are reused and lambda enters in closed form.
struct SensitivityRow {
    double gamma = 0.0;
    double alpha_g = 0.0;
    double e_hat = 0.0;
    double cvar_hat = 0.0;
    std::vector<double> f_by_lambda;
};

std::vector<SensitivityRow> sensitivity_grid(
    const std::vector<std::pair<double, PolicyRule>>& rules_by_gamma, const PathSet& paths,
    const Scenario& scenario, const std::vector<double>& alpha_gs,
    const std::vector<double>& lambdas, double l0, std::uint64_t death_seed);

// payout_histogram.csv: bin_lo, bin_hi, count over [0, l0].
void save_payout_histogram(const Vec& payouts, double l0, int bins, const std::string& path);

void save_quote_json(const MbgQuote& quote, const PricingConfig& pricing,
                     const std::string& path);

void save_sensitivity_csv(const std::vector<SensitivityRow>& rows,
                          const std::vector<double>& lambdas, const std::string& path);

}  // namespace tontine

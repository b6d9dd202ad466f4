#pragma once

#include <string>
#include <variant>
#include <vector>

#include "tontine/market.hpp"
#include "tontine/policy.hpp"
#include "tontine/types.hpp"

namespace tontine {

// Empirical lower-tail risk at level alpha: var is the ceil(alpha*n)-th
// smallest sample, cvar the mean of the samples at or below it.
struct VarCvar {
    double var = 0.0;
    double cvar = 0.0;
};
VarCvar empirical_var_cvar(Vec samples, double alpha);

// Fixed withdrawal and fixed rebalancing weights.
struct ConstantRule {
    double q = 0.0;
    Vec weights;
};

// Trained controls.
struct NeuralRule {
    PolicyModel model;
    PolicyParams params;
};

using PolicyRule = std::variant<ConstantRule, NeuralRule>;

// One account per path rolled through the full horizon.
struct RolloutResult {
    Vec terminal_wealth;            // W_T per path
    Mat withdrawals;                // N x (M+1); column M is zero
    Mat wealth_pre;                 // N x (M+1): W_{m^-} after credit and fee
    Eigen::VectorXi insolvency_at;  // first m with W_{m^+} <= 0, else -1
};

RolloutResult rollout(const PolicyRule& rule, const PathSet& paths, const Scenario& scenario);

// Mean yearly withdrawal (total withdrawn over the horizon / M).
double ew_annualized(const RolloutResult& result, int horizon_years);

// Best constant rule at q = q_min over the simplex grid with the given
// step; ties resolved toward the lexicographically smallest weights.
struct BenchmarkCandidate {
    Vec weights;
    double cvar = 0.0;
    double ew = 0.0;
};
struct BenchmarkResult {
    BenchmarkCandidate best;
    std::vector<BenchmarkCandidate> grid;  // enumeration order
};
BenchmarkResult benchmark_search(const PathSet& paths, const Scenario& scenario,
                                 double grid_step);

// Control surfaces on a wealth x time grid. Writes heatmap_withdrawal.csv
// and heatmap_<asset index>.csv under out_dir (first column wealth, one
// column per decision time).
void export_heatmaps(const PolicyModel& model, const PolicyParams& params,
                     const Scenario& scenario, const Vec& wealth_grid,
                     const std::string& out_dir);

// percentiles.csv: time, p5, p50, p95 of pre-withdrawal wealth.
void export_percentiles(const RolloutResult& result, const std::string& path);

}  // namespace tontine

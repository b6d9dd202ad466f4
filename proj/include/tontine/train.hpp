#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tontine/eval.hpp"
#include "tontine/market.hpp"
#include "tontine/policy.hpp"
#include "tontine/types.hpp"

namespace tontine {

// Scalarized objective, averaged over paths:
//   sum_m q_m + gamma * (w + (1/alpha) * min(W_T - w, 0)) + epsilon * W_T
// with w = params.w_star. Maximizing over w recovers gamma * CVaR_alpha.
struct ObjectiveValue {
    double value = 0.0;
    Vec per_path;
};
ObjectiveValue objective(const PolicyModel& model, const PolicyParams& params,
                         const PathSet& paths, const Scenario& scenario, double gamma);

// Objective and exact gradient over the listed paths, reverse-mode through
// the full wealth recursion. Kink conventions: d min(u,0)/du = 1 for u < 0
// else 0, and d max(v,0)/dv = 1 for v > 0 else 0.
double objective_grad(const PolicyModel& model, const PolicyParams& params,
                      const PathSet& paths, const std::vector<int>& path_idx,
                      const Scenario& scenario, double gamma, Gradients& grad);

struct TrainConfig {
    int iterations = 2000;
    int minibatch = 1024;
    double learning_rate = 0.01;
    double lr_decay_factor = 0.1;
    double lr_decay_at = 0.8;  // fraction of iterations before decay
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double w_star_init_frac = 0.5;
    std::vector<int> hidden = {8, 8};
    Activation act = Activation::Tanh;
    std::uint64_t seed = 1;  // parameter init and minibatch schedule
    int trace_every = 50;
};

struct TrainReport {
    std::vector<int> trace_iters;
    std::vector<double> trace_objective;  // minibatch objective
    double final_objective = 0.0;         // full training set
    double eval_ew = 0.0;                 // held-out, when eval paths given
    double eval_cvar = 0.0;
    bool has_eval = false;
};

struct TrainResult {
    PolicyModel model;
    PolicyParams params;
    TrainReport report;
};

// Adam ascent with a fixed seed-derived minibatch schedule. w_star is
// updated in units of w0 so its step size matches the network weights.
TrainResult train(const TrainConfig& config, const Scenario& scenario, double gamma,
                  const PathSet& train_paths, const PathSet* eval_paths);

// One trained point per gamma, evaluated on held-out paths, sorted by cvar.
struct FrontierPoint {
    double gamma = 0.0;
    double ew_annualized = 0.0;
    double cvar = 0.0;
    double w_star = 0.0;
    PolicyParams params;
};

std::vector<FrontierPoint> sweep_frontier(const TrainConfig& config, const Scenario& scenario,
                                          const std::vector<double>& gammas,
                                          const PathSet& train_paths, const PathSet& eval_paths);

void save_train_report(const TrainReport& report, const std::string& path);

// frontier.csv: gamma, ew_annualized, cvar, w_star.
void save_frontier_csv(const std::vector<FrontierPoint>& points, const std::string& path);

}  // namespace tontine

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tontine/life_table.hpp"
#include "tontine/types.hpp"

namespace tontine {

// Deaths and central exposures on a rectangular age x year grid.
struct MortalityHistory {
    int age_min = 0;
    int age_max = -1;
    int year_min = 0;
    int year_max = -1;
    Mat deaths;    // rows: ages, cols: years
    Mat exposure;  // central exposure-to-risk

    int n_ages() const { return age_max - age_min + 1; }
    int n_years() const { return year_max - year_min + 1; }
};

// Loads a `year,age,deaths,exposure` CSV covering a complete grid.
MortalityHistory load_mortality_history(const std::string& path);

// log m(x,y) = alpha_x + beta_x * kappa_y with sum(beta) = 1 and
// sum(kappa) = 0; kappa follows a random walk with drift.
struct LcParams {
    std::vector<int> ages;
    std::vector<int> years;
    Vec alpha;     // per age
    Vec beta;      // per age, sums to 1
    Vec kappa;     // per year, sums to 0
    double drift = 0.0;
    double sigma = 0.0;  // stdev of kappa innovations (ML convention, 1/n)
};

// Least-squares fit via the leading singular pair of the centred
// log-central-rate matrix. CalibrationError when any rate is zero.
LcParams fit_lc(const MortalityHistory& history);

// logit q(x,y) = kappa1_y + (x - xbar) * kappa2_y; (kappa1, kappa2) follows
// a bivariate random walk with drift.
struct CbdParams {
    std::vector<int> ages;
    std::vector<int> years;
    double xbar = 0.0;          // mean fitted age
    Vec kappa1;                 // per year
    Vec kappa2;                 // per year
    Eigen::Vector2d drift = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();  // innovation covariance
};

// Per-year OLS on logit of q = D / (E + D/2). Needs at least two ages.
CbdParams fit_cbd(const MortalityHistory& history);

// Link between the projected index eta and a death probability.
//   LogCentral: eta is log m; q = 1 - exp(-m), constant force over the year.
//   LogitProb:  eta is logit q.
enum class LcLink { LogCentral, LogitProb };

struct LcModel {
    LcParams params;
    LcLink link = LcLink::LogCentral;
};

struct CbdModel {
    CbdParams params;
};

using MortalityModel = std::variant<LifeTable, LcModel, CbdModel>;

// Per-path death probabilities along the cohort diagonal.
struct DeathProbPaths {
    Mat deltas;  // K x M, row k: delta_1..delta_M for path k
    int x0 = 0;
    int y0 = 0;
    long clamped = 0;  // projected probabilities forced back into [eps, 1-eps]
};

// Draws K diagonal sequences delta_1..delta_M starting at (x0, y0). A plain
// life table yields K identical rows. Stochastic models use the fitted
// period indices for in-sample years and project beyond the last fitted
// year with one innovation per calendar year, one stream per path.
DeathProbPaths simulate_deltas(const MortalityModel& model, int x0, int y0, int periods,
                               int n_paths, std::uint64_t seed);

// Elementwise tontine gain rate delta / (1 - delta); DomainError outside [0, 1).
Vec gain_rates(const Vec& deltas);

}  // namespace tontine

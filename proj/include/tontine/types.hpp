#pragma once

#include <Eigen/Dense>

namespace tontine {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Retirement decumulation scenario. Monetary amounts are in thousands of
// units of real (inflation-adjusted) consumption at time 0.
struct Scenario {
    double w0 = 1000.0;       // initial account wealth
    int horizon_years = 30;   // M: annual decision times t_0..t_M
    double q_min = 40.0;      // withdrawal floor per year
    double q_max = 80.0;      // withdrawal cap per year
    double fee = 0.0;         // proportional fee taken once a year, m >= 1
    double mu_bc = 0.02;      // extra log cost of carrying negative wealth
    double alpha = 0.05;      // tail level of the terminal-wealth CVaR
    double epsilon = -1e-4;   // terminal-wealth tie-break weight
    int asset_count = 2;      // 2: (stock, bond); 4: adds foreign pair
    int bond_leg = 1;         // asset index that absorbs insolvent balances
    int age0 = 65;            // age at t_0
    int year0 = 2020;         // calendar year of t_0
};

// Throws ValidationError when a field is outside its documented range.
void validate_scenario(const Scenario& s);

}  // namespace tontine

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tontine/mortality.hpp"
#include "tontine/types.hpp"

namespace tontine {

// Double-exponential jump-diffusion for one asset's real return index,
// parameterized per year.
struct KouParams {
    double mu = 0.0;      // drift of the gross-return expectation: E[R] = e^mu
    double sigma = 0.0;   // diffusive volatility
    double lambda = 0.0;  // jump intensity
    double zeta = 0.5;    // probability that a jump is upward
    double eta1 = 2.0;    // upward jump rate, must exceed 1
    double eta2 = 2.0;    // downward jump rate
};

// Compensator kappa = E[e^Y] - 1 for one double-exponential jump.
double kou_compensator(const KouParams& p);

// E[log yearly gross return] = mu - lambda*kappa - sigma^2/2 + lambda*E[Y].
double kou_log_drift(const KouParams& p);

// Two-asset synthetic market: correlated Brownian parts, independent jumps.
struct KouMarket {
    KouParams stock;
    KouParams bond;
    double rho_sb = 0.0;
    int steps_per_year = 12;
};

// Monthly real total returns for k assets plus the CPI relative change.
struct AssetPanel {
    std::vector<std::string> dates;        // YYYY-MM, consecutive months
    std::vector<std::string> asset_names;  // from the header
    Mat returns;                           // rows: months, cols: assets
    Vec cpi;                               // monthly relative CPI change
};

AssetPanel load_panel(const std::string& path);

// Per-asset annualized summary of a monthly panel.
struct PanelSummary {
    std::vector<std::string> names;
    Vec mean_arith;  // 12 * mean monthly return
    Vec mean_geom;   // annualized geometric mean
    Vec vol;         // sqrt(12) * monthly stdev
    Vec var05;       // 5% lower-tail monthly value-at-risk (a quantile)
    Vec cvar05;      // mean of that tail
    double cpi_drift = 0.0;  // annualized mean CPI change
};

PanelSummary summarize_panel(const AssetPanel& panel);

// Yearly gross returns, CPI index, and death probabilities for N paths.
// gross(n, m*A + a) is the gross real return of asset a over year m
// (t_m to t_{m+1}); cpi_index(n, m) = CPI_m / CPI_0; deltas(n, m-1) is
// delta_m. Synthetic markets set cpi_index to 1 everywhere.
struct PathSet {
    int n_paths = 0;
    int periods = 0;   // M
    int n_assets = 0;
    Mat gross;         // N x (M * A)
    Mat cpi_index;     // N x (M + 1)
    Mat deltas;        // N x M, zero until mortality is attached
    std::uint64_t seed = 0;

    double gross_at(int n, int m, int a) const { return gross(n, m * n_assets + a); }
};

// Simulates the two-asset Kou market in steps_per_year substeps per year.
// Path n draws only from stream (seed, n).
PathSet simulate_kou(const KouMarket& market, int n_paths, int periods, std::uint64_t seed);

// Stationary block bootstrap: geometric block lengths (mean
// expected_block_len months), uniform starts, circular wraparound. All
// asset columns and the CPI are resampled with the same month indices.
struct BootstrapSpec {
    double expected_block_len = 24.0;  // months
};

PathSet bootstrap_paths(const AssetPanel& panel, const BootstrapSpec& spec, int n_paths,
                        int periods, std::uint64_t seed);

// Month indices for one bootstrap path; exposed so tests can replay the
// resampling. bootstrap_paths consumes exactly these indices per path.
std::vector<int> stationary_block_indices(int n_rows, int n_months, double expected_block_len,
                                          std::mt19937_64& rng);

// Copies death probabilities into the path set. Accepts one row
// (broadcast) or one row per path; periods must match.
void attach_deltas(PathSet& paths, const DeathProbPaths& deaths);

// Sample moments of the stored yearly paths.
struct PathStats {
    Vec mean_log;            // per asset, mean yearly log return
    Vec vol_log;             // per asset, stdev of yearly log return
    Mat corr_log;            // cross-asset correlation of yearly log returns
    Vec mean_gross;          // per asset, mean yearly gross return
    Vec se_gross;            // standard error of mean_gross
    double cpi_drift = 0.0;  // mean yearly log CPI change
    bool degenerate = false; // some asset had zero variance; corr entries 0
};

PathStats path_stats(const PathSet& paths);

// Flat little-endian binary plus a JSON sidecar (dims, seed, model
// description, content hash). Round-trips exactly.
void save_pathset(const PathSet& paths, const std::string& bin_path,
                  const std::string& sidecar_path, const std::string& model_desc);
PathSet load_pathset(const std::string& bin_path);

}  // namespace tontine

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tontine/market.hpp"
#include "tontine/mortality.hpp"
#include "tontine/train.hpp"
#include "tontine/types.hpp"

namespace tontine {

// Parsed run configuration (one JSON file drives every stage).
struct RunConfig {
    std::string config_path;   // as given
    std::string config_dir;    // directory of the file, for relative paths
    std::string raw;           // file bytes, hashed into the manifest
    std::string preset;        // optional tag, e.g. "table2-validation"
    std::string output_dir = "out";

    Scenario scenario;

    // Market: exactly one of the two is active.
    bool use_kou = true;
    KouMarket kou;
    std::string panel_csv;
    BootstrapSpec bootstrap;

    // Mortality.
    enum class MortalityKind { Table, Lc, Cbd } mortality_kind = MortalityKind::Table;
    std::string table_csv;
    std::string history_csv;
    LcLink lc_link = LcLink::LogCentral;

    // Path counts per role.
    int n_train = 4096;
    int n_eval = 4096;
    int n_price = 4096;

    TrainConfig train;
    double gamma = 1.5;                 // base policy
    std::vector<double> gammas = {0.2, 1.5};  // frontier sweep

    // Pricing.
    double l0 = 0.0;  // defaults to scenario.w0
    double alpha_g = 0.05;
    double lambda = 0.5;
    std::vector<double> alpha_gs = {0.01, 0.05};
    std::vector<double> lambdas = {0.0, 0.5, 1.0};
    int histogram_bins = 20;

    // Evaluation exports.
    double heatmap_wealth_min = 0.0;
    double heatmap_wealth_max = 2000.0;
    int heatmap_points = 21;
    double benchmark_grid_step = 0.1;

    // Seeds per role; train/eval/price must be distinct.
    std::uint64_t seed_train_paths = 1001;
    std::uint64_t seed_eval_paths = 2002;
    std::uint64_t seed_price_paths = 3003;
    std::uint64_t seed_mortality = 4004;
    std::uint64_t seed_death = 5005;
    std::uint64_t seed_train = 6006;
};

// Parses and validates; referenced files must exist. Relative paths are
// resolved against the config file's directory.
RunConfig load_run_config(const std::string& path);

// Replaces every seed with consecutive values derived from `base`.
void apply_seed_override(RunConfig& config, std::uint64_t base);

enum class Stage { Simulate, Train, Frontier, Eval, Price };

std::string stage_name(Stage stage);
Stage stage_from_name(const std::string& name);

// Echo of the resolved configuration plus invariant checks; the returned
// text is what `validate` prints. Presets carry extra identities (the
// validation preset pins the fee to 1 - e^{-0.005}).
std::string cmd_validate(const RunConfig& config);

// Runs the listed stages in pipeline order, writing artifacts and
// refreshing <output_dir>/manifest.json after each stage. Missing
// dependency artifacts raise ConfigError naming the stage to run first.
void cmd_pipeline(const RunConfig& config, const std::vector<Stage>& stages);

// Human-readable summary of the artifacts in output_dir.
std::string cmd_report(const RunConfig& config);

}  // namespace tontine

// Command line front end: validate | simulate | train | frontier | eval |
// price | report, each driven by one JSON config. Errors print a JSON
// object {type, message} on stderr; exit code 1 for runtime errors, 2 for
// usage errors.
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tontine/errors.hpp"
#include "tontine/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config, "run configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_override, "override output_dir");
    cmd->add_option("--seed-override", opts.seed_override,
                    "replace all seeds with consecutive values from this base")
        ->each([&opts](const std::string&) { opts.has_seed_override = true; });
}

tontine::RunConfig load(const CommonOpts& opts) {
    tontine::RunConfig config = tontine::load_run_config(opts.config);
    if (!opts.out_override.empty()) config.output_dir = opts.out_override;
    if (opts.has_seed_override) tontine::apply_seed_override(config, opts.seed_override);
    return config;
}

void print_error(const std::string& type, const std::string& message) {
    nlohmann::json err = {{"type", type}, {"message", message}};
    std::cerr << err.dump() << "\n";
}

std::string error_type(const std::exception& e) {
    if (dynamic_cast<const tontine::ParseError*>(&e)) return "parse_error";
    if (dynamic_cast<const tontine::ValidationError*>(&e)) return "validation_error";
    if (dynamic_cast<const tontine::RangeError*>(&e)) return "range_error";
    if (dynamic_cast<const tontine::DomainError*>(&e)) return "domain_error";
    if (dynamic_cast<const tontine::ContractError*>(&e)) return "contract_error";
    if (dynamic_cast<const tontine::CalibrationError*>(&e)) return "calibration_error";
    if (dynamic_cast<const tontine::ConfigError*>(&e)) return "config_error";
    return "error";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tontine decumulation toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::vector<std::string> stage_names;

    CLI::App* validate = app.add_subcommand("validate", "check a config and echo it");
    add_common(validate, opts);

    CLI::App* simulate = app.add_subcommand("simulate", "generate market and mortality paths");
    add_common(simulate, opts);

    CLI::App* train_cmd = app.add_subcommand("train", "fit the base policy");
    add_common(train_cmd, opts);
    train_cmd->add_option("--stage", stage_names, "also run these stages first, in order");

    CLI::App* frontier = app.add_subcommand("frontier", "trace the risk/return frontier");
    add_common(frontier, opts);
    frontier->add_option("--stage", stage_names, "also run these stages first, in order");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate the trained policy");
    add_common(eval_cmd, opts);
    eval_cmd->add_option("--stage", stage_names, "also run these stages first, in order");

    CLI::App* price_cmd = app.add_subcommand("price", "price the capital guarantee");
    add_common(price_cmd, opts);
    price_cmd->add_option("--stage", stage_names, "also run these stages first, in order");

    CLI::App* report = app.add_subcommand("report", "summarize the artifacts of a run");
    add_common(report, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        print_error("usage_error", e.what());
        return 2;
    }

    try {
        tontine::RunConfig config = load(opts);
        if (validate->parsed()) {
            std::cout << tontine::cmd_validate(config);
            return 0;
        }
        if (report->parsed()) {
            std::cout << tontine::cmd_report(config);
            return 0;
        }

        std::vector<tontine::Stage> stages;
        for (const std::string& name : stage_names)
            stages.push_back(tontine::stage_from_name(name));
        if (simulate->parsed()) stages.push_back(tontine::Stage::Simulate);
        if (train_cmd->parsed()) stages.push_back(tontine::Stage::Train);
        if (frontier->parsed()) stages.push_back(tontine::Stage::Frontier);
        if (eval_cmd->parsed()) stages.push_back(tontine::Stage::Eval);
        if (price_cmd->parsed()) stages.push_back(tontine::Stage::Price);

        tontine::cmd_pipeline(config, stages);
        for (tontine::Stage s : stages) std::cout << tontine::stage_name(s) << ": done\n";
        std::cout << "artifacts in " << config.output_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        print_error(error_type(e), e.what());
        return 1;
    }
}

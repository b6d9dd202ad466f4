#include "tontine/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>

#include <json.hpp>

#include "tontine/eval.hpp"
#include "tontine/errors.hpp"
#include "tontine/io.hpp"
#include "tontine/mbg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tontine {

namespace {

std::string resolve_path(const std::string& dir, const std::string& p) {
    if (p.empty()) return p;
    fs::path fp(p);
    if (fp.is_absolute()) return p;
    return (fs::path(dir) / fp).lexically_normal().string();
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

KouParams kou_from(const json& j, const std::string& where) {
    check_keys(j, {"mu", "sigma", "lambda", "zeta", "eta1", "eta2"}, where);
    KouParams p;
    p.mu = j.at("mu").get<double>();
    p.sigma = j.at("sigma").get<double>();
    p.lambda = j.at("lambda").get<double>();
    p.zeta = j.at("zeta").get<double>();
    p.eta1 = j.at("eta1").get<double>();
    p.eta2 = j.at("eta2").get<double>();
    return p;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    RunConfig c;
    c.config_path = path;
    c.raw = read_file(path);
    c.config_dir = fs::path(path).parent_path().string();
    if (c.config_dir.empty()) c.config_dir = ".";

    json j;
    try {
        j = json::parse(c.raw);
    } catch (const json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }

    try {
        check_keys(j,
                   {"preset", "output_dir", "scenario", "market", "mortality", "paths", "train",
                    "pricing", "eval", "seeds"},
                   "top level");
        c.preset = j.value("preset", "");
        c.output_dir = resolve_path(c.config_dir, j.value("output_dir", "out"));

        if (const json* s = find(j, "scenario")) {
            check_keys(*s,
                       {"w0", "horizon_years", "q_min", "q_max", "fee", "mu_bc", "alpha",
                        "epsilon", "asset_count", "bond_leg", "age0", "year0"},
                       "scenario");
            c.scenario.w0 = s->value("w0", c.scenario.w0);
            c.scenario.horizon_years = s->value("horizon_years", c.scenario.horizon_years);
            c.scenario.q_min = s->value("q_min", c.scenario.q_min);
            c.scenario.q_max = s->value("q_max", c.scenario.q_max);
            c.scenario.fee = s->value("fee", c.scenario.fee);
            c.scenario.mu_bc = s->value("mu_bc", c.scenario.mu_bc);
            c.scenario.alpha = s->value("alpha", c.scenario.alpha);
            c.scenario.epsilon = s->value("epsilon", c.scenario.epsilon);
            c.scenario.asset_count = s->value("asset_count", c.scenario.asset_count);
            c.scenario.bond_leg = s->value("bond_leg", c.scenario.bond_leg);
            c.scenario.age0 = s->value("age0", c.scenario.age0);
            c.scenario.year0 = s->value("year0", c.scenario.year0);
        }
        validate_scenario(c.scenario);

        const json& market = j.at("market");
        const std::string model = market.at("model").get<std::string>();
        if (model == "kou2") {
            check_keys(market, {"model", "stock", "bond", "rho_sb", "steps_per_year"}, "market");
            c.use_kou = true;
            c.kou.stock = kou_from(market.at("stock"), "market.stock");
            c.kou.bond = kou_from(market.at("bond"), "market.bond");
            c.kou.rho_sb = market.value("rho_sb", 0.0);
            c.kou.steps_per_year = market.value("steps_per_year", 12);
            if (c.scenario.asset_count != 2)
                throw ConfigError("config: the synthetic two-asset market needs asset_count = 2");
        } else if (model == "bootstrap") {
            check_keys(market, {"model", "panel_csv", "expected_block_len_months"}, "market");
            c.use_kou = false;
            c.panel_csv = resolve_path(c.config_dir, market.at("panel_csv").get<std::string>());
            c.bootstrap.expected_block_len = market.value("expected_block_len_months", 24.0);
            require_file(c.panel_csv, "panel CSV");
        } else {
            throw ConfigError("config: market.model must be 'kou2' or 'bootstrap'");
        }

        const json& mortality = j.at("mortality");
        const std::string mkind = mortality.at("model").get<std::string>();
        if (mkind == "table") {
            check_keys(mortality, {"model", "table_csv"}, "mortality");
            c.mortality_kind = RunConfig::MortalityKind::Table;
            c.table_csv = resolve_path(c.config_dir, mortality.at("table_csv").get<std::string>());
            require_file(c.table_csv, "life table");
        } else if (mkind == "lc" || mkind == "cbd") {
            check_keys(mortality, {"model", "history_csv", "link"}, "mortality");
            c.mortality_kind = mkind == "lc" ? RunConfig::MortalityKind::Lc
                                             : RunConfig::MortalityKind::Cbd;
            c.history_csv =
                resolve_path(c.config_dir, mortality.at("history_csv").get<std::string>());
            require_file(c.history_csv, "mortality history");
            const std::string link = mortality.value("link", "log_m");
            if (link == "log_m")
                c.lc_link = LcLink::LogCentral;
            else if (link == "logit_q")
                c.lc_link = LcLink::LogitProb;
            else
                throw ConfigError("config: mortality.link must be 'log_m' or 'logit_q'");
        } else {
            throw ConfigError("config: mortality.model must be 'table', 'lc' or 'cbd'");
        }

        if (const json* p = find(j, "paths")) {
            check_keys(*p, {"n_train", "n_eval", "n_price"}, "paths");
            c.n_train = p->value("n_train", c.n_train);
            c.n_eval = p->value("n_eval", c.n_eval);
            c.n_price = p->value("n_price", c.n_price);
        }
        if (c.n_train < 1 || c.n_eval < 1 || c.n_price < 1)
            throw ConfigError("config: path counts must be positive");

        if (const json* t = find(j, "train")) {
            check_keys(*t,
                       {"iterations", "minibatch", "learning_rate", "lr_decay_factor",
                        "lr_decay_at", "hidden", "activation", "w_star_init_frac", "trace_every",
                        "gamma", "gammas"},
                       "train");
            c.train.iterations = t->value("iterations", c.train.iterations);
            c.train.minibatch = t->value("minibatch", c.train.minibatch);
            c.train.learning_rate = t->value("learning_rate", c.train.learning_rate);
            c.train.lr_decay_factor = t->value("lr_decay_factor", c.train.lr_decay_factor);
            c.train.lr_decay_at = t->value("lr_decay_at", c.train.lr_decay_at);
            c.train.hidden = t->value("hidden", c.train.hidden);
            c.train.w_star_init_frac = t->value("w_star_init_frac", c.train.w_star_init_frac);
            c.train.trace_every = t->value("trace_every", c.train.trace_every);
            const std::string act = t->value("activation", "tanh");
            if (act == "tanh")
                c.train.act = Activation::Tanh;
            else if (act == "relu")
                c.train.act = Activation::Relu;
            else
                throw ConfigError("config: train.activation must be 'tanh' or 'relu'");
            c.gamma = t->value("gamma", c.gamma);
            c.gammas = t->value("gammas", c.gammas);
        }
        if (c.gammas.empty()) throw ConfigError("config: train.gammas must not be empty");

        c.l0 = c.scenario.w0;
        if (const json* p = find(j, "pricing")) {
            check_keys(*p, {"l0", "alpha_g", "lambda", "alpha_gs", "lambdas", "histogram_bins"},
                       "pricing");
            c.l0 = p->value("l0", c.l0);
            c.alpha_g = p->value("alpha_g", c.alpha_g);
            c.lambda = p->value("lambda", c.lambda);
            c.alpha_gs = p->value("alpha_gs", c.alpha_gs);
            c.lambdas = p->value("lambdas", c.lambdas);
            c.histogram_bins = p->value("histogram_bins", c.histogram_bins);
        }

        if (const json* e = find(j, "eval")) {
            check_keys(*e,
                       {"heatmap_wealth_min", "heatmap_wealth_max", "heatmap_points",
                        "benchmark_grid_step"},
                       "eval");
            c.heatmap_wealth_min = e->value("heatmap_wealth_min", c.heatmap_wealth_min);
            c.heatmap_wealth_max = e->value("heatmap_wealth_max", c.heatmap_wealth_max);
            c.heatmap_points = e->value("heatmap_points", c.heatmap_points);
            c.benchmark_grid_step = e->value("benchmark_grid_step", c.benchmark_grid_step);
        }

        if (const json* s = find(j, "seeds")) {
            check_keys(*s, {"train_paths", "eval_paths", "price_paths", "mortality", "death",
                            "train"},
                       "seeds");
            c.seed_train_paths = s->value("train_paths", c.seed_train_paths);
            c.seed_eval_paths = s->value("eval_paths", c.seed_eval_paths);
            c.seed_price_paths = s->value("price_paths", c.seed_price_paths);
            c.seed_mortality = s->value("mortality", c.seed_mortality);
            c.seed_death = s->value("death", c.seed_death);
            c.seed_train = s->value("train", c.seed_train);
        }
        c.train.seed = c.seed_train;
        if (c.seed_train_paths == c.seed_eval_paths || c.seed_train_paths == c.seed_price_paths ||
            c.seed_eval_paths == c.seed_price_paths)
            throw ConfigError("config: seeds.train_paths/eval_paths/price_paths must be distinct");
    } catch (const json::exception& e) {
        throw ConfigError("config: missing or mistyped field in " + path + ": " + e.what());
    }
    return c;
}

void apply_seed_override(RunConfig& config, std::uint64_t base) {
    config.seed_train_paths = base;
    config.seed_eval_paths = base + 1;
    config.seed_price_paths = base + 2;
    config.seed_mortality = base + 3;
    config.seed_death = base + 4;
    config.seed_train = base + 5;
    config.train.seed = config.seed_train;
}

std::string stage_name(Stage stage) {
    switch (stage) {
        case Stage::Simulate: return "simulate";
        case Stage::Train: return "train";
        case Stage::Frontier: return "frontier";
        case Stage::Eval: return "eval";
        case Stage::Price: return "price";
    }
    return "?";
}

Stage stage_from_name(const std::string& name) {
    if (name == "simulate") return Stage::Simulate;
    if (name == "train") return Stage::Train;
    if (name == "frontier") return Stage::Frontier;
    if (name == "eval") return Stage::Eval;
    if (name == "price") return Stage::Price;
    throw ConfigError("unknown stage '" + name + "'");
}

namespace {

json scenario_echo(const Scenario& s) {
    return {{"w0", s.w0},
            {"horizon_years", s.horizon_years},
            {"q_min", s.q_min},
            {"q_max", s.q_max},
            {"fee", s.fee},
            {"mu_bc", s.mu_bc},
            {"alpha", s.alpha},
            {"epsilon", s.epsilon},
            {"asset_count", s.asset_count},
            {"bond_leg", s.bond_leg},
            {"age0", s.age0},
            {"year0", s.year0}};
}

std::string short_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.5g", v);
    return buf;
}

MortalityModel build_mortality_model(const RunConfig& c) {
    switch (c.mortality_kind) {
        case RunConfig::MortalityKind::Table:
            return load_life_table(c.table_csv);
        case RunConfig::MortalityKind::Lc: {
            LcModel lc;
            lc.params = fit_lc(load_mortality_history(c.history_csv));
            lc.link = c.lc_link;
            return lc;
        }
        case RunConfig::MortalityKind::Cbd: {
            CbdModel cbd;
            cbd.params = fit_cbd(load_mortality_history(c.history_csv));
            return cbd;
        }
    }
    throw ConfigError("config: bad mortality kind");
}

std::string mortality_desc(const RunConfig& c) {
    switch (c.mortality_kind) {
        case RunConfig::MortalityKind::Table: return "table";
        case RunConfig::MortalityKind::Lc:
            return c.lc_link == LcLink::LogCentral ? "lc(log_m)" : "lc(logit_q)";
        case RunConfig::MortalityKind::Cbd: return "cbd";
    }
    return "?";
}

std::string market_desc(const RunConfig& c) {
    if (c.use_kou) return "kou2(steps_per_year=" + std::to_string(c.kou.steps_per_year) + ")";
    return "bootstrap(block_months=" + format_double(c.bootstrap.expected_block_len) + ")";
}

}  // namespace

std::string cmd_validate(const RunConfig& c) {
    json echo;
    echo["preset"] = c.preset;
    echo["output_dir"] = c.output_dir;
    echo["scenario"] = scenario_echo(c.scenario);
    echo["market"] = market_desc(c);
    echo["mortality"] = mortality_desc(c);
    echo["paths"] = {{"n_train", c.n_train}, {"n_eval", c.n_eval}, {"n_price", c.n_price}};
    echo["train"] = {{"iterations", c.train.iterations},
                     {"minibatch", c.train.minibatch},
                     {"learning_rate", c.train.learning_rate},
                     {"gamma", c.gamma},
                     {"gammas", c.gammas}};
    echo["pricing"] = {{"l0", c.l0},
                       {"alpha_g", c.alpha_g},
                       {"lambda", c.lambda},
                       {"alpha_gs", c.alpha_gs},
                       {"lambdas", c.lambdas}};
    echo["seeds"] = {{"train_paths", c.seed_train_paths}, {"eval_paths", c.seed_eval_paths},
                     {"price_paths", c.seed_price_paths}, {"mortality", c.seed_mortality},
                     {"death", c.seed_death},             {"train", c.seed_train}};

    // Loading the referenced inputs exercises their validators.
    MortalityModel model = build_mortality_model(c);
    if (const auto* table = std::get_if<LifeTable>(&model))
        table_deltas(*table, c.scenario.age0, c.scenario.year0, c.scenario.horizon_years);
    if (!c.use_kou) load_panel(c.panel_csv);
    if (c.use_kou) {
        echo["kou_compensator_stock"] = kou_compensator(c.kou.stock);
        echo["kou_compensator_bond"] = kou_compensator(c.kou.bond);
    }

    std::string out = echo.dump(2) + "\n";
    out += "fee (annual) = " + short_double(c.scenario.fee) + "\n";
    if (c.preset == "table2-validation") {
        const double expected = 1.0 - std::exp(-0.005);
        if (std::abs(c.scenario.fee - expected) > 1e-12)
            throw ValidationError("validation preset: fee must equal 1 - e^{-0.005} = " +
                                  format_double(expected) + ", got " +
                                  format_double(c.scenario.fee));
        out += "fee identity 1 - e^{-0.005} check: ok\n";
    }
    out += "config ok\n";
    return out;
}

namespace {

void write_manifest(const RunConfig& c, const std::set<std::string>& completed) {
    json m;
    m["format"] = "manifest-v1";
    m["preset"] = c.preset;
    m["config_hash"] = hex64(fnv1a64(c.raw.data(), c.raw.size()));
    // Canonical stage order, not completion order.
    json stages = json::array();
    for (Stage s : {Stage::Simulate, Stage::Train, Stage::Frontier, Stage::Eval, Stage::Price})
        if (completed.count(stage_name(s))) stages.push_back(stage_name(s));
    m["stages_completed"] = stages;

    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(c.output_dir))
        if (entry.is_regular_file()) {
            std::string rel = fs::relative(entry.path(), c.output_dir).generic_string();
            if (rel != "manifest.json") files.push_back(rel);
        }
    std::sort(files.begin(), files.end());
    json list = json::array();
    for (const auto& rel : files) {
        const std::string full = (fs::path(c.output_dir) / rel).string();
        list.push_back({{"path", rel},
                        {"bytes", fs::file_size(full)},
                        {"fnv1a64", hex64(fnv1a64_file(full))}});
    }
    m["files"] = list;
    write_file((fs::path(c.output_dir) / "manifest.json").string(), m.dump(2) + "\n");
}

std::set<std::string> read_completed(const RunConfig& c) {
    std::set<std::string> done;
    const std::string path = (fs::path(c.output_dir) / "manifest.json").string();
    if (!fs::exists(path)) return done;
    try {
        json m = json::parse(read_file(path));
        for (const auto& s : m.at("stages_completed")) done.insert(s.get<std::string>());
    } catch (...) {
        // Unreadable manifest: treat as empty and rebuild.
    }
    return done;
}

std::string out_path(const RunConfig& c, const std::string& name) {
    return (fs::path(c.output_dir) / name).string();
}

void require_artifact(const RunConfig& c, const std::string& name, const std::string& stage) {
    if (!fs::exists(out_path(c, name)))
        throw ConfigError("missing artifact '" + name + "': run the " + stage + " stage first");
}

void stage_simulate(const RunConfig& c) {
    MortalityModel model = build_mortality_model(c);
    AssetPanel panel;
    if (!c.use_kou) panel = load_panel(c.panel_csv);

    struct Role {
        const char* name;
        int n;
        std::uint64_t market_seed;
        std::uint64_t mortality_offset;
    };
    const Role roles[] = {{"train", c.n_train, c.seed_train_paths, 0},
                          {"eval", c.n_eval, c.seed_eval_paths, 1},
                          {"price", c.n_price, c.seed_price_paths, 2}};
    const std::string desc = market_desc(c) + "+" + mortality_desc(c);

    json stats_all;
    for (const Role& role : roles) {
        PathSet paths = c.use_kou
                            ? simulate_kou(c.kou, role.n, c.scenario.horizon_years, role.market_seed)
                            : bootstrap_paths(panel, c.bootstrap, role.n, c.scenario.horizon_years,
                                              role.market_seed);
        DeathProbPaths deltas =
            simulate_deltas(model, c.scenario.age0, c.scenario.year0, c.scenario.horizon_years,
                            role.n, c.seed_mortality + role.mortality_offset);
        attach_deltas(paths, deltas);
        save_pathset(paths, out_path(c, std::string("paths_") + role.name + ".bin"),
                     out_path(c, std::string("paths_") + role.name + ".json"), desc);

        PathStats st = path_stats(paths);
        json s;
        s["mean_log"] = std::vector<double>(st.mean_log.data(), st.mean_log.data() + st.mean_log.size());
        s["vol_log"] = std::vector<double>(st.vol_log.data(), st.vol_log.data() + st.vol_log.size());
        s["mean_gross"] =
            std::vector<double>(st.mean_gross.data(), st.mean_gross.data() + st.mean_gross.size());
        s["se_gross"] =
            std::vector<double>(st.se_gross.data(), st.se_gross.data() + st.se_gross.size());
        s["cpi_drift"] = st.cpi_drift;
        s["cpi_is_unit"] = c.use_kou;  // synthetic market: nominal equals real
        s["deltas_clamped"] = deltas.clamped;
        json corr = json::array();
        for (int a = 0; a < st.corr_log.rows(); ++a) {
            json row = json::array();
            for (int b = 0; b < st.corr_log.cols(); ++b) row.push_back(st.corr_log(a, b));
            corr.push_back(row);
        }
        s["corr_log"] = corr;
        stats_all[role.name] = s;
    }
    write_file(out_path(c, "market_stats.json"), stats_all.dump(2) + "\n");

    if (!c.use_kou) {
        PanelSummary sum = summarize_panel(panel);
        std::string body = "asset,mean_annualized,geom_mean_annualized,vol_annualized,var05,cvar05\n";
        for (std::size_t a = 0; a < sum.names.size(); ++a)
            body += sum.names[a] + "," + format_double(sum.mean_arith(static_cast<int>(a))) + "," +
                    format_double(sum.mean_geom(static_cast<int>(a))) + "," +
                    format_double(sum.vol(static_cast<int>(a))) + "," +
                    format_double(sum.var05(static_cast<int>(a))) + "," +
                    format_double(sum.cvar05(static_cast<int>(a))) + "\n";
        body += "cpi_drift," + format_double(sum.cpi_drift) + ",,,,\n";
        write_file(out_path(c, "panel_summary.csv"), body);
    }
}

void stage_train(const RunConfig& c) {
    require_artifact(c, "paths_train.bin", "simulate");
    require_artifact(c, "paths_eval.bin", "simulate");
    PathSet train_paths = load_pathset(out_path(c, "paths_train.bin"));
    PathSet eval_paths = load_pathset(out_path(c, "paths_eval.bin"));
    TrainResult result = train(c.train, c.scenario, c.gamma, train_paths, &eval_paths);
    save_policy_json(result.model, result.params, out_path(c, "policy.json"));
    save_train_report(result.report, out_path(c, "train_report.json"));
}

std::string gamma_file(double gamma) {
    return "policy_gamma_" + format_double(gamma) + ".json";
}

void stage_frontier(const RunConfig& c) {
    require_artifact(c, "paths_train.bin", "simulate");
    require_artifact(c, "paths_eval.bin", "simulate");
    PathSet train_paths = load_pathset(out_path(c, "paths_train.bin"));
    PathSet eval_paths = load_pathset(out_path(c, "paths_eval.bin"));
    auto points = sweep_frontier(c.train, c.scenario, c.gammas, train_paths, eval_paths);
    save_frontier_csv(points, out_path(c, "frontier.csv"));
    PolicyModel model = make_policy_model(c.scenario.asset_count, c.train.hidden, c.train.act,
                                          c.scenario.w0, c.scenario.horizon_years);
    for (const auto& point : points)
        save_policy_json(model, point.params, out_path(c, gamma_file(point.gamma)));
}

void stage_eval(const RunConfig& c) {
    require_artifact(c, "paths_eval.bin", "simulate");
    require_artifact(c, "policy.json", "train");
    PathSet eval_paths = load_pathset(out_path(c, "paths_eval.bin"));
    LoadedPolicy policy = load_policy_json(out_path(c, "policy.json"));
    RolloutResult rolled =
        rollout(PolicyRule{NeuralRule{policy.model, policy.params}}, eval_paths, c.scenario);

    VarCvar risk = empirical_var_cvar(rolled.terminal_wealth, c.scenario.alpha);
    int insolvent = 0;
    for (int n = 0; n < rolled.insolvency_at.size(); ++n)
        if (rolled.insolvency_at(n) >= 0) ++insolvent;

    BenchmarkResult bench = benchmark_search(eval_paths, c.scenario, c.benchmark_grid_step);
    json metrics;
    metrics["ew_annualized"] = ew_annualized(rolled, c.scenario.horizon_years);
    metrics["cvar"] = risk.cvar;
    metrics["var"] = risk.var;
    metrics["mean_terminal"] = rolled.terminal_wealth.mean();
    metrics["insolvency_rate"] = static_cast<double>(insolvent) / eval_paths.n_paths;
    metrics["w_star"] = policy.params.w_star;
    json best;
    best["cvar"] = bench.best.cvar;
    best["ew_annualized"] = bench.best.ew;
    best["weights"] = std::vector<double>(bench.best.weights.data(),
                                          bench.best.weights.data() + bench.best.weights.size());
    metrics["benchmark_best"] = best;
    write_file(out_path(c, "metrics.json"), metrics.dump(2) + "\n");

    std::string body;
    for (int a = 0; a < eval_paths.n_assets; ++a) body += "w_" + std::to_string(a) + ",";
    body += "cvar,ew_annualized,best\n";
    for (const auto& cand : bench.grid) {
        for (int a = 0; a < eval_paths.n_assets; ++a) body += format_double(cand.weights(a)) + ",";
        bool is_best = (cand.weights - bench.best.weights).cwiseAbs().maxCoeff() == 0.0;
        body += format_double(cand.cvar) + "," + format_double(cand.ew) + "," +
                (is_best ? "1" : "0") + "\n";
    }
    write_file(out_path(c, "benchmark.csv"), body);

    export_percentiles(rolled, out_path(c, "percentiles.csv"));
    Vec grid = Vec::LinSpaced(c.heatmap_points, c.heatmap_wealth_min, c.heatmap_wealth_max);
    export_heatmaps(policy.model, policy.params, c.scenario, grid, c.output_dir);
}

void stage_price(const RunConfig& c) {
    require_artifact(c, "paths_price.bin", "simulate");
    require_artifact(c, "policy.json", "train");
    PathSet price_paths = load_pathset(out_path(c, "paths_price.bin"));
    LoadedPolicy base = load_policy_json(out_path(c, "policy.json"));

    PricingConfig pricing;
    pricing.l0 = c.l0;
    pricing.alpha_g = c.alpha_g;
    pricing.lambda = c.lambda;
    pricing.death_seed = c.seed_death;
    MbgResult priced = price(PolicyRule{NeuralRule{base.model, base.params}}, price_paths,
                             c.scenario, pricing);
    save_quote_json(priced.quote, pricing, out_path(c, "quote.json"));
    save_payout_histogram(priced.payouts, c.l0, c.histogram_bins,
                          out_path(c, "payout_histogram.csv"));

    // Sensitivity over the frontier policies when all of them exist,
    // otherwise over the base policy alone.
    std::vector<std::pair<double, PolicyRule>> rules;
    bool have_frontier = true;
    for (double g : c.gammas)
        if (!fs::exists(out_path(c, gamma_file(g)))) have_frontier = false;
    if (have_frontier) {
        for (double g : c.gammas) {
            LoadedPolicy p = load_policy_json(out_path(c, gamma_file(g)));
            rules.emplace_back(g, PolicyRule{NeuralRule{p.model, p.params}});
        }
    } else {
        rules.emplace_back(c.gamma, PolicyRule{NeuralRule{base.model, base.params}});
    }
    auto rows = sensitivity_grid(rules, price_paths, c.scenario, c.alpha_gs, c.lambdas, c.l0,
                                 c.seed_death);
    save_sensitivity_csv(rows, c.lambdas, out_path(c, "sensitivity.csv"));
}

}  // namespace

void cmd_pipeline(const RunConfig& config, const std::vector<Stage>& stages) {
    fs::create_directories(config.output_dir);
    std::set<std::string> completed = read_completed(config);
    // Canonical order regardless of how the request was phrased.
    for (Stage s : {Stage::Simulate, Stage::Train, Stage::Frontier, Stage::Eval, Stage::Price}) {
        if (std::find(stages.begin(), stages.end(), s) == stages.end()) continue;
        switch (s) {
            case Stage::Simulate: stage_simulate(config); break;
            case Stage::Train: stage_train(config); break;
            case Stage::Frontier: stage_frontier(config); break;
            case Stage::Eval: stage_eval(config); break;
            case Stage::Price: stage_price(config); break;
        }
        completed.insert(stage_name(s));
        write_manifest(config, completed);
    }
}

std::string cmd_report(const RunConfig& c) {
    std::string out;
    const std::string manifest_path = out_path(c, "manifest.json");
    if (!fs::exists(manifest_path))
        throw ConfigError("no manifest in " + c.output_dir + "; run the pipeline first");
    json manifest = json::parse(read_file(manifest_path));
    out += "run report for " + c.output_dir + "\n";
    out += "config hash: " + manifest.value("config_hash", std::string("?")) + "\n";
    out += "stages completed:";
    for (const auto& s : manifest.at("stages_completed")) out += " " + s.get<std::string>();
    out += "\n";

    if (fs::exists(out_path(c, "metrics.json"))) {
        json m = json::parse(read_file(out_path(c, "metrics.json")));
        out += "eval: ew_annualized = " + format_double(m.value("ew_annualized", 0.0)) +
               ", cvar = " + format_double(m.value("cvar", 0.0)) +
               ", insolvency_rate = " + format_double(m.value("insolvency_rate", 0.0)) + "\n";
        if (m.contains("benchmark_best"))
            out += "benchmark best cvar = " + format_double(m["benchmark_best"].value("cvar", 0.0)) +
                   "\n";
    }
    if (fs::exists(out_path(c, "frontier.csv"))) {
        out += "frontier:\n";
        for (const auto& line : read_lines(out_path(c, "frontier.csv"))) out += "  " + line + "\n";
    }
    if (fs::exists(out_path(c, "quote.json"))) {
        json q = json::parse(read_file(out_path(c, "quote.json")));
        out += "guarantee quote: e_hat = " + format_double(q.value("e_hat", 0.0)) +
               ", cvar_hat = " + format_double(q.value("cvar_hat", 0.0)) +
               ", f_hat = " + format_double(q.value("f_hat", 0.0)) + "\n";
    }
    out += "files: " + std::to_string(manifest.at("files").size()) + "\n";
    return out;
}

}  // namespace tontine

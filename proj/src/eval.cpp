#include "tontine/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "tontine/account.hpp"
#include "tontine/errors.hpp"
#include "tontine/io.hpp"
#include "tontine/parallel.hpp"

namespace tontine {

VarCvar empirical_var_cvar(Vec samples, double alpha) {
    const int n = static_cast<int>(samples.size());
    if (n < 1) throw ContractError("empirical_var_cvar: need at least one sample");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ContractError("empirical_var_cvar: alpha must lie in (0, 1]");
    std::sort(samples.data(), samples.data() + n);
    int tail = static_cast<int>(std::ceil(alpha * n - 1e-9));
    tail = std::max(1, std::min(tail, n));
    VarCvar out;
    out.var = samples(tail - 1);
    out.cvar = samples.head(tail).mean();
    return out;
}

namespace {

// One path of the account recursion. Withdrawals are clamped into the
// admissible interval; the allocation weights are ignored once insolvent.
template <typename QFn, typename PFn>
void roll_path(const PathSet& paths, const Scenario& sc, int n, QFn&& q_of, PFn&& p_of,
               double* withdrawals, double* wealth_pre, double* terminal, int* insolvency_at) {
    const int M = paths.periods;
    double w_gross = sc.w0;
    int insolvent_first = -1;
    Vec gross(paths.n_assets);
    for (int m = 0; m <= M; ++m) {
        const double delta_prev = m >= 1 ? paths.deltas(n, m - 1) : 0.0;
        const double w_pre = apply_credit_and_fee(m, delta_prev, w_gross, sc.fee);
        wealth_pre[m] = w_pre;
        if (m == M) {
            withdrawals[m] = 0.0;
            *terminal = w_pre;
            break;
        }
        Interval bounds = withdrawal_bounds(w_pre, m, M, sc.q_min, sc.q_max);
        double q = std::min(std::max(q_of(w_pre, m), bounds.lo), bounds.hi);
        withdrawals[m] = q;
        const double w_post = w_pre - q;
        Vec p = w_post > 0.0 ? p_of(w_post, m) : Vec::Zero(paths.n_assets);
        if (!(w_post > 0.0)) p(sc.bond_leg) = 1.0;
        AccountState state = allocate(w_pre, q, p, sc.bond_leg);
        if (state.insolvent && insolvent_first < 0) insolvent_first = m;
        for (int a = 0; a < paths.n_assets; ++a) gross(a) = paths.gross_at(n, m, a);
        w_gross = grow(state, gross, sc.bond_leg, sc.mu_bc);
    }
    *insolvency_at = insolvent_first;
}

}  // namespace

RolloutResult rollout(const PolicyRule& rule, const PathSet& paths, const Scenario& scenario) {
    validate_scenario(scenario);
    if (paths.n_assets != scenario.asset_count)
        throw ContractError("rollout: scenario and paths disagree on asset count");
    if (paths.n_paths < 1) throw ContractError("rollout: empty path set");

    const int N = paths.n_paths;
    const int M = paths.periods;
    RolloutResult res;
    res.terminal_wealth = Vec(N);
    res.withdrawals = Mat(N, M + 1);
    res.wealth_pre = Mat(N, M + 1);
    res.insolvency_at = Eigen::VectorXi::Constant(N, -1);

    if (const auto* constant = std::get_if<ConstantRule>(&rule)) {
        if (constant->weights.size() != paths.n_assets)
            throw ContractError("rollout: constant rule weight count mismatch");
        double sum = constant->weights.sum();
        if (std::abs(sum - 1.0) > 1e-12 || (constant->weights.array() < -1e-12).any())
            throw ContractError("rollout: constant rule weights must lie on the simplex");
        parallel_chunks(N, 256, [&](int, long lo, long hi) {
            std::vector<double> wrow(M + 1), prow(M + 1);
            for (long n = lo; n < hi; ++n) {
                double terminal = 0.0;
                int insolvent_at;
                roll_path(
                    paths, scenario, static_cast<int>(n),
                    [&](double, int) { return constant->q; },
                    [&](double, int) { return constant->weights; }, wrow.data(), prow.data(),
                    &terminal, &insolvent_at);
                for (int m = 0; m <= M; ++m) {
                    res.withdrawals(n, m) = wrow[m];
                    res.wealth_pre(n, m) = prow[m];
                }
                res.terminal_wealth(n) = terminal;
                res.insolvency_at(n) = insolvent_at;
            }
        });
        return res;
    }

    const auto& neural = std::get<NeuralRule>(rule);
    if (neural.model.p_net.output_dim != paths.n_assets)
        throw ContractError("rollout: allocation network output does not match asset count");
    parallel_chunks(N, 256, [&](int, long lo, long hi) {
        std::vector<double> wrow(M + 1), prow(M + 1);
        for (long n = lo; n < hi; ++n) {
            double terminal = 0.0;
            int insolvent_at;
            roll_path(
                paths, scenario, static_cast<int>(n),
                [&](double w_pre, int m) {
                    return forward_q(neural.model, neural.params, w_pre, m, scenario.q_min,
                                     scenario.q_max, nullptr);
                },
                [&](double w_post, int m) {
                    return forward_p(neural.model, neural.params, w_post, m, nullptr);
                },
                wrow.data(), prow.data(), &terminal, &insolvent_at);
            for (int m = 0; m <= M; ++m) {
                res.withdrawals(n, m) = wrow[m];
                res.wealth_pre(n, m) = prow[m];
            }
            res.terminal_wealth(n) = terminal;
            res.insolvency_at(n) = insolvent_at;
        }
    });
    return res;
}

double ew_annualized(const RolloutResult& result, int horizon_years) {
    if (horizon_years < 1) throw ContractError("ew_annualized: horizon must be positive");
    return result.withdrawals.sum() / result.withdrawals.rows() / horizon_years;
}

namespace {

void enumerate_simplex(int assets, int steps, std::vector<int>& stack,
                       std::vector<std::vector<int>>& out) {
    if (static_cast<int>(stack.size()) == assets - 1) {
        int used = 0;
        for (int v : stack) used += v;
        stack.push_back(steps - used);
        out.push_back(stack);
        stack.pop_back();
        return;
    }
    int used = 0;
    for (int v : stack) used += v;
    for (int v = 0; v <= steps - used; ++v) {
        stack.push_back(v);
        enumerate_simplex(assets, steps, stack, out);
        stack.pop_back();
    }
}

}  // namespace

BenchmarkResult benchmark_search(const PathSet& paths, const Scenario& scenario,
                                 double grid_step) {
    if (!(grid_step > 0.0 && grid_step <= 1.0))
        throw ContractError("benchmark_search: grid step must lie in (0, 1]");
    const int steps = static_cast<int>(std::lround(1.0 / grid_step));
    if (std::abs(steps * grid_step - 1.0) > 1e-9)
        throw ContractError("benchmark_search: grid step must divide 1");

    std::vector<std::vector<int>> grid_points;
    std::vector<int> stack;
    enumerate_simplex(paths.n_assets, steps, stack, grid_points);

    BenchmarkResult result;
    bool have_best = false;
    for (const auto& point : grid_points) {
        Vec w(paths.n_assets);
        for (int a = 0; a < paths.n_assets; ++a) w(a) = static_cast<double>(point[a]) / steps;
        // Renormalize away rounding so the simplex check passes exactly.
        w /= w.sum();
        ConstantRule rule{scenario.q_min, w};
        RolloutResult rolled = rollout(PolicyRule{rule}, paths, scenario);
        BenchmarkCandidate cand;
        cand.weights = w;
        cand.cvar = empirical_var_cvar(rolled.terminal_wealth, scenario.alpha).cvar;
        cand.ew = ew_annualized(rolled, scenario.horizon_years);
        result.grid.push_back(cand);
        // Enumeration is lexicographic, so strict improvement keeps the
        // lexicographically smallest maximizer.
        if (!have_best || cand.cvar > result.best.cvar) {
            result.best = cand;
            have_best = true;
        }
    }
    return result;
}

namespace {

std::string csv_row(const std::vector<double>& values) {
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) line += ",";
        line += format_double(values[i]);
    }
    return line;
}

}  // namespace

void export_heatmaps(const PolicyModel& model, const PolicyParams& params,
                     const Scenario& scenario, const Vec& wealth_grid,
                     const std::string& out_dir) {
    const int M = scenario.horizon_years;
    auto header = [&]() {
        std::string h = "wealth";
        for (int m = 0; m < M; ++m) h += ",t" + std::to_string(m);
        return h + "\n";
    };
    {
        std::string body = header();
        for (Eigen::Index i = 0; i < wealth_grid.size(); ++i) {
            std::vector<double> row{wealth_grid(i)};
            for (int m = 0; m < M; ++m)
                row.push_back(forward_q(model, params, wealth_grid(i), m, scenario.q_min,
                                        scenario.q_max, nullptr));
            body += csv_row(row) + "\n";
        }
        write_file(out_dir + "/heatmap_withdrawal.csv", body);
    }
    for (int a = 0; a < model.p_net.output_dim; ++a) {
        std::string body = header();
        for (Eigen::Index i = 0; i < wealth_grid.size(); ++i) {
            std::vector<double> row{wealth_grid(i)};
            for (int m = 0; m < M; ++m)
                row.push_back(forward_p(model, params, wealth_grid(i), m, nullptr)(a));
            body += csv_row(row) + "\n";
        }
        write_file(out_dir + "/heatmap_asset_" + std::to_string(a) + ".csv", body);
    }
}

void export_percentiles(const RolloutResult& result, const std::string& path) {
    const int n = static_cast<int>(result.wealth_pre.rows());
    const int cols = static_cast<int>(result.wealth_pre.cols());
    auto rank = [&](double p) {
        int r = static_cast<int>(std::ceil(p * n - 1e-9));
        return std::max(1, std::min(r, n)) - 1;
    };
    std::string body = "time,p5,p50,p95\n";
    std::vector<double> col(n);
    for (int m = 0; m < cols; ++m) {
        for (int i = 0; i < n; ++i) col[i] = result.wealth_pre(i, m);
        std::sort(col.begin(), col.end());
        body += std::to_string(m) + "," + format_double(col[rank(0.05)]) + "," +
                format_double(col[rank(0.50)]) + "," + format_double(col[rank(0.95)]) + "\n";
    }
    write_file(path, body);
}

}  // namespace tontine

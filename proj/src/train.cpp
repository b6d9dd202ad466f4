#include "tontine/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <json.hpp>

#include "tontine/account.hpp"
#include "tontine/errors.hpp"
#include "tontine/io.hpp"
#include "tontine/parallel.hpp"
#include "tontine/rng.hpp"

namespace tontine {

namespace {

// Forward state for one year, kept for the backward sweep.
struct StepRecord {
    double chain = 1.0;    // d w_pre / d w_gross: (1 + gain) * fee factor
    double w_pre = 0.0;
    double w_post = 0.0;
    double q = 0.0;
    bool solvent = false;  // w_post > 0: rebalanced across assets
    double r_eff = 0.0;    // realized portfolio gross return when solvent
    double r_debt = 0.0;   // bond gross * e^{mu_bc} when insolvent
    QTape qt;
    PTape pt;
};

struct PathTape {
    std::vector<StepRecord> steps;  // size M
    double terminal_chain = 1.0;    // d W_T / d w_gross at t_M
    double w_terminal = 0.0;
    double sum_q = 0.0;
};

// Rolls one path with the neural controls, recording everything the
// backward pass needs. Matches rollout() exactly on values.
void forward_taped(const PolicyModel& model, const PolicyParams& params, const PathSet& paths,
                   const Scenario& sc, int n, bool want_tape, PathTape& tape) {
    const int M = paths.periods;
    if (static_cast<int>(tape.steps.size()) != M) tape.steps.resize(M);
    tape.sum_q = 0.0;

    double w_gross = sc.w0;
    for (int m = 0; m <= M; ++m) {
        const double delta_prev = m >= 1 ? paths.deltas(n, m - 1) : 0.0;
        const double gain = effective_gain(m, delta_prev, w_gross);
        double credited = (1.0 + gain) * w_gross;
        double chain = 1.0 + gain;
        const bool fee_on = m >= 1 && credited > 0.0;
        if (fee_on) {
            credited *= 1.0 - sc.fee;
            chain *= 1.0 - sc.fee;
        }
        const double w_pre = credited;
        if (m == M) {
            tape.w_terminal = w_pre;
            tape.terminal_chain = chain;
            break;
        }
        StepRecord& step = tape.steps[static_cast<std::size_t>(m)];
        step.chain = chain;
        step.w_pre = w_pre;
        step.q = forward_q(model, params, w_pre, m, sc.q_min, sc.q_max, want_tape ? &step.qt : nullptr);
        tape.sum_q += step.q;
        step.w_post = w_pre - step.q;
        step.solvent = step.w_post > 0.0;
        const double bond_gross = paths.gross_at(n, m, sc.bond_leg);
        if (step.solvent) {
            Vec p = forward_p(model, params, step.w_post, m, want_tape ? &step.pt : nullptr);
            if (!want_tape) step.pt.p = p;
            double r = 0.0;
            for (int a = 0; a < paths.n_assets; ++a)
                r += step.pt.p(a) * paths.gross_at(n, m, a);
            step.r_eff = r;
            w_gross = step.w_post * r;
        } else {
            step.r_debt = bond_gross * std::exp(sc.mu_bc);
            w_gross = step.w_post * step.r_debt;
        }
    }
}

double path_objective(const PathTape& tape, double gamma, double alpha, double eps,
                      double w_star) {
    const double u = tape.w_terminal - w_star;
    return tape.sum_q + gamma * (w_star + std::min(u, 0.0) / alpha) + eps * tape.w_terminal;
}

// Reverse sweep for one path; accumulates into the gradient buffers.
void backward_path(const PolicyModel& model, const PolicyParams& params, const PathSet& paths,
                   const Scenario& sc, int n, const PathTape& tape, double gamma, double scale,
                   Gradients& grad) {
    const int M = paths.periods;
    const double u = tape.w_terminal - params.w_star;
    // Subgradient convention: d min(u, 0)/du = 1 for u < 0, else 0.
    const double tail = u < 0.0 ? 1.0 / sc.alpha : 0.0;
    grad.w_star += scale * gamma * (1.0 - tail);
    double d_wt = scale * (gamma * tail + sc.epsilon);

    // Adjoint of the gross wealth entering t_{m+1}.
    double d_wgross = d_wt * tape.terminal_chain;
    Vec d_feat(2);
    for (int m = M - 1; m >= 0; --m) {
        const StepRecord& step = tape.steps[static_cast<std::size_t>(m)];
        double d_wpost;
        if (step.solvent) {
            d_wpost = d_wgross * step.r_eff;
            // d r_eff / d p_a is the asset's gross return; softmax backward.
            const Vec& p = step.pt.p;
            const int k = paths.n_assets;
            Vec d_p(k);
            for (int a = 0; a < k; ++a) d_p(a) = d_wgross * step.w_post * paths.gross_at(n, m, a);
            const double dot = p.dot(d_p);
            Vec d_logits = p.array() * (d_p.array() - dot);
            mlp_backward(model.p_net, params.theta_p.data(), step.pt.net, d_logits,
                         grad.theta_p.data(), &d_feat);
            d_wpost += d_feat(0) * step.pt.d_feat_dw;
        } else {
            d_wpost = d_wgross * step.r_debt;
        }
        // q contributes +1 to the objective and -1 to w_post.
        const double d_q = scale - d_wpost;
        double d_wpre = d_wpost;
        const double d_sig = d_q * step.qt.range;
        const double d_z = d_sig * step.qt.sig * (1.0 - step.qt.sig);
        Vec d_out(1);
        d_out(0) = d_z;
        mlp_backward(model.q_net, params.theta_q.data(), step.qt.net, d_out, grad.theta_q.data(),
                     &d_feat);
        d_wpre += d_feat(0) * step.qt.d_feat_dw;
        d_wpre += d_q * step.qt.sig * step.qt.d_range_dw;
        d_wgross = d_wpre * step.chain;
    }
}

void check_inputs(const PolicyModel& model, const PathSet& paths, const Scenario& sc) {
    validate_scenario(sc);
    if (paths.n_assets != sc.asset_count)
        throw ContractError("objective: scenario and paths disagree on asset count");
    if (model.p_net.output_dim != paths.n_assets)
        throw ContractError("objective: allocation network output does not match asset count");
    if (paths.n_paths < 1) throw ContractError("objective: empty path set");
}

}  // namespace

ObjectiveValue objective(const PolicyModel& model, const PolicyParams& params,
                         const PathSet& paths, const Scenario& scenario, double gamma) {
    check_inputs(model, paths, scenario);
    const int N = paths.n_paths;
    ObjectiveValue out;
    out.per_path = Vec(N);
    parallel_chunks(N, 256, [&](int, long lo, long hi) {
        PathTape tape;
        for (long n = lo; n < hi; ++n) {
            forward_taped(model, params, paths, scenario, static_cast<int>(n), false, tape);
            out.per_path(n) =
                path_objective(tape, gamma, scenario.alpha, scenario.epsilon, params.w_star);
        }
    });
    out.value = out.per_path.mean();
    return out;
}

double objective_grad(const PolicyModel& model, const PolicyParams& params,
                      const PathSet& paths, const std::vector<int>& path_idx,
                      const Scenario& scenario, double gamma, Gradients& grad) {
    check_inputs(model, paths, scenario);
    if (path_idx.empty()) throw ContractError("objective_grad: empty path selection");
    for (int n : path_idx)
        if (n < 0 || n >= paths.n_paths) throw ContractError("objective_grad: path index out of range");

    grad.setZero(model);
    const long count = static_cast<long>(path_idx.size());
    const double scale = 1.0 / static_cast<double>(count);
    const long chunk = 128;
    const int n_chunks = static_cast<int>((count + chunk - 1) / chunk);
    std::vector<Gradients> partial(static_cast<std::size_t>(n_chunks));
    std::vector<double> partial_value(static_cast<std::size_t>(n_chunks), 0.0);

    parallel_chunks(count, chunk, [&](int c, long lo, long hi) {
        Gradients& g = partial[static_cast<std::size_t>(c)];
        g.setZero(model);
        PathTape tape;
        for (long i = lo; i < hi; ++i) {
            const int n = path_idx[static_cast<std::size_t>(i)];
            forward_taped(model, params, paths, scenario, n, true, tape);
            partial_value[static_cast<std::size_t>(c)] +=
                path_objective(tape, gamma, scenario.alpha, scenario.epsilon, params.w_star);
            backward_path(model, params, paths, scenario, n, tape, gamma, scale, g);
        }
    });

    double value = 0.0;
    for (int c = 0; c < n_chunks; ++c) {
        value += partial_value[static_cast<std::size_t>(c)];
        grad.theta_q += partial[static_cast<std::size_t>(c)].theta_q;
        grad.theta_p += partial[static_cast<std::size_t>(c)].theta_p;
        grad.w_star += partial[static_cast<std::size_t>(c)].w_star;
    }
    return value * scale;
}

namespace {

struct AdamState {
    Vec m, v;
    double beta1_t = 1.0, beta2_t = 1.0;
};

void adam_step(AdamState& state, const TrainConfig& cfg, double lr, const Vec& grad, Vec& x) {
    if (state.m.size() == 0) {
        state.m = Vec::Zero(x.size());
        state.v = Vec::Zero(x.size());
    }
    state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grad;
    state.v = cfg.adam_beta2 * state.v.array().matrix() +
              (1.0 - cfg.adam_beta2) * grad.array().square().matrix();
    state.beta1_t *= cfg.adam_beta1;
    state.beta2_t *= cfg.adam_beta2;
    Vec mhat = state.m / (1.0 - state.beta1_t);
    Vec vhat = state.v / (1.0 - state.beta2_t);
    x += lr * (mhat.array() / (vhat.array().sqrt() + cfg.adam_eps)).matrix();
}

}  // namespace

TrainResult train(const TrainConfig& config, const Scenario& scenario, double gamma,
                  const PathSet& train_paths, const PathSet* eval_paths) {
    if (config.iterations < 1) throw ContractError("train: iterations must be positive");
    if (config.minibatch < 1) throw ContractError("train: minibatch must be positive");

    TrainResult result;
    result.model = make_policy_model(scenario.asset_count, config.hidden, config.act, scenario.w0,
                                     scenario.horizon_years);
    result.params = init_params(result.model, config.seed, scenario.w0, config.w_star_init_frac);
    check_inputs(result.model, train_paths, scenario);

    const int N = train_paths.n_paths;
    const int B = std::min(config.minibatch, N);

    // Minibatch schedule: one fixed stream, reshuffled each epoch.
    auto schedule_rng = path_stream(config.seed, 0x6d696e69ULL);
    std::vector<int> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), 0);
    auto reshuffle = [&]() {
        for (int i = N - 1; i > 0; --i) {
            std::uniform_int_distribution<int> pick(0, i);
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(pick(schedule_rng))]);
        }
    };
    reshuffle();
    std::size_t cursor = 0;

    // One flat trainable vector: theta_q, theta_p, then w_star / w0 so the
    // level parameter moves on the same scale as the weights.
    const int nq = result.model.q_net.param_count();
    const int np = result.model.p_net.param_count();
    Vec x(nq + np + 1);
    x.head(nq) = result.params.theta_q;
    x.segment(nq, np) = result.params.theta_p;
    x(nq + np) = result.params.w_star / scenario.w0;

    AdamState adam;
    Gradients grad;
    std::vector<int> batch(static_cast<std::size_t>(B));
    const int decay_after = static_cast<int>(config.lr_decay_at * config.iterations);

    for (int it = 0; it < config.iterations; ++it) {
        for (int b = 0; b < B; ++b) {
            if (cursor == order.size()) {
                reshuffle();
                cursor = 0;
            }
            batch[static_cast<std::size_t>(b)] = order[cursor++];
        }
        result.params.theta_q = x.head(nq);
        result.params.theta_p = x.segment(nq, np);
        result.params.w_star = x(nq + np) * scenario.w0;

        double value = objective_grad(result.model, result.params, train_paths, batch, scenario,
                                      gamma, grad);
        Vec g(nq + np + 1);
        g.head(nq) = grad.theta_q;
        g.segment(nq, np) = grad.theta_p;
        g(nq + np) = grad.w_star * scenario.w0;  // chain rule for the rescaled coordinate

        const double lr =
            config.learning_rate * (it >= decay_after ? config.lr_decay_factor : 1.0);
        adam_step(adam, config, lr, g, x);

        if (it % config.trace_every == 0 || it == config.iterations - 1) {
            result.report.trace_iters.push_back(it);
            result.report.trace_objective.push_back(value);
        }
    }
    result.params.theta_q = x.head(nq);
    result.params.theta_p = x.segment(nq, np);
    result.params.w_star = x(nq + np) * scenario.w0;

    result.report.final_objective =
        objective(result.model, result.params, train_paths, scenario, gamma).value;
    if (eval_paths) {
        RolloutResult rolled =
            rollout(PolicyRule{NeuralRule{result.model, result.params}}, *eval_paths, scenario);
        result.report.eval_ew = ew_annualized(rolled, scenario.horizon_years);
        result.report.eval_cvar = empirical_var_cvar(rolled.terminal_wealth, scenario.alpha).cvar;
        result.report.has_eval = true;
    }
    return result;
}

std::vector<FrontierPoint> sweep_frontier(const TrainConfig& config, const Scenario& scenario,
                                          const std::vector<double>& gammas,
                                          const PathSet& train_paths,
                                          const PathSet& eval_paths) {
    if (gammas.empty()) throw ContractError("sweep_frontier: need at least one gamma");
    std::vector<FrontierPoint> points;
    for (double gamma : gammas) {
        TrainResult trained = train(config, scenario, gamma, train_paths, &eval_paths);
        FrontierPoint point;
        point.gamma = gamma;
        point.ew_annualized = trained.report.eval_ew;
        point.cvar = trained.report.eval_cvar;
        point.w_star = trained.params.w_star;
        point.params = trained.params;
        points.push_back(std::move(point));
    }
    std::stable_sort(points.begin(), points.end(),
                     [](const FrontierPoint& a, const FrontierPoint& b) { return a.cvar < b.cvar; });
    return points;
}

void save_train_report(const TrainReport& report, const std::string& path) {
    nlohmann::json j;
    j["format"] = "train-report-v1";
    nlohmann::json trace = nlohmann::json::array();
    for (std::size_t i = 0; i < report.trace_iters.size(); ++i)
        trace.push_back({report.trace_iters[i], report.trace_objective[i]});
    j["trace"] = trace;
    j["final_objective"] = report.final_objective;
    if (report.has_eval) {
        j["eval_ew_annualized"] = report.eval_ew;
        j["eval_cvar"] = report.eval_cvar;
    }
    write_file(path, j.dump(2) + "\n");
}

void save_frontier_csv(const std::vector<FrontierPoint>& points, const std::string& path) {
    std::string body = "gamma,ew_annualized,cvar,w_star\n";
    for (const auto& p : points)
        body += format_double(p.gamma) + "," + format_double(p.ew_annualized) + "," +
                format_double(p.cvar) + "," + format_double(p.w_star) + "\n";
    write_file(path, body);
}

}  // namespace tontine

#include "tontine/mbg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <json.hpp>

#include "tontine/errors.hpp"
#include "tontine/io.hpp"
#include "tontine/rng.hpp"

namespace tontine {

double mbg_payout(double l0, double cum_nominal_withdrawals, double cpi_ratio_at_death) {
    if (!(l0 > 0.0)) throw ContractError("mbg_payout: guaranteed capital must be positive");
    if (!(cpi_ratio_at_death > 0.0))
        throw ContractError("mbg_payout: CPI ratio must be positive");
    return std::max(l0 - cum_nominal_withdrawals, 0.0) / cpi_ratio_at_death;
}

namespace {

double upper_tail_mean(const Vec& payouts, double alpha_g) {
    const int n = static_cast<int>(payouts.size());
    if (!(alpha_g > 0.0 && alpha_g <= 1.0))
        throw ContractError("mbg: alpha_g must lie in (0, 1]");
    std::vector<double> sorted(payouts.data(), payouts.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    int tail = static_cast<int>(std::ceil(alpha_g * n - 1e-9));
    tail = std::max(1, std::min(tail, n));
    double acc = 0.0;
    for (int i = 0; i < tail; ++i) acc += sorted[static_cast<std::size_t>(i)];
    return acc / tail;
}

}  // namespace

MbgResult price(const PolicyRule& rule, const PathSet& paths, const Scenario& scenario,
                const PricingConfig& pricing) {
    if (!(pricing.l0 > 0.0)) throw ContractError("mbg price: guaranteed capital must be positive");
    // The account recursion is untouched by pricing: roll it once, then
    // overlay death draws on the stored withdrawals and CPI.
    RolloutResult rolled = rollout(rule, paths, scenario);

    const int K = paths.n_paths;
    const int M = paths.periods;
    MbgResult result;
    result.payouts = Vec::Zero(K);
    result.death_period = Eigen::VectorXi::Constant(K, -1);

    int deaths = 0;
    int triggered = 0;
    for (int n = 0; n < K; ++n) {
        auto rng = path_stream(pricing.death_seed, static_cast<std::uint64_t>(n));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double cum_nominal = 0.0;
        for (int m = 0; m < M; ++m) {
            // Withdrawal at t_m is made before the death test for
            // (t_m, t_{m+1}]; delta_{m+1} sits at column m.
            cum_nominal += rolled.withdrawals(n, m) * paths.cpi_index(n, m);
            if (unif(rng) < paths.deltas(n, m)) {
                const int m_tau = m + 1;
                result.death_period(n) = m_tau;
                result.payouts(n) =
                    mbg_payout(pricing.l0, cum_nominal, paths.cpi_index(n, m_tau));
                ++deaths;
                if (result.payouts(n) > 0.0) ++triggered;
                break;
            }
        }
    }

    result.quote.e_hat = result.payouts.mean();
    result.quote.cvar_hat = upper_tail_mean(result.payouts, pricing.alpha_g);
    result.quote.f_hat = (result.quote.e_hat + pricing.lambda * result.quote.cvar_hat) / pricing.l0;
    result.quote.trigger_rate = static_cast<double>(triggered) / K;
    result.quote.deaths = deaths;
    return result;
}

std::vector<SensitivityRow> sensitivity_grid(
    const std::vector<std::pair<double, PolicyRule>>& rules_by_gamma, const PathSet& paths,
    const Scenario& scenario, const std::vector<double>& alpha_gs,
    const std::vector<double>& lambdas, double l0, std::uint64_t death_seed) {
    if (rules_by_gamma.empty()) throw ContractError("sensitivity_grid: no policies given");
    if (alpha_gs.empty() || lambdas.empty())
        throw ContractError("sensitivity_grid: empty grid axes");

    std::vector<SensitivityRow> rows;
    for (const auto& [gamma, rule] : rules_by_gamma) {
        PricingConfig pricing;
        pricing.l0 = l0;
        pricing.death_seed = death_seed;  // same death draws for every gamma
        pricing.alpha_g = alpha_gs.front();
        MbgResult priced = price(rule, paths, scenario, pricing);
        for (double alpha_g : alpha_gs) {
            SensitivityRow row;
            row.gamma = gamma;
            row.alpha_g = alpha_g;
            row.e_hat = priced.quote.e_hat;
            row.cvar_hat = upper_tail_mean(priced.payouts, alpha_g);
            for (double lambda : lambdas)
                row.f_by_lambda.push_back((row.e_hat + lambda * row.cvar_hat) / l0);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void save_payout_histogram(const Vec& payouts, double l0, int bins, const std::string& path) {
    if (bins < 1) throw ContractError("payout histogram: need at least one bin");
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    const double width = l0 / bins;
    for (Eigen::Index i = 0; i < payouts.size(); ++i) {
        int b = static_cast<int>(payouts(i) / width);
        b = std::max(0, std::min(b, bins - 1));
        ++counts[static_cast<std::size_t>(b)];
    }
    std::string body = "bin_lo,bin_hi,count\n";
    for (int b = 0; b < bins; ++b)
        body += format_double(b * width) + "," + format_double((b + 1) * width) + "," +
                std::to_string(counts[static_cast<std::size_t>(b)]) + "\n";
    write_file(path, body);
}

void save_quote_json(const MbgQuote& quote, const PricingConfig& pricing,
                     const std::string& path) {
    nlohmann::json j;
    j["format"] = "mbg-quote-v1";
    j["l0"] = pricing.l0;
    j["alpha_g"] = pricing.alpha_g;
    j["lambda"] = pricing.lambda;
    j["death_seed"] = pricing.death_seed;
    j["e_hat"] = quote.e_hat;
    j["cvar_hat"] = quote.cvar_hat;
    j["f_hat"] = quote.f_hat;
    j["trigger_rate"] = quote.trigger_rate;
    j["deaths"] = quote.deaths;
    write_file(path, j.dump(2) + "\n");
}

void save_sensitivity_csv(const std::vector<SensitivityRow>& rows,
                          const std::vector<double>& lambdas, const std::string& path) {
    std::string body = "gamma,alpha_g,e_hat,cvar_hat";
    for (double l : lambdas) body += ",f_lambda_" + format_double(l);
    body += "\n";
    for (const auto& row : rows) {
        body += format_double(row.gamma) + "," + format_double(row.alpha_g) + "," +
                format_double(row.e_hat) + "," + format_double(row.cvar_hat);
        for (double f : row.f_by_lambda) body += "," + format_double(f);
        body += "\n";
    }
    write_file(path, body);
}

}  // namespace tontine

#include "tontine/market.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "tontine/errors.hpp"
#include "tontine/io.hpp"
#include "tontine/rng.hpp"

namespace tontine {

namespace {

void validate_kou(const KouParams& p, const char* name) {
    auto fail = [&](const std::string& msg) {
        throw ValidationError(std::string("kou params (") + name + "): " + msg);
    };
    if (!(p.sigma >= 0.0)) fail("sigma must be nonnegative");
    if (!(p.lambda >= 0.0)) fail("lambda must be nonnegative");
    if (!(p.zeta >= 0.0 && p.zeta <= 1.0)) fail("zeta must lie in [0, 1]");
    if (!(p.eta1 > 1.0)) fail("eta1 must exceed 1 (finite mean up-jump)");
    if (!(p.eta2 > 0.0)) fail("eta2 must be positive");
    if (!std::isfinite(p.mu)) fail("mu must be finite");
}

}  // namespace

double kou_compensator(const KouParams& p) {
    validate_kou(p, "compensator");
    return p.zeta * p.eta1 / (p.eta1 - 1.0) + (1.0 - p.zeta) * p.eta2 / (p.eta2 + 1.0) - 1.0;
}

double kou_log_drift(const KouParams& p) {
    double mean_jump = p.zeta / p.eta1 - (1.0 - p.zeta) / p.eta2;
    return p.mu - p.lambda * kou_compensator(p) - 0.5 * p.sigma * p.sigma + p.lambda * mean_jump;
}

PathSet simulate_kou(const KouMarket& market, int n_paths, int periods, std::uint64_t seed) {
    validate_kou(market.stock, "stock");
    validate_kou(market.bond, "bond");
    if (!(std::abs(market.rho_sb) <= 1.0))
        throw ValidationError("kou market: |rho_sb| must not exceed 1");
    if (market.steps_per_year < 1)
        throw ValidationError("kou market: steps_per_year must be at least 1");
    if (n_paths < 1 || periods < 1)
        throw ContractError("simulate_kou: need at least one path and one period");

    const double dt = 1.0 / market.steps_per_year;
    const double kappa_s = kou_compensator(market.stock);
    const double kappa_b = kou_compensator(market.bond);
    const double drift_s = (market.stock.mu - market.stock.lambda * kappa_s -
                            0.5 * market.stock.sigma * market.stock.sigma) * dt;
    const double drift_b = (market.bond.mu - market.bond.lambda * kappa_b -
                            0.5 * market.bond.sigma * market.bond.sigma) * dt;
    const double vol_s = market.stock.sigma * std::sqrt(dt);
    const double vol_b = market.bond.sigma * std::sqrt(dt);
    const double rho = market.rho_sb;
    const double rho_c = std::sqrt(1.0 - rho * rho);

    PathSet out;
    out.n_paths = n_paths;
    out.periods = periods;
    out.n_assets = 2;
    out.gross = Mat(n_paths, periods * 2);
    out.cpi_index = Mat::Ones(n_paths, periods + 1);  // synthetic market: CPI constant
    out.deltas = Mat::Zero(n_paths, periods);
    out.seed = seed;

    for (int n = 0; n < n_paths; ++n) {
        auto rng = path_stream(seed, static_cast<std::uint64_t>(n));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::exponential_distribution<double> expo(1.0);

        auto jump_sum = [&](const KouParams& p) {
            std::poisson_distribution<int> pois(p.lambda * dt);
            int count = p.lambda > 0.0 ? pois(rng) : 0;
            double sum = 0.0;
            for (int i = 0; i < count; ++i) {
                if (unif(rng) < p.zeta)
                    sum += expo(rng) / p.eta1;
                else
                    sum -= expo(rng) / p.eta2;
            }
            return sum;
        };

        for (int m = 0; m < periods; ++m) {
            double log_s = 0.0;
            double log_b = 0.0;
            for (int step = 0; step < market.steps_per_year; ++step) {
                double z_s = gauss(rng);
                double z_i = gauss(rng);
                double z_b = rho * z_s + rho_c * z_i;
                log_s += drift_s + vol_s * z_s + jump_sum(market.stock);
                log_b += drift_b + vol_b * z_b + jump_sum(market.bond);
            }
            out.gross(n, m * 2 + 0) = std::exp(log_s);
            out.gross(n, m * 2 + 1) = std::exp(log_b);
        }
    }
    return out;
}

namespace {

// Parses YYYY-MM or YYYY-MM-DD into a month serial.
int month_serial(const std::string& date, const std::string& context) {
    if (date.size() < 7 || date[4] != '-')
        throw ParseError("panel: bad date '" + date + "' at " + context);
    int year = static_cast<int>(parse_long(date.substr(0, 4), context));
    int month = static_cast<int>(parse_long(date.substr(5, 2), context));
    if (month < 1 || month > 12)
        throw ParseError("panel: bad month in date '" + date + "' at " + context);
    return year * 12 + (month - 1);
}

}  // namespace

AssetPanel load_panel(const std::string& path) {
    auto lines = read_lines(path);
    std::size_t first = 0;
    while (first < lines.size() && lines[first].empty()) ++first;
    if (first == lines.size()) throw ParseError("panel: empty file " + path);

    auto head = split_csv(lines[first]);
    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        return s;
    };
    if (head.size() < 3 || lower(head[0]) != "date" || lower(head.back()) != "cpi")
        throw ParseError("panel: expected header date,<assets...>,cpi in " + path);

    AssetPanel panel;
    panel.asset_names.assign(head.begin() + 1, head.end() - 1);
    const int k = static_cast<int>(panel.asset_names.size());

    std::vector<std::vector<double>> rows;
    int prev_serial = 0;
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string context = path + ":" + std::to_string(i + 1);
        auto fields = split_csv(lines[i]);
        if (static_cast<int>(fields.size()) != k + 2)
            throw ParseError("panel: expected " + std::to_string(k + 2) + " fields at " + context);
        int serial = month_serial(fields[0], context);
        if (!rows.empty()) {
            if (serial == prev_serial)
                throw ValidationError("panel: duplicate month " + fields[0] + " at " + context);
            if (serial != prev_serial + 1)
                throw ValidationError("panel: months not consecutive at " + context +
                                      " (gap before " + fields[0] + ")");
        }
        prev_serial = serial;
        std::vector<double> row(k + 1);
        for (int c = 0; c < k + 1; ++c) {
            row[c] = parse_double(fields[c + 1], context);
            if (!(1.0 + row[c] > 0.0))
                throw ValidationError("panel: relative change at or below -100% at " + context);
        }
        rows.push_back(row);
        panel.dates.push_back(fields[0].substr(0, 7));
    }
    if (rows.empty()) throw ValidationError("panel: no data rows in " + path);

    panel.returns = Mat(static_cast<int>(rows.size()), k);
    panel.cpi = Vec(static_cast<int>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < k; ++c) panel.returns(static_cast<int>(r), c) = rows[r][c];
        panel.cpi(static_cast<int>(r)) = rows[r][k];
    }
    return panel;
}

PanelSummary summarize_panel(const AssetPanel& panel) {
    const int n = static_cast<int>(panel.returns.rows());
    const int k = static_cast<int>(panel.returns.cols());
    PanelSummary s;
    s.names = panel.asset_names;
    s.mean_arith = Vec(k);
    s.mean_geom = Vec(k);
    s.vol = Vec(k);
    s.var05 = Vec(k);
    s.cvar05 = Vec(k);
    for (int a = 0; a < k; ++a) {
        Vec r = panel.returns.col(a);
        double mean = r.mean();
        s.mean_arith(a) = 12.0 * mean;
        double sum_log = (r.array() + 1.0).log().sum();
        s.mean_geom(a) = std::exp(12.0 * sum_log / n) - 1.0;
        double var = n > 1 ? (r.array() - mean).square().sum() / (n - 1) : 0.0;
        s.vol(a) = std::sqrt(12.0 * var);
        std::vector<double> sorted(r.data(), r.data() + n);
        std::sort(sorted.begin(), sorted.end());
        int tail = static_cast<int>(std::ceil(0.05 * n - 1e-9));
        tail = std::max(1, std::min(tail, n));
        s.var05(a) = sorted[tail - 1];
        double acc = 0.0;
        for (int i = 0; i < tail; ++i) acc += sorted[i];
        s.cvar05(a) = acc / tail;
    }
    s.cpi_drift = 12.0 * panel.cpi.mean();
    return s;
}

std::vector<int> stationary_block_indices(int n_rows, int n_months, double expected_block_len,
                                          std::mt19937_64& rng) {
    if (n_rows < 1) throw ContractError("bootstrap: empty panel");
    if (!(expected_block_len >= 1.0))
        throw ValidationError("bootstrap: expected block length must be at least 1 month");
    std::vector<int> idx;
    idx.reserve(n_months);
    std::uniform_int_distribution<int> start_dist(0, n_rows - 1);
    const double p = 1.0 / expected_block_len;
    std::geometric_distribution<int> extra(p < 1.0 ? p : 0.5);
    while (static_cast<int>(idx.size()) < n_months) {
        int start = start_dist(rng);
        int len = expected_block_len <= 1.0 ? 1 : extra(rng) + 1;
        for (int j = 0; j < len && static_cast<int>(idx.size()) < n_months; ++j)
            idx.push_back((start + j) % n_rows);
    }
    return idx;
}

PathSet bootstrap_paths(const AssetPanel& panel, const BootstrapSpec& spec, int n_paths,
                        int periods, std::uint64_t seed) {
    if (n_paths < 1 || periods < 1)
        throw ContractError("bootstrap_paths: need at least one path and one period");
    const int n_rows = static_cast<int>(panel.returns.rows());
    const int k = static_cast<int>(panel.returns.cols());
    const int n_months = 12 * periods;

    PathSet out;
    out.n_paths = n_paths;
    out.periods = periods;
    out.n_assets = k;
    out.gross = Mat::Ones(n_paths, periods * k);
    out.cpi_index = Mat::Ones(n_paths, periods + 1);
    out.deltas = Mat::Zero(n_paths, periods);
    out.seed = seed;

    for (int n = 0; n < n_paths; ++n) {
        auto rng = path_stream(seed, static_cast<std::uint64_t>(n));
        // One index sequence drives every asset column and the CPI jointly.
        auto idx = stationary_block_indices(n_rows, n_months, spec.expected_block_len, rng);
        for (int m = 0; m < periods; ++m) {
            for (int a = 0; a < k; ++a) {
                double g = 1.0;
                for (int j = 0; j < 12; ++j) g *= 1.0 + panel.returns(idx[m * 12 + j], a);
                out.gross(n, m * k + a) = g;
            }
            double cpi_g = 1.0;
            for (int j = 0; j < 12; ++j) cpi_g *= 1.0 + panel.cpi(idx[m * 12 + j]);
            out.cpi_index(n, m + 1) = out.cpi_index(n, m) * cpi_g;
        }
    }
    return out;
}

void attach_deltas(PathSet& paths, const DeathProbPaths& deaths) {
    if (deaths.deltas.cols() != paths.periods)
        throw ContractError("attach_deltas: period count mismatch");
    if (deaths.deltas.rows() == paths.n_paths)
        paths.deltas = deaths.deltas;
    else if (deaths.deltas.rows() == 1)
        paths.deltas = deaths.deltas.replicate(paths.n_paths, 1);
    else
        throw ContractError("attach_deltas: need one delta row or one per path");
}

PathStats path_stats(const PathSet& paths) {
    const int k = paths.n_assets;
    const long obs = static_cast<long>(paths.n_paths) * paths.periods;
    PathStats s;
    s.mean_log = Vec(k);
    s.vol_log = Vec(k);
    s.mean_gross = Vec(k);
    s.se_gross = Vec(k);
    s.corr_log = Mat::Identity(k, k);

    Mat logs(obs, k);
    for (int a = 0; a < k; ++a) {
        long i = 0;
        for (int n = 0; n < paths.n_paths; ++n)
            for (int m = 0; m < paths.periods; ++m) logs(i++, a) = std::log(paths.gross_at(n, m, a));
        s.mean_log(a) = logs.col(a).mean();
        double var = obs > 1 ? (logs.col(a).array() - s.mean_log(a)).square().sum() / (obs - 1) : 0.0;
        s.vol_log(a) = std::sqrt(var);

        double mean_g = 0.0;
        for (int n = 0; n < paths.n_paths; ++n)
            for (int m = 0; m < paths.periods; ++m) mean_g += paths.gross_at(n, m, a);
        mean_g /= obs;
        s.mean_gross(a) = mean_g;
        double var_g = 0.0;
        for (int n = 0; n < paths.n_paths; ++n)
            for (int m = 0; m < paths.periods; ++m) {
                double d = paths.gross_at(n, m, a) - mean_g;
                var_g += d * d;
            }
        var_g = obs > 1 ? var_g / (obs - 1) : 0.0;
        s.se_gross(a) = std::sqrt(var_g / obs);
    }
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) {
            if (s.vol_log(a) == 0.0 || s.vol_log(b) == 0.0) {
                s.degenerate = true;
                s.corr_log(a, b) = s.corr_log(b, a) = 0.0;
                continue;
            }
            double cov = ((logs.col(a).array() - s.mean_log(a)) *
                          (logs.col(b).array() - s.mean_log(b)))
                             .sum() /
                         (obs - 1);
            s.corr_log(a, b) = s.corr_log(b, a) = cov / (s.vol_log(a) * s.vol_log(b));
        }

    double cpi_sum = 0.0;
    for (int n = 0; n < paths.n_paths; ++n)
        cpi_sum += std::log(paths.cpi_index(n, paths.periods)) / paths.periods;
    s.cpi_drift = cpi_sum / paths.n_paths;
    return s;
}

namespace {

constexpr char kMagic[8] = {'T', 'D', 'K', 'P', 'A', 'T', 'H', 'S'};

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& buf, std::size_t& pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

void put_doubles(std::string& buf, const double* p, std::size_t count) {
    static_assert(sizeof(double) == 8);
    const char* raw = reinterpret_cast<const char*>(p);
    buf.append(raw, raw + count * 8);
}

}  // namespace

void save_pathset(const PathSet& paths, const std::string& bin_path,
                  const std::string& sidecar_path, const std::string& model_desc) {
    std::string buf;
    buf.reserve(64 + 8 * static_cast<std::size_t>(paths.n_paths) *
                         (static_cast<std::size_t>(paths.periods) * (paths.n_assets + 1) +
                          paths.periods + 1));
    buf.append(kMagic, 8);
    put_u64(buf, 1);  // layout version
    put_u64(buf, static_cast<std::uint64_t>(paths.n_paths));
    put_u64(buf, static_cast<std::uint64_t>(paths.periods));
    put_u64(buf, static_cast<std::uint64_t>(paths.n_assets));
    put_u64(buf, paths.seed);
    // Path-major little-endian doubles: gross, then CPI index, then deltas.
    std::vector<double> row;
    for (int n = 0; n < paths.n_paths; ++n)
        for (int m = 0; m < paths.periods; ++m)
            for (int a = 0; a < paths.n_assets; ++a) {
                double v = paths.gross_at(n, m, a);
                put_doubles(buf, &v, 1);
            }
    for (int n = 0; n < paths.n_paths; ++n)
        for (int m = 0; m <= paths.periods; ++m) {
            double v = paths.cpi_index(n, m);
            put_doubles(buf, &v, 1);
        }
    for (int n = 0; n < paths.n_paths; ++n)
        for (int m = 0; m < paths.periods; ++m) {
            double v = paths.deltas(n, m);
            put_doubles(buf, &v, 1);
        }
    write_file(bin_path, buf);

    nlohmann::json sidecar;
    sidecar["format"] = "pathset-v1";
    sidecar["n_paths"] = paths.n_paths;
    sidecar["periods"] = paths.periods;
    sidecar["assets"] = paths.n_assets;
    sidecar["seed"] = paths.seed;
    sidecar["model"] = model_desc;
    sidecar["content_hash"] = hex64(fnv1a64(buf.data(), buf.size()));
    write_file(sidecar_path, sidecar.dump(2) + "\n");
}

PathSet load_pathset(const std::string& bin_path) {
    const std::string buf = read_file(bin_path);
    if (buf.size() < 48 || std::memcmp(buf.data(), kMagic, 8) != 0)
        throw ParseError("pathset: bad magic in " + bin_path);
    std::size_t pos = 8;
    std::uint64_t version = get_u64(buf, pos);
    if (version != 1) throw ParseError("pathset: unsupported layout version in " + bin_path);
    PathSet out;
    out.n_paths = static_cast<int>(get_u64(buf, pos));
    out.periods = static_cast<int>(get_u64(buf, pos));
    out.n_assets = static_cast<int>(get_u64(buf, pos));
    out.seed = get_u64(buf, pos);
    const std::size_t need =
        pos + 8 * (static_cast<std::size_t>(out.n_paths) * out.periods * out.n_assets +
                   static_cast<std::size_t>(out.n_paths) * (out.periods + 1) +
                   static_cast<std::size_t>(out.n_paths) * out.periods);
    if (buf.size() != need) throw ParseError("pathset: truncated file " + bin_path);

    auto next = [&]() {
        double v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    };
    out.gross = Mat(out.n_paths, out.periods * out.n_assets);
    out.cpi_index = Mat(out.n_paths, out.periods + 1);
    out.deltas = Mat(out.n_paths, out.periods);
    for (int n = 0; n < out.n_paths; ++n)
        for (int m = 0; m < out.periods; ++m)
            for (int a = 0; a < out.n_assets; ++a) out.gross(n, m * out.n_assets + a) = next();
    for (int n = 0; n < out.n_paths; ++n)
        for (int m = 0; m <= out.periods; ++m) out.cpi_index(n, m) = next();
    for (int n = 0; n < out.n_paths; ++n)
        for (int m = 0; m < out.periods; ++m) out.deltas(n, m) = next();
    return out;
}

}  // namespace tontine

#include "tontine/mortality.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "tontine/errors.hpp"
#include "tontine/io.hpp"
#include "tontine/rng.hpp"

namespace tontine {

namespace {

constexpr double kProbEps = 1e-10;

std::string cell_name(int age, int year) {
    return "(" + std::to_string(age) + ", " + std::to_string(year) + ")";
}

double clamp_prob(double q, long& clamped) {
    if (q < kProbEps) {
        ++clamped;
        return kProbEps;
    }
    if (q > 1.0 - kProbEps) {
        ++clamped;
        return 1.0 - kProbEps;
    }
    return q;
}

double link_to_prob(double eta, LcLink link) {
    if (link == LcLink::LogCentral) {
        // eta = log m; constant force of mortality over the year.
        return 1.0 - std::exp(-std::exp(eta));
    }
    return 1.0 / (1.0 + std::exp(-eta));
}

// Random-walk innovation scale from first differences, ML convention.
void drift_and_sigma(const Vec& kappa, double& drift, double& sigma) {
    const int n = static_cast<int>(kappa.size()) - 1;
    if (n < 1) {
        drift = 0.0;
        sigma = 0.0;
        return;
    }
    Vec d = kappa.tail(n) - kappa.head(n);
    drift = d.mean();
    sigma = std::sqrt((d.array() - drift).square().sum() / n);
}

}  // namespace

MortalityHistory load_mortality_history(const std::string& path) {
    auto lines = read_lines(path);
    std::size_t first = 0;
    while (first < lines.size() && lines[first].empty()) ++first;
    if (first == lines.size()) throw ParseError("mortality history: empty file " + path);
    auto head = split_csv(lines[first]);
    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        return s;
    };
    if (head.size() != 4 || lower(head[0]) != "year" || lower(head[1]) != "age" ||
        lower(head[2]) != "deaths" || lower(head[3]) != "exposure")
        throw ParseError("mortality history: expected header year,age,deaths,exposure in " + path);

    std::map<std::pair<int, int>, std::pair<double, double>> cells;
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string context = path + ":" + std::to_string(i + 1);
        auto fields = split_csv(lines[i]);
        if (fields.size() != 4) throw ParseError("mortality history: expected 4 fields at " + context);
        int year = static_cast<int>(parse_long(fields[0], context));
        int age = static_cast<int>(parse_long(fields[1], context));
        double deaths = parse_double(fields[2], context);
        double exposure = parse_double(fields[3], context);
        if (!(deaths >= 0.0))
            throw ValidationError("mortality history: negative deaths at cell " +
                                  cell_name(age, year));
        if (deaths > 0.0 && !(exposure > 0.0))
            throw ValidationError("mortality history: zero exposure with deaths at cell " +
                                  cell_name(age, year));
        if (exposure < 0.0)
            throw ValidationError("mortality history: negative exposure at cell " +
                                  cell_name(age, year));
        auto [it, inserted] = cells.emplace(std::make_pair(age, year),
                                            std::make_pair(deaths, exposure));
        (void)it;
        if (!inserted)
            throw ParseError("mortality history: duplicate cell " + cell_name(age, year) +
                             " at " + context);
    }
    if (cells.empty()) throw ValidationError("mortality history: no data rows in " + path);

    MortalityHistory h;
    h.age_min = cells.begin()->first.first;
    h.age_max = h.age_min;
    h.year_min = cells.begin()->first.second;
    h.year_max = h.year_min;
    for (const auto& [key, value] : cells) {
        (void)value;
        h.age_min = std::min(h.age_min, key.first);
        h.age_max = std::max(h.age_max, key.first);
        h.year_min = std::min(h.year_min, key.second);
        h.year_max = std::max(h.year_max, key.second);
    }
    h.deaths = Mat::Constant(h.n_ages(), h.n_years(), -1.0);
    h.exposure = Mat::Constant(h.n_ages(), h.n_years(), -1.0);
    for (const auto& [key, value] : cells) {
        h.deaths(key.first - h.age_min, key.second - h.year_min) = value.first;
        h.exposure(key.first - h.age_min, key.second - h.year_min) = value.second;
    }
    std::vector<std::string> missing;
    for (int a = 0; a < h.n_ages() && missing.size() < 8; ++a)
        for (int y = 0; y < h.n_years() && missing.size() < 8; ++y)
            if (h.deaths(a, y) < 0.0)
                missing.push_back(cell_name(h.age_min + a, h.year_min + y));
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw ValidationError("mortality history: grid not rectangular, missing cells: " + list +
                              (missing.size() == 8 ? ", ..." : ""));
    }
    return h;
}

LcParams fit_lc(const MortalityHistory& history) {
    const int na = history.n_ages();
    const int ny = history.n_years();
    Mat logm(na, ny);
    for (int a = 0; a < na; ++a)
        for (int y = 0; y < ny; ++y) {
            double e = history.exposure(a, y);
            double m = e > 0.0 ? history.deaths(a, y) / e : 0.0;
            if (!(m > 0.0) || !std::isfinite(m))
                throw CalibrationError(
                    "log-bilinear fit needs strictly positive central rates; cell " +
                    cell_name(history.age_min + a, history.year_min + y) +
                    " has none (smooth or truncate the data)");
            logm(a, y) = std::log(m);
        }

    LcParams p;
    p.ages.resize(na);
    for (int a = 0; a < na; ++a) p.ages[a] = history.age_min + a;
    p.years.resize(ny);
    for (int y = 0; y < ny; ++y) p.years[y] = history.year_min + y;

    p.alpha = logm.rowwise().mean();
    Mat centred = logm.colwise() - p.alpha;

    Eigen::JacobiSVD<Mat> svd(centred, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vec u = svd.matrixU().col(0);
    Vec v = svd.matrixV().col(0);
    double s1 = svd.singularValues()(0);

    double usum = u.sum();
    if (std::abs(usum) < 1e-12)
        throw CalibrationError("log-bilinear fit: age loadings sum to zero, cannot normalize");
    p.beta = u / usum;
    p.kappa = (s1 * usum) * v;

    // Identifiability: shift kappa to mean zero, absorbing the shift in alpha.
    double shift = p.kappa.mean();
    p.alpha += p.beta * shift;
    p.kappa.array() -= shift;

    drift_and_sigma(p.kappa, p.drift, p.sigma);
    return p;
}

CbdParams fit_cbd(const MortalityHistory& history) {
    const int na = history.n_ages();
    const int ny = history.n_years();
    if (na < 2)
        throw CalibrationError("two-factor logit fit needs at least two ages per year");

    CbdParams p;
    p.ages.resize(na);
    for (int a = 0; a < na; ++a) p.ages[a] = history.age_min + a;
    p.years.resize(ny);
    for (int y = 0; y < ny; ++y) p.years[y] = history.year_min + y;
    double xbar = 0.0;
    for (int a = 0; a < na; ++a) xbar += p.ages[a];
    xbar /= na;
    p.xbar = xbar;

    Vec x(na);
    for (int a = 0; a < na; ++a) x(a) = p.ages[a] - xbar;
    const double sxx = x.squaredNorm();

    p.kappa1 = Vec(ny);
    p.kappa2 = Vec(ny);
    for (int y = 0; y < ny; ++y) {
        Vec logit_q(na);
        for (int a = 0; a < na; ++a) {
            double d = history.deaths(a, y);
            double e = history.exposure(a, y);
            double q = d / (e + 0.5 * d);
            if (!(q > 0.0 && q < 1.0) || !std::isfinite(q))
                throw CalibrationError("logit fit needs death probabilities inside (0, 1); cell " +
                                       cell_name(history.age_min + a, history.year_min + y) +
                                       " gives q = " + format_double(q));
            logit_q(a) = std::log(q / (1.0 - q));
        }
        double ybar = logit_q.mean();
        p.kappa1(y) = ybar;
        p.kappa2(y) = x.dot(logit_q.array().matrix() - Vec::Constant(na, ybar)) / sxx;
    }

    const int n = ny - 1;
    if (n >= 1) {
        Mat d(2, n);
        for (int i = 0; i < n; ++i) {
            d(0, i) = p.kappa1(i + 1) - p.kappa1(i);
            d(1, i) = p.kappa2(i + 1) - p.kappa2(i);
        }
        p.drift = d.rowwise().mean();
        Mat centred = d.colwise() - p.drift;
        p.cov = (centred * centred.transpose()) / n;
    }
    return p;
}

namespace {

int index_of_year(const std::vector<int>& years, int y) {
    return y - years.front();
}

void check_age_span(const std::vector<int>& ages, int x0, int periods, const char* what) {
    if (x0 < ages.front() || x0 + periods - 1 > ages.back())
        throw RangeError(std::string(what) + ": ages " + std::to_string(x0) + ".." +
                         std::to_string(x0 + periods - 1) + " outside fitted span " +
                         std::to_string(ages.front()) + ".." + std::to_string(ages.back()));
}

void check_year_start(const std::vector<int>& years, int y0, const char* what) {
    if (y0 < years.front())
        throw RangeError(std::string(what) + ": start year " + std::to_string(y0) +
                         " precedes fitted span starting " + std::to_string(years.front()));
}

DeathProbPaths simulate_table(const LifeTable& table, int x0, int y0, int periods, int n_paths) {
    Vec d = table_deltas(table, x0, y0, periods);
    DeathProbPaths out;
    out.deltas = d.transpose().replicate(n_paths, 1);
    out.x0 = x0;
    out.y0 = y0;
    return out;
}

DeathProbPaths simulate_lc(const LcModel& model, int x0, int y0, int periods, int n_paths,
                           std::uint64_t seed) {
    const LcParams& p = model.params;
    check_age_span(p.ages, x0, periods, "lee-carter projection");
    check_year_start(p.years, y0, "lee-carter projection");
    const int y_last = p.years.back();
    const int last_needed = y0 + periods - 1;

    DeathProbPaths out;
    out.deltas = Mat(n_paths, periods);
    out.x0 = x0;
    out.y0 = y0;
    for (int k = 0; k < n_paths; ++k) {
        auto rng = path_stream(seed, static_cast<std::uint64_t>(k));
        std::normal_distribution<double> gauss(0.0, 1.0);
        // One innovation per projected calendar year, in year order.
        std::vector<double> projected;
        double cur = p.kappa(p.kappa.size() - 1);
        for (int y = y_last + 1; y <= last_needed; ++y) {
            cur += p.drift + p.sigma * gauss(rng);
            projected.push_back(cur);
        }
        for (int m = 1; m <= periods; ++m) {
            const int x = x0 + m - 1;
            const int y = y0 + m - 1;
            double kappa_y = y <= y_last ? p.kappa(index_of_year(p.years, y))
                                         : projected[static_cast<std::size_t>(y - y_last - 1)];
            double eta = p.alpha(x - p.ages.front()) + p.beta(x - p.ages.front()) * kappa_y;
            out.deltas(k, m - 1) = clamp_prob(link_to_prob(eta, model.link), out.clamped);
        }
    }
    return out;
}

Eigen::Matrix2d innovation_mixer(const Eigen::Matrix2d& cov) {
    Eigen::LLT<Eigen::Matrix2d> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    // Sample covariances can fail LLT by rounding only; rebuild from the
    // eigendecomposition with eigenvalues below 1e-12 set to zero.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    Eigen::Vector2d ev = es.eigenvalues();
    for (int i = 0; i < 2; ++i) ev(i) = ev(i) < 1e-12 ? 0.0 : ev(i);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

DeathProbPaths simulate_cbd(const CbdModel& model, int x0, int y0, int periods, int n_paths,
                            std::uint64_t seed) {
    const CbdParams& p = model.params;
    check_year_start(p.years, y0, "two-factor projection");
    const int y_last = p.years.back();
    const int last_needed = y0 + periods - 1;
    const Eigen::Matrix2d mixer = innovation_mixer(p.cov);

    DeathProbPaths out;
    out.deltas = Mat(n_paths, periods);
    out.x0 = x0;
    out.y0 = y0;
    for (int k = 0; k < n_paths; ++k) {
        auto rng = path_stream(seed, static_cast<std::uint64_t>(k));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<Eigen::Vector2d> projected;
        Eigen::Vector2d cur(p.kappa1(p.kappa1.size() - 1), p.kappa2(p.kappa2.size() - 1));
        for (int y = y_last + 1; y <= last_needed; ++y) {
            Eigen::Vector2d z(gauss(rng), gauss(rng));
            cur += p.drift + mixer * z;
            projected.push_back(cur);
        }
        for (int m = 1; m <= periods; ++m) {
            const int x = x0 + m - 1;
            const int y = y0 + m - 1;
            Eigen::Vector2d kap;
            if (y <= y_last)
                kap = Eigen::Vector2d(p.kappa1(index_of_year(p.years, y)),
                                      p.kappa2(index_of_year(p.years, y)));
            else
                kap = projected[static_cast<std::size_t>(y - y_last - 1)];
            double eta = kap(0) + (x - p.xbar) * kap(1);
            out.deltas(k, m - 1) = clamp_prob(1.0 / (1.0 + std::exp(-eta)), out.clamped);
        }
    }
    return out;
}

}  // namespace

DeathProbPaths simulate_deltas(const MortalityModel& model, int x0, int y0, int periods,
                               int n_paths, std::uint64_t seed) {
    if (periods < 1) throw ContractError("simulate_deltas: periods must be at least 1");
    if (n_paths < 1) throw ContractError("simulate_deltas: n_paths must be at least 1");
    if (const auto* table = std::get_if<LifeTable>(&model))
        return simulate_table(*table, x0, y0, periods, n_paths);
    if (const auto* lc = std::get_if<LcModel>(&model))
        return simulate_lc(*lc, x0, y0, periods, n_paths, seed);
    return simulate_cbd(std::get<CbdModel>(model), x0, y0, periods, n_paths, seed);
}

Vec gain_rates(const Vec& deltas) {
    Vec g(deltas.size());
    for (Eigen::Index i = 0; i < deltas.size(); ++i) {
        double d = deltas(i);
        if (!(d >= 0.0 && d < 1.0))
            throw DomainError("gain rate undefined for death probability " + format_double(d));
        g(i) = d / (1.0 - d);
    }
    return g;
}

}  // namespace tontine

#include "tontine/life_table.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tontine/errors.hpp"
#include "tontine/io.hpp"

namespace tontine {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> tokens;
    std::string t;
    while (in >> t) tokens.push_back(t);
    return tokens;
}

std::string cell_name(int age, int year) {
    return "(" + std::to_string(age) + ", " + std::to_string(year) + ")";
}

struct RawCells {
    std::map<std::pair<int, int>, double> q;  // (age, year) -> qx
};

void insert_cell(RawCells& cells, int age, int year, double q, const std::string& context) {
    if (!(q >= 0.0 && q < 1.0))
        throw ValidationError("life table: q = " + format_double(q) + " outside [0, 1) at cell " +
                              cell_name(age, year) + " (" + context + ")");
    auto [it, inserted] = cells.q.emplace(std::make_pair(age, year), q);
    (void)it;
    if (!inserted)
        throw ParseError("life table: duplicate cell " + cell_name(age, year) + " at " + context);
}

void load_csv_rows(const std::vector<std::string>& lines, const std::string& path,
                   RawCells& cells) {
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string context = path + ":" + std::to_string(i + 1);
        auto fields = split_csv(lines[i]);
        if (fields.size() != 3)
            throw ParseError("life table: expected 3 fields (year,age,qx) at " + context);
        int year = static_cast<int>(parse_long(fields[0], context));
        int age = static_cast<int>(parse_long(fields[1], context));
        double q = parse_double(fields[2], context);
        insert_cell(cells, age, year, q, context);
    }
}

// Whitespace table with a "Year Age ... qx ..." header line; the age
// column may carry an open-interval marker such as "110+".
void load_hmd_rows(const std::vector<std::string>& lines, const std::string& path,
                   RawCells& cells) {
    std::size_t header = lines.size();
    int qx_col = -1;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto tokens = split_ws(lines[i]);
        if (tokens.size() >= 3 && lower(tokens[0]) == "year" && lower(tokens[1]) == "age") {
            for (std::size_t c = 2; c < tokens.size(); ++c)
                if (lower(tokens[c]) == "qx") qx_col = static_cast<int>(c);
            header = i;
            break;
        }
    }
    if (header == lines.size() || qx_col < 0)
        throw ParseError("life table: no 'Year Age ... qx' header found in " + path);
    for (std::size_t i = header + 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string context = path + ":" + std::to_string(i + 1);
        auto tokens = split_ws(lines[i]);
        if (static_cast<int>(tokens.size()) <= qx_col)
            throw ParseError("life table: short row at " + context);
        std::string age_tok = tokens[1];
        while (!age_tok.empty() && (age_tok.back() == '+' || age_tok.back() == '-'))
            age_tok.pop_back();
        int year = static_cast<int>(parse_long(tokens[0], context));
        int age = static_cast<int>(parse_long(age_tok, context));
        const std::string& q_tok = tokens[qx_col];
        if (q_tok == ".") continue;  // missing observation; lookups will name the hole
        insert_cell(cells, age, year, parse_double(q_tok, context), context);
    }
}

}  // namespace

double LifeTable::at(int age, int year) const {
    if (!contains(age, year))
        throw RangeError("life table: missing cell " + cell_name(age, year) + ", table spans [" +
                         std::to_string(age_min) + ".." + std::to_string(age_max) + "] x [" +
                         std::to_string(year_min) + ".." + std::to_string(year_max) + "]");
    return q(age - age_min, year - year_min);
}

LifeTable load_life_table(const std::string& path) {
    auto lines = read_lines(path);
    std::size_t first = 0;
    while (first < lines.size() && lines[first].empty()) ++first;
    if (first == lines.size()) throw ParseError("life table: empty file " + path);

    RawCells cells;
    auto head = split_csv(lines[first]);
    if (head.size() == 3 && lower(head[0]) == "year" && lower(head[1]) == "age" &&
        lower(head[2]) == "qx") {
        std::vector<std::string> body(lines.begin() + first, lines.end());
        load_csv_rows(body, path, cells);
    } else {
        load_hmd_rows(lines, path, cells);
    }
    if (cells.q.empty()) throw ValidationError("life table: no data rows in " + path);

    LifeTable table;
    table.age_min = cells.q.begin()->first.first;
    table.age_max = table.age_min;
    table.year_min = cells.q.begin()->first.second;
    table.year_max = table.year_min;
    for (const auto& [key, value] : cells.q) {
        (void)value;
        table.age_min = std::min(table.age_min, key.first);
        table.age_max = std::max(table.age_max, key.first);
        table.year_min = std::min(table.year_min, key.second);
        table.year_max = std::max(table.year_max, key.second);
    }

    const int n_ages = table.age_max - table.age_min + 1;
    const int n_years = table.year_max - table.year_min + 1;
    table.q = Mat::Constant(n_ages, n_years, -1.0);
    table.present.setZero(n_ages, n_years);
    for (const auto& [key, value] : cells.q) {
        table.q(key.first - table.age_min, key.second - table.year_min) = value;
        table.present(key.first - table.age_min, key.second - table.year_min) = 1;
    }
    return table;
}

Vec table_deltas(const LifeTable& table, int x0, int y0, int periods) {
    if (periods < 1) throw ContractError("table_deltas: periods must be at least 1");
    for (int m = 1; m <= periods; ++m)
        if (!table.contains(x0 + m - 1, y0 + m - 1))
            throw RangeError("table_deltas: missing cell " + cell_name(x0 + m - 1, y0 + m - 1));
    Vec deltas(periods);
    for (int m = 1; m <= periods; ++m) deltas(m - 1) = table.at(x0 + m - 1, y0 + m - 1);
    return deltas;
}

}  // namespace tontine

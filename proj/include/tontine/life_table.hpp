#pragma once

#include <cstdint>
#include <string>

#include "tontine/types.hpp"

namespace tontine {

// Single-age, single-year table of one-year death probabilities
// q(age, year), every entry in [0, 1). The spanned grid may have holes;
// lookups of absent cells raise RangeError naming the cell.
struct LifeTable {
    int age_min = 0;
    int age_max = -1;
    int year_min = 0;
    int year_max = -1;
    Mat q;  // rows: ages, cols: years; -1 marks an absent cell
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> present;

    bool contains(int age, int year) const {
        return age >= age_min && age <= age_max && year >= year_min && year <= year_max &&
               present(age - age_min, year - year_min) != 0;
    }
    // RangeError when (age, year) is not in the table.
    double at(int age, int year) const;

    long cell_count() const { return present.cast<long>().sum(); }
};

// Loads either a `year,age,qx` CSV (header required) or a whitespace
// mortality-database layout (Year Age mx qx ...). Cells are stored as
// given; a complete rectangle is not required, but duplicates and q
// outside [0, 1) are errors.
LifeTable load_life_table(const std::string& path);

// Cohort diagonal delta_m = q(x0 + m - 1, y0 + m - 1) for m = 1..periods.
// delta_m is the probability of dying in (t_{m-1}, t_m] for someone aged
// x0 at calendar time y0.
Vec table_deltas(const LifeTable& table, int x0, int y0, int periods);

}  // namespace tontine

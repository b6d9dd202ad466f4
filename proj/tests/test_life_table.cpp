#include <doctest.h>

#include <cstring>
#include <string>

#include "test_support.hpp"
#include "tontine/errors.hpp"
#include "tontine/life_table.hpp"

using namespace tontine;

namespace {

std::string three_row_csv() {
    return "year,age,qx\n"
           "2020,65,0.01\n"
           "2021,66,0.012\n"
           "2022,67,0.015\n";
}

}  // namespace

TEST_CASE("csv life table echoes its three entries") {
    auto dir = testsup::temp_dir("lt_csv");
    auto path = testsup::write_temp(dir, "t.csv", three_row_csv());
    LifeTable table = load_life_table(path);
    CHECK(table.age_min == 65);
    CHECK(table.age_max == 67);
    CHECK(table.cell_count() == 3);
    CHECK(table.at(65, 2020) == 0.01);
    CHECK(table.at(66, 2021) == 0.012);
    CHECK(table.at(67, 2022) == 0.015);
}

TEST_CASE("q at or above 1 is rejected") {
    auto dir = testsup::temp_dir("lt_bad_q");
    auto path = testsup::write_temp(dir, "t.csv",
                                    "year,age,qx\n"
                                    "2020,65,1.2\n");
    CHECK_THROWS_AS(load_life_table(path), ValidationError);
}

TEST_CASE("malformed numeric cell names the line") {
    auto dir = testsup::temp_dir("lt_parse");
    auto path = testsup::write_temp(dir, "t.csv",
                                    "year,age,qx\n"
                                    "2020,65,zebra\n");
    CHECK_THROWS_WITH_AS(load_life_table(path), doctest::Contains(":2"), ParseError);
}

TEST_CASE("duplicate cell is rejected") {
    auto dir = testsup::temp_dir("lt_dup");
    auto path = testsup::write_temp(dir, "t.csv",
                                    "year,age,qx\n"
                                    "2020,65,0.01\n"
                                    "2020,65,0.02\n");
    CHECK_THROWS_AS(load_life_table(path), ParseError);
}

TEST_CASE("holes load but lookups name the missing cell") {
    auto dir = testsup::temp_dir("lt_missing");
    // 2x2 grid with one hole at (66, 2021).
    auto path = testsup::write_temp(dir, "t.csv",
                                    "year,age,qx\n"
                                    "2020,65,0.01\n"
                                    "2020,66,0.011\n"
                                    "2021,65,0.012\n");
    LifeTable table = load_life_table(path);
    CHECK(table.cell_count() == 3);
    CHECK(table.at(65, 2021) == 0.012);
    CHECK_FALSE(table.contains(66, 2021));
    CHECK_THROWS_WITH_AS(table.at(66, 2021), doctest::Contains("(66, 2021)"), RangeError);
}

TEST_CASE("mortality-database whitespace layout loads a 31x101 slice") {
    auto dir = testsup::temp_dir("lt_hmd");
    std::string body = "Male death rates (period 1x1)\n\n"
                       "  Year          Age         mx           qx           ax\n";
    for (int year = 1921; year <= 2021; ++year)
        for (int age = 65; age <= 95; ++age) {
            double q = 0.01 + (age - 65) * 0.002;
            body += "  " + std::to_string(year) + "   " + std::to_string(age) + "   0.01   " +
                    format_double(q) + "   0.5\n";
        }
    auto path = testsup::write_temp(dir, "hmd.txt", body);
    LifeTable table = load_life_table(path);
    CHECK(table.age_min == 65);
    CHECK(table.age_max == 95);
    CHECK(table.year_min == 1921);
    CHECK(table.year_max == 2021);
    CHECK(table.q.rows() == 31);
    CHECK(table.q.cols() == 101);
    CHECK(table.at(95, 2021) == doctest::Approx(0.07).epsilon(1e-12));
}

TEST_CASE("open age group and dot cells in the database layout") {
    auto dir = testsup::temp_dir("lt_hmd_dots");
    std::string body = "  Year          Age         mx           qx           ax\n"
                       "  2020   80   0.05   0.05   0.5\n"
                       "  2020   110+   .   .   .\n";
    auto path = testsup::write_temp(dir, "hmd.txt", body);
    // The dot row is skipped; the single remaining cell forms a 1x1 grid.
    LifeTable table = load_life_table(path);
    CHECK(table.q.rows() == 1);
    CHECK(table.at(80, 2020) == 0.05);
}

TEST_CASE("table_deltas walks the cohort diagonal") {
    auto dir = testsup::temp_dir("lt_diag");
    auto path = testsup::write_temp(dir, "t.csv", three_row_csv());
    LifeTable table = load_life_table(path);
    Vec d = table_deltas(table, 65, 2020, 3);
    REQUIRE(d.size() == 3);
    CHECK(d(0) == 0.01);
    CHECK(d(1) == 0.012);
    CHECK(d(2) == 0.015);
}

TEST_CASE("table_deltas names the first missing cell") {
    auto dir = testsup::temp_dir("lt_diag_oob");
    auto path = testsup::write_temp(dir, "t.csv", three_row_csv());
    LifeTable table = load_life_table(path);
    CHECK_THROWS_WITH_AS(table_deltas(table, 65, 2020, 4), doctest::Contains("(68, 2023)"),
                         RangeError);
}

namespace {

LifeTable constant_table(double q) {
    LifeTable table;
    table.age_min = 60;
    table.age_max = 99;
    table.year_min = 2000;
    table.year_max = 2039;
    table.q = Mat::Constant(40, 40, q);
    table.present.setOnes(40, 40);
    return table;
}

}  // namespace

TEST_CASE("constant table gives constant deltas") {
    LifeTable table = constant_table(0.02);
    Vec d = table_deltas(table, 60, 2000, 30);
    REQUIRE(d.size() == 30);
    for (int m = 0; m < 30; ++m) CHECK(d(m) == 0.02);
}

TEST_CASE("table_deltas is reproducible byte for byte") {
    LifeTable table = constant_table(0.015);
    Vec a = table_deltas(table, 62, 2001, 20);
    Vec b = table_deltas(table, 62, 2001, 20);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 20) == 0);
}

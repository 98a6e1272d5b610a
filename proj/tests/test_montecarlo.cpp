#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "netform/montecarlo.hpp"

using namespace netform;

namespace {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p)
{
    std::ifstream f(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

std::filesystem::path scratch_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("netform_mc_" + name);
    std::filesystem::remove_all(p);
    return p;
}

bool same_reports(const McReport& a, const McReport& b)
{
    if (a.reps.size() != b.reps.size()) return false;
    for (std::size_t k = 0; k < a.reps.size(); ++k) {
        const auto& x = a.reps[k];
        const auto& y = b.reps[k];
        if (x.stats.density != y.stats.density || x.stats.clustering != y.stats.clustering) return false;
        if (x.estimated != y.estimated || x.failure != y.failure) return false;
        if (x.estimated && (x.beta != y.beta || x.beta_bc != y.beta_bc || x.rho != y.rho || x.rho_bc != y.rho_bc))
            return false;
    }
    if (a.table1.has_value() != b.table1.has_value()) return false;
    if (a.table1 && (a.table1->bias_beta != b.table1->bias_beta || a.table1->rej_rho != b.table1->rej_rho))
        return false;
    return a.table2.density == b.table2.density && a.table2.min_cut == b.table2.min_cut;
}

} // namespace

TEST(Design, CovariateParity)
{
    McDesign d;
    auto in = build_design(d);
    EXPECT_EQ(in.x(0), 1.0);
    EXPECT_EQ(in.x(1), -1.0);
    EXPECT_EQ(in.x(199), -1.0);
    EXPECT_EQ(in.cov(0, 0, 1), -1.0);
    EXPECT_EQ(in.cov(0, 0, 2), 1.0);
}

TEST(Design, HeterogeneityEndpoints)
{
    McDesign d;
    auto in = build_design(d);
    EXPECT_NEAR(sparsity_constant(SparsityRule::loglog, 200), 1.6674, 1e-4);
    EXPECT_NEAR(in.A(0), -1.6674, 1e-4);
    EXPECT_EQ(in.A(199), 0.0);
    for (int i = 1; i < 200; ++i) EXPECT_GT(in.A(i), in.A(i - 1));
}

TEST(Design, SparsityRules)
{
    double l = std::log(250.0);
    EXPECT_DOUBLE_EQ(sparsity_constant(SparsityRule::sqrtlog, 250), std::sqrt(l));
    EXPECT_DOUBLE_EQ(sparsity_constant(SparsityRule::two_sqrtlog, 250), std::sqrt(2.0 * l));
    EXPECT_DOUBLE_EQ(sparsity_constant(SparsityRule::log, 250), l);
    EXPECT_EQ(parse_rule("2sqrtlog"), SparsityRule::two_sqrtlog);
    EXPECT_THROW(parse_rule("cubic"), DomainError);
}

TEST(Design, Validation)
{
    McDesign d;
    d.reps = 0;
    EXPECT_THROW(build_design(d), DomainError);
    d.reps = 1;
    d.alpha = 1.0;
    EXPECT_THROW(build_design(d), DomainError);
}

TEST(Design, SeedsDiffer)
{
    EXPECT_NE(rep_seed(1, 0), rep_seed(1, 1));
    EXPECT_NE(rep_seed(1, 0), rep_seed(2, 0));
    EXPECT_EQ(rep_seed(7, 3), rep_seed(7, 3));
}

TEST(MonteCarlo, SingleRepDeterministic)
{
    McDesign d;
    d.reps = 1;
    d.base_seed = 99;
    auto a = run_design(d);
    auto b = run_design(d);
    EXPECT_TRUE(same_reports(a, b));
    EXPECT_EQ(a.completed, 1);
}

TEST(MonteCarlo, WorkerCountDoesNotMatter)
{
    McDesign d;
    d.n = 120;
    d.rho0 = 0.5;
    d.reps = 6;
    d.base_seed = 5;
    auto a = run_design(d, 1);
    auto b = run_design(d, 3);
    EXPECT_TRUE(same_reports(a, b));
    ASSERT_TRUE(a.table1.has_value());
    EXPECT_EQ(a.table1->bias_beta, b.table1->bias_beta);
    EXPECT_EQ(a.table1->bias_rho_bc, b.table1->bias_rho_bc);
}

TEST(MonteCarlo, NetworkStatisticsIgnoreEstimation)
{
    McDesign d;
    d.n = 100;
    d.reps = 3;
    auto a = run_design(d);
    d.estimate = false;
    auto b = run_design(d);
    EXPECT_EQ(a.table2.density, b.table2.density);
    EXPECT_EQ(a.table2.clustering, b.table2.clustering);
    EXPECT_EQ(a.table2.min_cut, b.table2.min_cut);
    EXPECT_FALSE(b.table1.has_value());
}

TEST(MonteCarlo, DensityMatchesDesignExpectation)
{
    // 16 simultaneous checks sharing replication seeds, so a family-wise bound
    for (auto d : standard_grid(40, 3, false)) {
        auto r = run_design(d);
        double se = r.table2.density_sd / std::sqrt(double(d.reps));
        EXPECT_LE(std::abs(r.table2.density - expected_density(d)), 3.5 * se)
            << d.n << " " << d.rho0 << " " << rule_name(d.rule);
    }
}

TEST(MonteCarlo, DenseDesignNetworkStatistics)
{
    McDesign d;
    d.reps = 100;
    d.estimate = false;
    auto r = run_design(d);
    EXPECT_NEAR(r.table2.density, 0.15, 0.01);
    EXPECT_NEAR(r.table2.in_mean, 30.25, 0.5);
    EXPECT_NEAR(r.table2.out_mean, r.table2.in_mean, 1e-12);
    EXPECT_NEAR(r.table2.clustering, 0.53, 0.02);
    EXPECT_NEAR(r.table2.comp_connected, 1.0, 0.02);
}

TEST(MonteCarlo, BiasCorrectionCentresBeta)
{
    McDesign d;
    d.reps = 60;
    d.base_seed = 11;
    auto r = run_design(d);
    ASSERT_TRUE(r.table1.has_value());
    EXPECT_GT(r.table1->bias_beta, 0.3);
    EXPECT_LT(std::abs(r.table1->bias_beta_bc), std::abs(r.table1->bias_beta));
    EXPECT_GE(r.table1->rej_beta, 0.0);
    EXPECT_LE(r.table1->rej_beta, 1.0);
}

TEST(MonteCarlo, InstabilityMarksDesign)
{
    // without dropping isolated players the sparsest design has no MLE
    McDesign d;
    d.rho0 = 0.5;
    d.rule = SparsityRule::log;
    d.reps = 4;
    d.drop_degenerate = false;
    auto r = run_design(d);
    EXPECT_TRUE(r.unstable);
    EXPECT_FALSE(r.table1.has_value());
    EXPECT_EQ(r.failed, 4);
    ASSERT_EQ(r.failures.size(), 1u);
    EXPECT_EQ(r.failures[0].first, "nonexistence");
    std::ostringstream out;
    write_table1({r}, out);
    EXPECT_NE(out.str().find(",log,"), std::string::npos);
    EXPECT_NE(out.str().find(",-,-,-,-,-,-"), std::string::npos);
}

TEST(Tables, EmptyReportsGiveHeaders)
{
    auto dir = scratch_dir("empty");
    emit_tables({}, dir);
    auto t1 = read_csv(dir / "table1.csv");
    auto t2 = read_csv(dir / "table2.csv");
    ASSERT_EQ(t1.size(), 1u);
    ASSERT_EQ(t2.size(), 1u);
    EXPECT_EQ(t1[0], table1_columns());
    EXPECT_EQ(t2[0], table2_columns());
}

TEST(Tables, SingleDesignRoundTrip)
{
    McDesign d;
    d.n = 100;
    d.reps = 3;
    auto r = run_design(d);
    auto dir = scratch_dir("single");
    emit_tables({r}, dir);
    auto t1 = read_csv(dir / "table1.csv");
    auto t2 = read_csv(dir / "table2.csv");
    ASSERT_EQ(t1.size(), 2u);
    ASSERT_EQ(t2.size(), 2u);
    ASSERT_EQ(t1[1].size(), table1_columns().size());
    ASSERT_EQ(t2[1].size(), table2_columns().size());
    EXPECT_EQ(t1[1][0], "100");
    EXPECT_EQ(t1[1][2], "loglog");
    EXPECT_NEAR(std::stod(t1[1][4]), r.table1->bias_beta, 1e-4);
    EXPECT_NEAR(std::stod(t2[1][3]), r.table2.density, 1e-4);
    EXPECT_NEAR(std::stod(t2[1][10]), r.table2.clustering, 1e-4);
}

TEST(Tables, FullGridLayout)
{
    std::vector<McReport> reports;
    for (auto d : standard_grid(1, 1, false)) reports.push_back(run_design(d));
    auto dir = scratch_dir("grid");
    emit_tables(reports, dir);
    auto t1 = read_csv(dir / "table1.csv");
    auto t2 = read_csv(dir / "table2.csv");
    ASSERT_EQ(t1.size(), 17u);
    ASSERT_EQ(t2.size(), 17u);
    EXPECT_EQ(t2[1][0], "200");
    EXPECT_EQ(t2[1][1], "0.0");
    EXPECT_EQ(t2[16][0], "250");
    EXPECT_EQ(t2[16][1], "0.5");
    EXPECT_EQ(t2[16][2], "log");
    EXPECT_EQ(t1[5][4], "-");
}

TEST(Tables, UnwritableSink)
{
    auto file = scratch_dir("file");
    std::ofstream(file) << "x";
    EXPECT_THROW(emit_tables({}, file / "sub"), IoError);
}

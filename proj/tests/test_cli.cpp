#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#ifndef NETFORM_CLI_PATH
#define NETFORM_CLI_PATH "netform"
#endif

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out, err;
};

fs::path work_dir(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("netform_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

Run run(const std::string& args, const fs::path& dir)
{
    auto err = dir / "stderr.txt";
    std::string cmd = std::string(NETFORM_CLI_PATH) + " --out " + dir.string() + " " + args + " 2>" + err.string();
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return {-1, "", ""};
    std::array<char, 4096> buf;
    std::size_t k;
    while ((k = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), k);
    int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
}

} // namespace

TEST(Cli, SimulateThenStats)
{
    auto dir = work_dir("simstats");
    auto a = run("--seed 4 simulate --n 60 --rho 0.5", dir);
    ASSERT_EQ(a.code, 0) << a.err;
    auto sim = json::parse(a.out);
    auto b = run("stats --network " + (dir / "network.csv").string(), dir);
    ASSERT_EQ(b.code, 0) << b.err;
    auto st = json::parse(b.out);
    EXPECT_EQ(st["n"], 60);
    EXPECT_TRUE(st["directed"].get<bool>());
    EXPECT_DOUBLE_EQ(st["density"].get<double>(), sim["density"].get<double>());
    EXPECT_TRUE(fs::exists(dir / "stats.csv"));
}

TEST(Cli, SeedDeterminesNetwork)
{
    auto d1 = work_dir("seed1"), d2 = work_dir("seed2"), d3 = work_dir("seed3");
    ASSERT_EQ(run("--seed 9 simulate --n 40", d1).code, 0);
    ASSERT_EQ(run("--seed 9 simulate --n 40", d2).code, 0);
    ASSERT_EQ(run("--seed 10 simulate --n 40", d3).code, 0);
    EXPECT_EQ(slurp(d1 / "network.csv"), slurp(d2 / "network.csv"));
    EXPECT_NE(slurp(d1 / "network.csv"), slurp(d3 / "network.csv"));
}

TEST(Cli, ConfigBlocksAndFlagPrecedence)
{
    auto dir = work_dir("config");
    std::ofstream(dir / "cfg.json") << R"({"global": {"seed": 5}, "simulate": {"n": 30, "directed": false}})";
    auto a = run("--config " + (dir / "cfg.json").string() + " simulate", dir);
    ASSERT_EQ(a.code, 0) << a.err;
    auto j = json::parse(a.out);
    EXPECT_EQ(j["n"], 30);
    EXPECT_FALSE(j["directed"].get<bool>());
    auto b = run("--config " + (dir / "cfg.json").string() + " simulate --n 35", dir);
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(json::parse(b.out)["n"], 35);
}

TEST(Cli, EstimatorsProduceJson)
{
    auto dir = work_dir("estimators");
    ASSERT_EQ(run("--seed 2 simulate --n 70 --rho 0.3", dir).code, 0);
    std::string net = " --network " + (dir / "network.csv").string() + " --covariates " +
                      (dir / "covariates.csv").string() + " --drop-degenerate";
    auto j = run("jml --family probit" + net, dir);
    ASSERT_EQ(j.code, 0) << j.err;
    auto fit = json::parse(j.out);
    EXPECT_TRUE(fit["converged"].get<bool>());
    EXPECT_NEAR(fit["beta"][0].get<double>(), 1.0, 0.5);
    auto r = run("rho" + net, dir);
    ASSERT_EQ(r.code, 0) << r.err;
    double rho = json::parse(r.out)["rho"];
    EXPECT_GT(rho, -1.0);
    EXPECT_LT(rho, 1.0);
    auto t = run("transitivity --family probit" + net, dir);
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_TRUE(json::parse(t.out)["z"].is_number());
}

TEST(Cli, MonteCarloWritesTables)
{
    auto dir = work_dir("mc");
    auto a = run("--threads 2 montecarlo --n 60 --reps 2", dir);
    ASSERT_EQ(a.code, 0) << a.err;
    auto t1 = slurp(dir / "table1.csv");
    auto t2 = slurp(dir / "table2.csv");
    EXPECT_EQ(t1.substr(0, t1.find('\n')), "n,rho,Cn,density,bias_beta,bias_beta_bc,bias_rho,bias_rho_bc,rej_beta,rej_rho");
    EXPECT_EQ(std::count(t2.begin(), t2.end(), '\n'), 2);
    auto meta = json::parse(a.out);
    EXPECT_EQ(meta["designs"][0]["completed"], 2);
}

TEST(Cli, GameCommands)
{
    auto dir = work_dir("game");
    auto a = run("--seed 3 ps-enumerate --players 4 --activities 2", dir);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_GE(json::parse(a.out)["count"].get<int>(), 1);
    auto b = run("--seed 3 bounds --players 4 --subset 1,2,3 --links 1-2 --draws 300", dir);
    ASSERT_EQ(b.code, 0) << b.err;
    auto j = json::parse(b.out);
    EXPECT_LE(j["lower"].get<double>(), j["upper"].get<double>());
}

TEST(Cli, NplOnSimulatedData)
{
    auto dir = work_dir("npl");
    auto a = run("--seed 8 npl --simulate --num-blocks 6 --block-size 30", dir);
    ASSERT_EQ(a.code, 0) << a.err;
    auto j = json::parse(a.out);
    EXPECT_TRUE(j["converged"].get<bool>());
    EXPECT_EQ(j["lambda_star"].size(), 2u);
    EXPECT_TRUE(fs::exists(dir / "npl_trace.csv"));
}

TEST(Cli, ErrorsAreJson)
{
    auto dir = work_dir("errors");
    auto a = run("stats --network " + (dir / "missing.csv").string(), dir);
    EXPECT_NE(a.code, 0);
    auto e = json::parse(a.err);
    EXPECT_EQ(e["error"], "io");
    std::ofstream(dir / "bad.json") << "{not json";
    auto b = run("--config " + (dir / "bad.json").string() + " simulate", dir);
    EXPECT_NE(b.code, 0);
    EXPECT_EQ(json::parse(b.err)["error"], "parse");
    auto c = run("simulate --rule cubic", dir);
    EXPECT_NE(c.code, 0);
    EXPECT_EQ(json::parse(c.err)["error"], "domain");
    auto d = run("no-such-command", dir);
    EXPECT_NE(d.code, 0);
    EXPECT_EQ(json::parse(d.err)["error"], "usage");
}

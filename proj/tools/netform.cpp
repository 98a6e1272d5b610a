#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "netform/netform.hpp"

using namespace netform;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Global {
    std::uint64_t seed = 1;
    std::string config;
    std::string out = ".";
    int threads = 1;
    json cfg = json::object();

    // module block from the config file, empty if absent
    json block(const std::string& name) const { return cfg.contains(name) ? cfg[name] : json::object(); }
};

template <class T>
void from_cfg(const json& b, const std::string& key, T& v, const CLI::App* app, const std::string& flag)
{
    if (b.contains(key) && app->count(flag) == 0) v = b[key].get<T>();
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return f;
}

std::ofstream open_out(const Global& g, const std::string& name)
{
    std::error_code ec;
    fs::create_directories(g.out, ec);
    fs::path p = fs::path(g.out) / name;
    std::ofstream f(p);
    if (!f) throw IoError("cannot write " + p.string());
    return f;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, sep)) {
        cell.erase(0, cell.find_first_not_of(" \t\r"));
        cell.erase(cell.find_last_not_of(" \t\r") + 1);
        out.push_back(cell);
    }
    return out;
}

bool is_number(const std::string& s)
{
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return !s.empty() && end && *end == '\0';
}

// rows "player,v1,...,vq" (1-based players, optional header) -> n x q
Eigen::MatrixXd read_player_table(const std::string& path, int n)
{
    auto f = open_in(path);
    std::string line;
    std::vector<std::vector<double>> rows;
    std::vector<int> ids;
    int row = 0;
    while (std::getline(f, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        auto cells = split(line, ',');
        if (!is_number(cells[0])) {
            if (rows.empty()) continue;
            throw ParseError(path + " row " + std::to_string(row) + ": non-numeric player id", row);
        }
        std::vector<double> v;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (!is_number(cells[c])) throw ParseError(path + " row " + std::to_string(row) + ": bad value", row);
            v.push_back(std::stod(cells[c]));
        }
        if (!rows.empty() && v.size() != rows[0].size())
            throw ParseError(path + " row " + std::to_string(row) + ": ragged row", row);
        ids.push_back(std::stoi(cells[0]));
        rows.push_back(v);
    }
    if (int(rows.size()) != n) throw ParseError(path + ": expected one row per player (" + std::to_string(n) + ")", row);
    Eigen::MatrixXd X(n, rows.empty() ? 0 : rows[0].size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (ids[k] < 1 || ids[k] > n) throw ParseError(path + ": player id out of range", int(k) + 1);
        for (std::size_t c = 0; c < rows[k].size(); ++c) X(ids[k] - 1, c) = rows[k][c];
    }
    return X;
}

// dyad covariates X_ij = X_i X_j per node covariate column; parity design by default
DyadCovariates node_covariates(const std::string& path, int n)
{
    if (path.empty()) {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x(i) = (i + 1) % 2 == 0 ? -1.0 : 1.0;
        return DyadCovariates::product(x);
    }
    Eigen::MatrixXd X = read_player_table(path, n);
    DyadCovariates cov{n, {}};
    for (int c = 0; c < X.cols(); ++c) cov.x.push_back(DyadCovariates::product(X.col(c)).x[0]);
    return cov;
}

json to_json(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
    return a;
}

json to_json(const Eigen::MatrixXd& m)
{
    json a = json::array();
    for (int i = 0; i < m.rows(); ++i) a.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
    return a;
}

Eigen::MatrixXd matrix_from(const json& j)
{
    int r = int(j.size()), c = r ? int(j[0].size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i) {
        if (int(j[i].size()) != c) throw DomainError("ragged matrix in config");
        for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

json summary_json(const NetworkSummary& s)
{
    return {{"n", s.n},
            {"directed", s.directed},
            {"density", s.density},
            {"in_mean", s.in_mean},
            {"in_median", s.in_median},
            {"out_mean", s.out_mean},
            {"out_median", s.out_median},
            {"comp_connected", s.comp_share},
            {"min_cut", s.min_cut},
            {"clustering", s.clustering}};
}

json fit_json(const JmlFit& f)
{
    json j{{"beta", to_json(Eigen::VectorXd(f.beta()))},
           {"delta", f.delta()},
           {"loglik", f.loglik},
           {"converged", f.converged},
           {"outer_iters", f.outer_iters},
           {"gradient_norm", f.gradient_norm},
           {"A", to_json(f.A)},
           {"family", to_string(f.family)}};
    json dropped = json::array();
    for (int i : f.dropped) dropped.push_back(i + 1);
    j["dropped"] = dropped;
    return j;
}

void emit(const Global& g, const std::string& name, const json& j)
{
    auto f = open_out(g, name);
    f << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
}

// ---- estimation on an observed network ----

struct FitOptions {
    std::string network, covariates, family = "logistic";
    bool delta = false, drop = false;
};

void add_fit_options(CLI::App* c, FitOptions& o)
{
    c->add_option("--network", o.network, "edge-list file")->required();
    c->add_option("--covariates", o.covariates, "player covariates CSV (player,x1,...)");
    c->add_option("--family", o.family, "logistic or probit");
    c->add_flag("--delta", o.delta, "estimate the triadic coefficient");
    c->add_flag("--drop-degenerate", o.drop, "drop players with empty or saturated degrees");
}

struct Fitted {
    Network g;
    DyadCovariates cov;
    JmlFit fit;
};

Fitted fit_network(const Global& gl, const FitOptions& o, const CLI::App* app)
{
    FitOptions opt = o;
    auto b = gl.block("jml");
    from_cfg(b, "family", opt.family, app, "--family");
    from_cfg(b, "covariates", opt.covariates, app, "--covariates");
    auto in = open_in(opt.network);
    Fitted r{read_edge_list(in), {}, {}};
    r.cov = node_covariates(opt.covariates, r.g.size());
    JmlSettings s;
    s.family = family_from_string(opt.family);
    s.estimate_delta = opt.delta || b.value("estimate_delta", false);
    s.drop_degenerate = opt.drop || b.value("drop_degenerate", false);
    s.outer_tol = b.value("outer_tol", s.outer_tol);
    s.inner_tol = b.value("inner_tol", s.inner_tol);
    int p = r.cov.dim() + (s.estimate_delta ? 1 : 0);
    r.fit = jml_estimate(r.g, r.cov, Eigen::VectorXd::Zero(p), s);
    return r;
}

// ---- ps-enumerate / bounds: small games from the config or drawn from the seed ----

StabilityGame stability_game(const json& b, int n, int r, std::uint64_t seed, bool with_formation)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto mat = [&](const char* key, int rows, int cols, double scale) {
        if (b.contains(key)) return matrix_from(b[key]);
        return Eigen::MatrixXd(Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return scale * nd(rng); }));
    };
    StabilityGame g;
    g.spec.r = r;
    g.spec.synergy = mat("synergy", r, r, 1.0);
    g.spec.cost = mat("cost", r, r, 0.3);
    if (!b.contains("cost"))
        for (int m = 0; m < r; ++m) g.spec.cost(m, m) = 1.0 + std::abs(nd(rng));
    g.spec.w = mat("w", n, r, 1.0);
    g.spec.shock_family.assign(r, Family::probit);
    if (b.contains("actions")) {
        g.actions = matrix_from(b["actions"]);
    } else {
        g.actions = Eigen::MatrixXd::NullaryExpr(n, r, [&] { return u(rng) < 0.5 ? 1.0 : 0.0; });
    }
    g.intents = mat("intents", n, r, 1.0);
    g.shocks = mat("shocks", n, r, 1.0);
    g.beliefs = Beliefs{b.contains("beliefs") ? matrix_from(b["beliefs"])
                                               : Eigen::MatrixXd(Eigen::MatrixXd::NullaryExpr(n, r, [&] { return u(rng); }))};
    if (with_formation) {
        FormationPart f;
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x(i) = (i + 1) % 2 == 0 ? -1.0 : 1.0;
        f.cov = DyadCovariates::product(x);
        f.params.beta = Eigen::VectorXd::Constant(1, b.value("beta", 1.0));
        f.params.delta = b.value("delta", 0.0);
        f.params.A = Eigen::VectorXd::Constant(n, b.value("A", 0.0));
        f.params.family = Family::logistic;
        f.nu = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) f.nu(i, j) = f.nu(j, i) = draw_shock(rng, Family::logistic);
        g.formation = f;
    }
    if (g.actions.rows() != n || g.spec.w.rows() != n) throw DomainError("game matrices do not match the player count");
    return g;
}

json links_json(const Network& g)
{
    json a = json::array();
    for (int i = 0; i < g.size(); ++i)
        for (int j = i + 1; j < g.size(); ++j)
            if (g.has_link(i, j)) a.push_back({i + 1, j + 1});
    return a;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Strategic network formation: simulation, estimation and Monte Carlo"};
    app.require_subcommand(1);
    Global gl;
    app.add_option("--seed", gl.seed, "random seed");
    app.add_option("--config", gl.config, "JSON config with one block per subcommand");
    app.add_option("--out", gl.out, "output directory");
    app.add_option("--threads", gl.threads, "worker threads")->check(CLI::PositiveNumber);

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a network from the Monte Carlo design");
    int sim_n = 200;
    std::string sim_rule = "loglog", sim_family = "probit";
    double sim_rho = 0.0, sim_beta = 1.0, sim_delta = 0.0;
    bool sim_undirected = false;
    sim->add_option("--n", sim_n, "players");
    sim->add_option("--rule", sim_rule, "sparsity rule: loglog, sqrtlog, 2sqrtlog, log");
    sim->add_option("--rho", sim_rho, "reciprocity correlation (directed probit)");
    sim->add_option("--beta", sim_beta, "homophily coefficient");
    sim->add_option("--delta", sim_delta, "triadic coefficient");
    sim->add_option("--family", sim_family, "logistic or probit");
    sim->add_flag("--undirected", sim_undirected, "simulate an undirected network");

    auto* stats = app.add_subcommand("stats", "summary statistics of an edge list");
    std::string stats_net;
    stats->add_option("--network", stats_net, "edge-list file")->required();

    FitOptions jml_o, tr_o, rho_o;
    auto* jml = app.add_subcommand("jml", "joint maximum likelihood fit");
    add_fit_options(jml, jml_o);
    auto* tr = app.add_subcommand("transitivity", "excess-transitivity test");
    add_fit_options(tr, tr_o);
    auto* rho = app.add_subcommand("rho", "reciprocity estimate with bias correction");
    add_fit_options(rho, rho_o);
    rho_o.family = "probit";
    double c_tilde = 0.01;
    rho->add_option("--c-tilde", c_tilde, "boundary margin for rho");

    auto* npl = app.add_subcommand("npl", "nested pseudo-likelihood estimation");
    std::vector<std::string> npl_blocks;
    std::string npl_actions, npl_cov;
    bool npl_sim = false;
    int npl_T = 30, npl_m = 40;
    npl->add_option("--blocks", npl_blocks, "one edge-list file per block");
    npl->add_option("--actions", npl_actions, "actions CSV (player,activity,0/1)");
    npl->add_option("--covariates", npl_cov, "covariates CSV (player,x1,...)");
    npl->add_flag("--simulate", npl_sim, "estimate on simulated two-activity data");
    npl->add_option("--num-blocks", npl_T, "simulated blocks");
    npl->add_option("--block-size", npl_m, "players per simulated block");

    auto* mc = app.add_subcommand("montecarlo", "run Monte Carlo designs and write table CSVs");
    int mc_reps = 700, mc_n = 200;
    double mc_rho = 0.0;
    std::string mc_rule = "loglog";
    bool mc_grid = false, mc_no_est = false;
    mc->add_option("--reps", mc_reps, "replications per design");
    mc->add_option("--n", mc_n, "players (single design)");
    mc->add_option("--rho", mc_rho, "reciprocity (single design)");
    mc->add_option("--rule", mc_rule, "sparsity rule (single design)");
    mc->add_flag("--grid", mc_grid, "run all 16 designs");
    mc->add_flag("--no-estimate", mc_no_est, "network statistics only");

    auto* ps = app.add_subcommand("ps-enumerate", "enumerate pairwise-stable networks of a small game");
    int ps_n = 4, ps_r = 2;
    ps->add_option("--players", ps_n, "players (at most 7)");
    ps->add_option("--activities", ps_r, "activities");

    auto* bd = app.add_subcommand("bounds", "bounds on the probability of a subnetwork");
    int bd_n = 4, bd_r = 1, bd_draws = 10000;
    std::string bd_subset = "1,2,3", bd_links = "1-2";
    bd->add_option("--players", bd_n, "players (at most 7)");
    bd->add_option("--activities", bd_r, "activities");
    bd->add_option("--subset", bd_subset, "comma-separated players (1-based)");
    bd->add_option("--links", bd_links, "links among the subset, e.g. 1-2,2-3 (positions in the subset)");
    bd->add_option("--draws", bd_draws, "shock draws");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }

    try {
        if (!gl.config.empty()) {
            auto f = open_in(gl.config);
            try {
                gl.cfg = json::parse(f);
            } catch (const json::parse_error& e) {
                throw ParseError(std::string("config: ") + e.what(), 0);
            }
            if (!gl.cfg.is_object()) throw ParseError("config must be a JSON object", 0);
            auto gb = gl.block("global");
            if (gb.contains("seed") && app.count("--seed") == 0) gl.seed = gb["seed"].get<std::uint64_t>();
            if (gb.contains("threads") && app.count("--threads") == 0) gl.threads = gb["threads"].get<int>();
            if (gb.contains("out") && app.count("--out") == 0) gl.out = gb["out"].get<std::string>();
        }

        if (*sim) {
            auto b = gl.block("simulate");
            from_cfg(b, "n", sim_n, sim, "--n");
            from_cfg(b, "rule", sim_rule, sim, "--rule");
            from_cfg(b, "rho", sim_rho, sim, "--rho");
            from_cfg(b, "beta", sim_beta, sim, "--beta");
            from_cfg(b, "delta", sim_delta, sim, "--delta");
            from_cfg(b, "family", sim_family, sim, "--family");
            if (b.contains("directed") && sim->count("--undirected") == 0) sim_undirected = !b["directed"].get<bool>();
            McDesign d;
            d.n = sim_n;
            d.rule = parse_rule(sim_rule);
            d.rho0 = sim_rho;
            d.beta0 = sim_beta;
            d.delta0 = sim_delta;
            d.reps = 1;
            auto in = build_design(d);
            in.params.family = family_from_string(sim_family);
            SimulationOptions opt;
            opt.directed = !sim_undirected;
            Network g = simulate_network(d.n, in.cov, in.params, gl.seed, opt);
            auto f = open_out(gl, "network.csv");
            write_edge_list(g, f);
            auto c = open_out(gl, "covariates.csv");
            c << "player,x\n";
            for (int i = 0; i < d.n; ++i) c << i + 1 << "," << in.x(i) << "\n";
            emit(gl, "simulate.json", summary_json(summary_stats(g)));
        } else if (*stats) {
            auto f = open_in(stats_net);
            Network g = read_edge_list(f);
            auto s = summary_stats(g);
            auto c = open_out(gl, "stats.csv");
            c << summary_csv_header() << "\n" << summary_csv_row(s) << "\n";
            emit(gl, "stats.json", summary_json(s));
        } else if (*jml) {
            auto r = fit_network(gl, jml_o, jml);
            json j = fit_json(r.fit);
            if (r.fit.family == Family::probit || !r.g.directed()) {
                auto e = expand(r.g, r.cov, r.fit);
                auto bc = bias_corrected_estimates(r.fit, e);
                j["theta_bc"] = to_json(bc.theta_bc);
            }
            emit(gl, "jml.json", j);
        } else if (*tr) {
            auto r = fit_network(gl, tr_o, tr);
            double rho_hat = 0.0;
            if (r.g.directed() && r.fit.family == Family::probit) rho_hat = rho_estimate(r.g, r.cov, r.fit).rho_hat;
            auto t = transitivity_test(r.g, r.cov, r.fit, rho_hat);
            json j{{"triangles", t.s_n},
                   {"e_hat", t.e_hat},
                   {"bias_E", t.bias_E},
                   {"bias_theta", to_json(t.bias_theta)},
                   {"variance", t.variance},
                   {"z", t.z_stat},
                   {"reject_10pct", std::abs(t.z_stat) > norm_quantile(0.95)},
                   {"fit", fit_json(r.fit)}};
            emit(gl, "transitivity.json", j);
        } else if (*rho) {
            auto r = fit_network(gl, rho_o, rho);
            auto b = gl.block("rho");
            from_cfg(b, "c_tilde", c_tilde, rho, "--c-tilde");
            auto rf = rho_estimate(r.g, r.cov, r.fit, c_tilde);
            auto e = expand(r.g, r.cov, r.fit, rf.rho_hat);
            auto bc = bias_corrected_estimates(r.fit, e, rf);
            json j{{"rho", rf.rho_hat},
                   {"rho_bc", *bc.rho_bc},
                   {"at_boundary", rf.at_boundary},
                   {"beta", to_json(Eigen::VectorXd(r.fit.beta()))},
                   {"beta_bc", to_json(bc.theta_bc)}};
            emit(gl, "rho.json", j);
        } else if (*npl) {
            auto b = gl.block("npl");
            NplData data;
            if (npl_sim || b.value("simulate", false)) {
                from_cfg(b, "num_blocks", npl_T, npl, "--num-blocks");
                from_cfg(b, "block_size", npl_m, npl, "--block-size");
                ReducedFormParams truth;
                truth.lambda_star = b.contains("lambda") ? matrix_from(b["lambda"])
                                                         : Eigen::MatrixXd{{0.8, 0.3}, {-0.4, 0.5}};
                int r = int(truth.lambda_star.cols());
                truth.alpha_star = b.contains("alpha") ? matrix_from(b["alpha"]) : Eigen::MatrixXd::Constant(2, r, 0.5);
                truth.gamma_star = Eigen::MatrixXd::Zero(npl_T, r);
                data = simulate_npl(npl_T, npl_m, truth, b.value("link_prob", 0.1), gl.seed).data;
            } else {
                if (npl_blocks.empty() && b.contains("blocks")) npl_blocks = b["blocks"].get<std::vector<std::string>>();
                from_cfg(b, "actions", npl_actions, npl, "--actions");
                from_cfg(b, "covariates", npl_cov, npl, "--covariates");
                if (npl_blocks.empty() || npl_actions.empty() || npl_cov.empty())
                    throw DomainError("npl needs --blocks, --actions and --covariates (or --simulate)");
                for (const auto& p : npl_blocks) {
                    auto f = open_in(p);
                    data.blocks.push_back(read_edge_list(f));
                }
                int n = 0;
                for (const auto& g : data.blocks) n += g.size();
                data.X = read_player_table(npl_cov, n);
                auto f = open_in(npl_actions);
                std::string line;
                std::vector<std::array<int, 3>> acts;
                int r = 0, row = 0;
                while (std::getline(f, line)) {
                    ++row;
                    auto cells = split(line, ',');
                    if (cells.size() < 3 || !is_number(cells[0])) continue;
                    if (!is_number(cells[1]) || !is_number(cells[2]))
                        throw ParseError(npl_actions + " row " + std::to_string(row) + ": bad value", row);
                    acts.push_back({std::stoi(cells[0]), std::stoi(cells[1]), std::stoi(cells[2])});
                    r = std::max(r, acts.back()[1]);
                }
                data.actions = Eigen::MatrixXd::Zero(n, r);
                for (auto [i, k, v] : acts) {
                    if (i < 1 || i > n || k < 1) throw ParseError(npl_actions + ": index out of range", 0);
                    data.actions(i - 1, k - 1) = v;
                }
            }
            NplSettings s;
            s.tol = b.value("tol", s.tol);
            s.max_iters = b.value("max_iters", s.max_iters);
            auto res = npl_run(data, s);
            auto tf = open_out(gl, "npl_trace.csv");
            tf << "sweep,loglik,step\n";
            for (std::size_t k = 0; k < res.trace.loglik.size(); ++k)
                tf << k + 1 << "," << res.trace.loglik[k] << "," << res.trace.step[k] << "\n";
            auto ef = open_out(gl, "npl_estimates.csv");
            ef << "block,row,activity,value\n";
            auto put = [&](const std::string& name, const Eigen::MatrixXd& m) {
                for (int i = 0; i < m.rows(); ++i)
                    for (int k = 0; k < m.cols(); ++k) ef << name << "," << i + 1 << "," << k + 1 << "," << m(i, k) << "\n";
            };
            put("lambda", res.params.lambda_star);
            put("alpha", res.params.alpha_star);
            put("gamma", res.params.gamma_star);
            json j{{"lambda_star", to_json(res.params.lambda_star)},
                   {"alpha_star", to_json(res.params.alpha_star)},
                   {"sweeps", res.trace.iterations},
                   {"converged", res.trace.converged}};
            emit(gl, "npl.json", j);
        } else if (*mc) {
            auto b = gl.block("montecarlo");
            from_cfg(b, "reps", mc_reps, mc, "--reps");
            from_cfg(b, "n", mc_n, mc, "--n");
            from_cfg(b, "rho", mc_rho, mc, "--rho");
            from_cfg(b, "rule", mc_rule, mc, "--rule");
            if (b.value("grid", false)) mc_grid = true;
            if (b.contains("estimate") && !b["estimate"].get<bool>()) mc_no_est = true;
            std::vector<McDesign> designs;
            if (mc_grid) {
                designs = standard_grid(mc_reps, gl.seed, !mc_no_est);
            } else {
                McDesign d;
                d.n = mc_n;
                d.rho0 = mc_rho;
                d.rule = parse_rule(mc_rule);
                d.reps = mc_reps;
                d.base_seed = gl.seed;
                d.estimate = !mc_no_est;
                designs.push_back(d);
            }
            std::vector<McReport> reports;
            json designs_json = json::array();
            for (const auto& d : designs) {
                reports.push_back(run_design(d, gl.threads));
                const auto& r = reports.back();
                json f = json::object();
                for (const auto& [k, v] : r.failures) f[k] = v;
                designs_json.push_back({{"n", d.n},
                                        {"rho", d.rho0},
                                        {"Cn", rule_name(d.rule)},
                                        {"completed", r.completed},
                                        {"failed", r.failed},
                                        {"failures", f},
                                        {"unstable", r.unstable}});
            }
            emit_tables(reports, gl.out);
            json meta{{"reps", mc_reps},
                      {"base_seed", gl.seed},
                      {"alpha", 0.1},
                      {"bias_units", "(mean - truth) / replication sd of the same estimator"},
                      {"rejection_se", "replication spread of the bias-corrected estimator"},
                      {"designs", designs_json}};
            emit(gl, "montecarlo.json", meta);
        } else if (*ps) {
            auto b = gl.block("ps-enumerate");
            from_cfg(b, "players", ps_n, ps, "--players");
            from_cfg(b, "activities", ps_r, ps, "--activities");
            auto game = stability_game(b, ps_n, ps_r, gl.seed, b.value("formation", false));
            auto nets = enumerate_ps(ps_n, game);
            json list = json::array();
            for (const auto& g : nets) list.push_back({{"links", links_json(g)}, {"potential", total_potential(g, game)}});
            auto path = improvement_path(Network(ps_n, false), game);
            emit(gl, "ps.json",
                 {{"players", ps_n}, {"count", nets.size()}, {"networks", list}, {"path_from_empty", path.size() - 1}});
        } else if (*bd) {
            auto b = gl.block("bounds");
            from_cfg(b, "players", bd_n, bd, "--players");
            from_cfg(b, "activities", bd_r, bd, "--activities");
            from_cfg(b, "subset", bd_subset, bd, "--subset");
            from_cfg(b, "links", bd_links, bd, "--links");
            from_cfg(b, "draws", bd_draws, bd, "--draws");
            std::vector<int> subset;
            for (const auto& s : split(bd_subset, ',')) {
                if (!is_number(s)) throw DomainError("bad subset entry '" + s + "'");
                int i = std::stoi(s);
                if (i < 1 || i > bd_n) throw DomainError("subset entry out of range");
                subset.push_back(i - 1);
            }
            Network sub(int(subset.size()), false);
            for (const auto& l : split(bd_links, ',')) {
                if (l.empty()) continue;
                auto ab = split(l, '-');
                if (ab.size() != 2 || !is_number(ab[0]) || !is_number(ab[1])) throw DomainError("bad link '" + l + "'");
                int a = std::stoi(ab[0]) - 1, c = std::stoi(ab[1]) - 1;
                if (a < 0 || c < 0 || a >= sub.size() || c >= sub.size() || a == c)
                    throw DomainError("link '" + l + "' outside the subset");
                sub.set_link(a, c);
            }
            auto game = stability_game(b, bd_n, bd_r, gl.seed, true);
            auto est = subnetwork_bounds(sub, subset, game, bd_draws, gl.seed + 1);
            emit(gl, "bounds.json",
                 {{"lower", est.bounds.lower}, {"upper", est.bounds.upper}, {"selected", est.selected}, {"draws", est.draws}});
        }
    } catch (const Error& e) {
        std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}

#ifndef NETFORM_MONTECARLO_HPP
#define NETFORM_MONTECARLO_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "bias.hpp"
#include "error.hpp"
#include "formation.hpp"
#include "graph_algorithms.hpp"
#include "jml.hpp"
#include "transitivity.hpp"

namespace netform {

enum class SparsityRule { loglog, sqrtlog, two_sqrtlog, log };

inline std::string rule_name(SparsityRule r)
{
    switch (r) {
    case SparsityRule::loglog: return "loglog";
    case SparsityRule::sqrtlog: return "sqrtlog";
    case SparsityRule::two_sqrtlog: return "2sqrtlog";
    case SparsityRule::log: return "log";
    }
    return "";
}

inline SparsityRule parse_rule(const std::string& s)
{
    if (s == "loglog") return SparsityRule::loglog;
    if (s == "sqrtlog") return SparsityRule::sqrtlog;
    if (s == "2sqrtlog") return SparsityRule::two_sqrtlog;
    if (s == "log") return SparsityRule::log;
    throw DomainError("unknown sparsity rule '" + s + "' (expected loglog, sqrtlog, 2sqrtlog or log)");
}

// C_n with natural logs; "2sqrtlog" is sqrt(2 ln n)
inline double sparsity_constant(SparsityRule r, int n)
{
    double l = std::log(double(n));
    switch (r) {
    case SparsityRule::loglog: return std::log(l);
    case SparsityRule::sqrtlog: return std::sqrt(l);
    case SparsityRule::two_sqrtlog: return std::sqrt(2.0 * l);
    case SparsityRule::log: return l;
    }
    return 0.0;
}

struct McDesign {
    int n = 200;
    double rho0 = 0.0;
    SparsityRule rule = SparsityRule::loglog;
    double beta0 = 1.0;
    double delta0 = 0.0;
    int reps = 700;
    double alpha = 0.1;
    std::uint64_t base_seed = 20240601;
    bool estimate = true;          // false: network statistics only
    bool drop_degenerate = true;   // fit on players with interior degrees

    void validate() const
    {
        if (n < 3) throw DomainError("design needs at least 3 players");
        if (reps < 1) throw DomainError("reps must be at least 1");
        if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
        if (!(std::abs(rho0) < 1.0)) throw DomainError("rho0 must lie in (-1,1)");
    }
};

struct DesignInputs {
    Eigen::VectorXd x;       // X_i in {-1, 1}
    Eigen::VectorXd A;       // heterogeneity
    DyadCovariates cov;      // X_ij = X_i X_j
    FormationParams params;
};

inline DesignInputs build_design(const McDesign& d)
{
    d.validate();
    DesignInputs in;
    int n = d.n;
    double cn = sparsity_constant(d.rule, n);
    in.x.resize(n);
    in.A.resize(n);
    for (int k = 0; k < n; ++k) {
        int i = k + 1;
        in.x(k) = i % 2 == 0 ? -1.0 : 1.0;
        in.A(k) = -(double(n - i) / double(n - 1)) * cn;
    }
    in.cov = DyadCovariates::product(in.x);
    in.params.beta = Eigen::VectorXd::Constant(1, d.beta0);
    in.params.delta = d.delta0;
    in.params.A = in.A;
    in.params.rho = d.rho0;
    in.params.family = Family::probit;
    return in;
}

// mean link probability implied by the design
inline double expected_density(const McDesign& d)
{
    auto in = build_design(d);
    double s = 0.0;
    for (int i = 0; i < d.n; ++i)
        for (int j = 0; j < d.n; ++j)
            if (i != j) s += norm_cdf(d.beta0 * in.x(i) * in.x(j) + in.A(i) + in.A(j));
    return s / (double(d.n) * (d.n - 1));
}

inline std::uint64_t rep_seed(std::uint64_t base, int rep)
{
    std::seed_seq seq{std::uint32_t(base), std::uint32_t(base >> 32), std::uint32_t(rep)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (std::uint64_t(out[0]) << 32) | out[1];
}

struct RepResult {
    NetworkSummary stats;
    bool estimated = false;
    std::string failure;   // error kind when estimation failed
    double beta = NAN, beta_bc = NAN, rho = NAN, rho_bc = NAN;
    int dropped = 0;
};

inline RepResult run_rep(const McDesign& d, const DesignInputs& in, int rep)
{
    RepResult r;
    SimulationOptions opt;
    opt.directed = true;
    Network g = simulate_network(d.n, in.cov, in.params, rep_seed(d.base_seed, rep), opt);
    r.stats = summary_stats(g);
    if (!d.estimate) return r;
    try {
        JmlSettings s;
        s.family = Family::probit;
        s.estimate_delta = false;
        s.drop_degenerate = d.drop_degenerate;
        auto fit = jml_estimate(g, in.cov, Eigen::VectorXd::Zero(1), s);
        auto rf = rho_estimate(g, in.cov, fit);
        auto e = expand(g, in.cov, fit, rf.rho_hat);
        auto bc = bias_corrected_estimates(fit, e, rf);
        r.beta = fit.theta(0);
        r.beta_bc = bc.theta_bc(0);
        r.rho = rf.rho_hat;
        r.rho_bc = *bc.rho_bc;
        r.dropped = int(fit.dropped.size());
        if (!std::isfinite(r.beta_bc) || !std::isfinite(r.rho_bc)) throw Error("divergence", "non-finite estimate");
        r.estimated = true;
    } catch (const Error& e) {
        r.failure = e.kind();
    }
    return r;
}

struct Table1Row {
    double bias_beta = NAN, bias_beta_bc = NAN, bias_rho = NAN, bias_rho_bc = NAN;
    double rej_beta = NAN, rej_rho = NAN;
    double mean_beta = NAN, sd_beta = NAN, mean_beta_bc = NAN, sd_beta_bc = NAN;
    double mean_rho = NAN, sd_rho = NAN, mean_rho_bc = NAN, sd_rho_bc = NAN;
};

struct Table2Row {
    double density = 0, in_mean = 0, in_median = 0, out_mean = 0, out_median = 0;
    double comp_connected = 0, min_cut = 0, clustering = 0;
    double density_sd = 0;
};

struct McReport {
    McDesign design;
    Table2Row table2;
    std::optional<Table1Row> table1;   // empty when not estimated or unstable
    int completed = 0;
    int failed = 0;
    std::vector<std::pair<std::string, int>> failures;
    bool unstable = false;
    std::vector<RepResult> reps;
};

namespace detail {

// order-fixed compensated sum
inline double ksum(const std::vector<double>& v)
{
    double s = 0.0, c = 0.0;
    for (double x : v) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

inline std::pair<double, double> mean_sd(const std::vector<double>& v)
{
    if (v.empty()) return {NAN, NAN};
    double m = ksum(v) / double(v.size());
    if (v.size() < 2) return {m, NAN};
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - m) * (v[i] - m);
    return {m, std::sqrt(ksum(dev) / double(v.size() - 1))};
}

// share of replications whose replication-studentized |t| exceeds the critical value
inline double rejection_rate(const std::vector<double>& v, double truth, double sd, double crit)
{
    if (!(sd > 0.0)) return NAN;
    int k = 0;
    for (double x : v)
        if (std::abs(x - truth) / sd > crit) ++k;
    return double(k) / double(v.size());
}

} // namespace detail

inline McReport summarize(const McDesign& d, std::vector<RepResult> reps)
{
    McReport rep;
    rep.design = d;
    int R = int(reps.size());
    std::vector<double> dens, inm, inmed, outm, outmed, comp, cut, clus;
    for (const auto& r : reps) {
        dens.push_back(r.stats.density);
        inm.push_back(r.stats.in_mean);
        inmed.push_back(r.stats.in_median);
        outm.push_back(r.stats.out_mean);
        outmed.push_back(r.stats.out_median);
        comp.push_back(r.stats.comp_share);
        cut.push_back(r.stats.min_cut);
        clus.push_back(r.stats.clustering);
    }
    auto& t2 = rep.table2;
    auto dm = detail::mean_sd(dens);
    t2.density = dm.first;
    t2.density_sd = dm.second;
    t2.in_mean = detail::ksum(inm) / R;
    t2.in_median = detail::ksum(inmed) / R;
    t2.out_mean = detail::ksum(outm) / R;
    t2.out_median = detail::ksum(outmed) / R;
    t2.comp_connected = detail::ksum(comp) / R;
    t2.min_cut = detail::ksum(cut) / R;
    t2.clustering = detail::ksum(clus) / R;

    if (d.estimate) {
        std::vector<double> b, bbc, rh, rbc;
        for (const auto& r : reps) {
            if (r.estimated) {
                b.push_back(r.beta);
                bbc.push_back(r.beta_bc);
                rh.push_back(r.rho);
                rbc.push_back(r.rho_bc);
                continue;
            }
            auto it = std::find_if(rep.failures.begin(), rep.failures.end(),
                                   [&](const auto& p) { return p.first == r.failure; });
            if (it == rep.failures.end())
                rep.failures.emplace_back(r.failure, 1);
            else
                ++it->second;
        }
        rep.completed = int(b.size());
        rep.failed = R - rep.completed;
        rep.unstable = 2 * rep.failed > R;
        if (!rep.unstable && rep.completed >= 2) {
            Table1Row t;
            double crit = norm_quantile(1.0 - d.alpha / 2.0);
            std::tie(t.mean_beta, t.sd_beta) = detail::mean_sd(b);
            std::tie(t.mean_beta_bc, t.sd_beta_bc) = detail::mean_sd(bbc);
            std::tie(t.mean_rho, t.sd_rho) = detail::mean_sd(rh);
            std::tie(t.mean_rho_bc, t.sd_rho_bc) = detail::mean_sd(rbc);
            t.bias_beta = (t.mean_beta - d.beta0) / t.sd_beta;
            t.bias_beta_bc = (t.mean_beta_bc - d.beta0) / t.sd_beta_bc;
            t.bias_rho = (t.mean_rho - d.rho0) / t.sd_rho;
            t.bias_rho_bc = (t.mean_rho_bc - d.rho0) / t.sd_rho_bc;
            t.rej_beta = detail::rejection_rate(bbc, d.beta0, t.sd_beta_bc, crit);
            t.rej_rho = detail::rejection_rate(rbc, d.rho0, t.sd_rho_bc, crit);
            rep.table1 = t;
        }
    }
    rep.reps = std::move(reps);
    return rep;
}

// Replications run on a worker pool; results are stored by replication index
// so the report does not depend on the number of workers.
inline McReport run_design(const McDesign& d, int threads = 1)
{
    d.validate();
    auto in = build_design(d);
    std::vector<RepResult> reps(d.reps);
    int workers = std::max(1, std::min(threads, d.reps));
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](int w) {
        try {
            for (int k = next++; k < d.reps; k = next++) reps[k] = run_rep(d, in, k);
        } catch (...) {
            errors[w] = std::current_exception();
            next = d.reps;
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return summarize(d, std::move(reps));
}

// the 16-design grid: n x rho0 x C_n rule
inline std::vector<McDesign> standard_grid(int reps = 700, std::uint64_t base_seed = 20240601, bool estimate = true)
{
    std::vector<McDesign> g;
    for (int n : {200, 250})
        for (double rho : {0.0, 0.5})
            for (auto rule : {SparsityRule::loglog, SparsityRule::sqrtlog, SparsityRule::two_sqrtlog, SparsityRule::log}) {
                McDesign d;
                d.n = n;
                d.rho0 = rho;
                d.rule = rule;
                d.reps = reps;
                d.base_seed = base_seed;
                d.estimate = estimate;
                g.push_back(d);
            }
    return g;
}

inline const std::vector<std::string>& table1_columns()
{
    static const std::vector<std::string> c{"n", "rho", "Cn", "density", "bias_beta", "bias_beta_bc",
                                            "bias_rho", "bias_rho_bc", "rej_beta", "rej_rho"};
    return c;
}

inline const std::vector<std::string>& table2_columns()
{
    static const std::vector<std::string> c{"n", "rho", "Cn", "density", "in_mean", "in_median", "out_mean",
                                            "out_median", "comp_connected", "min_cut", "clustering"};
    return c;
}

namespace detail {

inline std::string cell(double v, int prec = 4)
{
    if (!std::isfinite(v)) return "-";
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

inline std::string join(const std::vector<std::string>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

} // namespace detail

inline void write_table1(const std::vector<McReport>& reports, std::ostream& out)
{
    out << detail::join(table1_columns()) << "\n";
    for (const auto& r : reports) {
        const auto& d = r.design;
        std::vector<std::string> row{std::to_string(d.n), detail::cell(d.rho0, 1), rule_name(d.rule),
                                     detail::cell(r.table2.density)};
        if (r.table1) {
            const auto& t = *r.table1;
            for (double v : {t.bias_beta, t.bias_beta_bc, t.bias_rho, t.bias_rho_bc, t.rej_beta, t.rej_rho})
                row.push_back(detail::cell(v));
        } else {
            row.insert(row.end(), 6, "-");
        }
        out << detail::join(row) << "\n";
    }
}

inline void write_table2(const std::vector<McReport>& reports, std::ostream& out)
{
    out << detail::join(table2_columns()) << "\n";
    for (const auto& r : reports) {
        const auto& d = r.design;
        const auto& t = r.table2;
        std::vector<std::string> row{std::to_string(d.n), detail::cell(d.rho0, 1), rule_name(d.rule)};
        for (double v : {t.density, t.in_mean, t.in_median, t.out_mean, t.out_median, t.comp_connected, t.min_cut,
                         t.clustering})
            row.push_back(detail::cell(v));
        out << detail::join(row) << "\n";
    }
}

// table1.csv and table2.csv in dir
inline void emit_tables(const std::vector<McReport>& reports, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    auto open = [&](const std::string& name) {
        std::ofstream f(dir / name);
        if (!f) throw IoError("cannot write " + (dir / name).string());
        return f;
    };
    auto t1 = open("table1.csv");
    write_table1(reports, t1);
    auto t2 = open("table2.csv");
    write_table2(reports, t2);
    if (!t1 || !t2) throw IoError("failed writing tables to " + dir.string());
}

} // namespace netform

#endif

#ifndef NETFORM_FORMATION_HPP
#define NETFORM_FORMATION_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "distributions.hpp"
#include "network.hpp"

namespace netform {

// X_ij stored as one n x n matrix per covariate component
struct DyadCovariates {
    int n = 0;
    std::vector<Eigen::MatrixXd> x;

    int dim() const { return int(x.size()); }
    double operator()(int c, int i, int j) const { return x[c](i, j); }

    static DyadCovariates none(int n) { return {n, {}}; }

    // X_ij = X_i * X_j
    static DyadCovariates product(const Eigen::VectorXd& xi)
    {
        DyadCovariates c{int(xi.size()), {xi * xi.transpose()}};
        c.x[0].diagonal().setZero();
        return c;
    }

    void validate(int players) const
    {
        if (n != players) throw DomainError("covariate size does not match the network");
        for (const auto& m : x) {
            if (m.rows() != n || m.cols() != n) throw DomainError("covariate component is not n x n");
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (i != j && !std::isfinite(m(i, j))) throw DomainError("non-finite covariate");
        }
    }
};

struct FormationParams {
    Eigen::VectorXd beta;
    double delta = 0.0;
    Eigen::VectorXd A;
    double rho = 0.0;
    Family family = Family::logistic;
};

inline double homophily(int i, int j, const DyadCovariates& cov, const Eigen::VectorXd& beta)
{
    double s = 0.0;
    for (int c = 0; c < cov.dim(); ++c) s += beta(c) * cov(c, i, j);
    return s;
}

inline double link_index(int i, int j, const Network& g, const DyadCovariates& cov, const FormationParams& p)
{
    if (i == j) throw DomainError("link index needs two distinct players");
    double tri = p.delta != 0.0 ? p.delta * g.common_neighbors(i, j) : 0.0;
    return tri + homophily(i, j, cov, p.beta) + p.A(i) + p.A(j);
}

inline double link_prob(double index, Family f) { return link_cdf(index, f); }

// P(nu1 <= g1, nu2 <= g2) for standard bivariate normal shocks
inline double reciprocal_prob(double g1, double g2, double rho)
{
    if (!(std::abs(rho) < 1.0)) throw DomainError("reciprocity correlation must lie in (-1,1)");
    return bvn_cdf(g1, g2, rho);
}

inline Eigen::MatrixXd link_probabilities(const Network& g, const DyadCovariates& cov, const FormationParams& p)
{
    int n = g.size();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) P(i, j) = link_prob(link_index(i, j, g, cov, p), p.family);
    return P;
}

// -infinity when an observed link has probability that underflows to zero
inline double conditional_log_likelihood(const Network& g, const DyadCovariates& cov, const FormationParams& p)
{
    int n = g.size();
    double ll = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = g.directed() ? 0 : i + 1; j < n; ++j) {
            if (i == j) continue;
            double z = link_index(i, j, g, cov, p);
            ll += g.has_link(i, j) ? link_logcdf(z, p.family) : link_logccdf(z, p.family);
        }
    if (std::isnan(ll)) return -std::numeric_limits<double>::infinity();
    return ll;
}

struct SimulationOptions {
    bool directed = false;
    int max_iters = 100;
};

struct SimulationNoConvergence : NoConvergence {
    SimulationNoConvergence(const std::string& w, int iters, Network last)
        : NoConvergence(w, iters), last_iterate(std::move(last)) {}
    Network last_iterate;
};

// Dyad shocks nu(i,j); for directed draws (nu_ij, nu_ji) are jointly normal
// with correlation rho.
inline Eigen::MatrixXd draw_dyad_shocks(int n, const FormationParams& p, bool directed, std::uint64_t seed)
{
    if (p.rho != 0.0 && (!directed || p.family != Family::probit))
        throw DomainError("correlated dyad shocks require a directed probit design");
    if (!(std::abs(p.rho) < 1.0)) throw DomainError("reciprocity correlation must lie in (-1,1)");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd nu = Eigen::MatrixXd::Zero(n, n);
    double c = std::sqrt(1.0 - p.rho * p.rho);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (!directed) {
                nu(i, j) = nu(j, i) = draw_shock(rng, p.family);
            } else if (p.family == Family::probit) {
                double a = nd(rng), b = nd(rng);
                nu(i, j) = a;
                nu(j, i) = p.rho * a + c * b;
            } else {
                nu(i, j) = draw_shock(rng, p.family);
                nu(j, i) = draw_shock(rng, p.family);
            }
        }
    return nu;
}

// Link rule G_ij = 1{delta*sum_k G_ik G_jk + X_ij'beta + A_i + A_j - nu_ij >= 0}.
// With delta != 0 the rule is iterated from the delta = 0 draw to a fixed point.
inline Network form_network(const DyadCovariates& cov, const FormationParams& p, const Eigen::MatrixXd& nu,
                            bool directed, int max_iters = 100)
{
    int n = int(nu.rows());
    Eigen::MatrixXd base(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) base(i, j) = i == j ? 0.0 : homophily(i, j, cov, p.beta) + p.A(i) + p.A(j) - nu(i, j);

    auto apply = [&](const Network* prev) {
        Network g(n, directed);
        for (int i = 0; i < n; ++i)
            for (int j = directed ? 0 : i + 1; j < n; ++j) {
                if (i == j) continue;
                double v = base(i, j);
                if (prev) v += p.delta * prev->common_neighbors(i, j);
                if (v >= 0.0) g.set_link(i, j);
            }
        return g;
    };
    Network g = apply(nullptr);
    if (p.delta == 0.0) return g;
    for (int it = 0; it < max_iters; ++it) {
        Network next = apply(&g);
        if (next == g) return g;
        g = std::move(next);
    }
    throw SimulationNoConvergence("triadic link rule did not reach a fixed point", max_iters, g);
}

inline Network simulate_network(int n, const DyadCovariates& cov, const FormationParams& p, std::uint64_t seed,
                                const SimulationOptions& opt = {})
{
    if (p.A.size() != n) throw DomainError("heterogeneity vector has wrong length");
    cov.validate(n);
    if (p.beta.size() != cov.dim()) throw DomainError("beta dimension does not match covariates");
    auto nu = draw_dyad_shocks(n, p, opt.directed, seed);
    return form_network(cov, p, nu, opt.directed, opt.max_iters);
}

} // namespace netform

#endif

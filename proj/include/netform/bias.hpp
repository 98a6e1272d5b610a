#ifndef NETFORM_BIAS_HPP
#define NETFORM_BIAS_HPP

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "distributions.hpp"
#include "jml.hpp"

namespace netform {

// Second-order expansion of the JML estimator around a fit. Parameters are
// ordered (theta, A); c_o is the design row of observation o, i.e. x_o in
// the theta block and ones at the two endpoint positions in the A block.
struct Expansion {
    DyadData d;
    Family family = Family::logistic;
    double rho = 0.0;
    int p = 0, n = 0;
    Eigen::VectorXd theta, A, z;
    std::vector<LinkTerms> t;
    Eigen::VectorXd joint;   // P(G_o = G_rev(o) = 1), directed only
    Eigen::VectorXd covar;   // joint - p_o p_rev(o)
    Eigen::MatrixXd info;    // expected information
    Eigen::MatrixXd info_inv;
    Eigen::MatrixXd M;       // sandwich variance info^-1 (info + K) info^-1
    Eigen::VectorXd b;       // first-order bias of (theta-hat, A-hat)

    // c_o' Q c_u
    double form(const Eigen::MatrixXd& Q, int o, int u) const
    {
        int ao = p + d.a[o], bo = p + d.b[o], au = p + d.a[u], bu = p + d.b[u];
        double r = Q(ao, au) + Q(ao, bu) + Q(bo, au) + Q(bo, bu);
        for (int c = 0; c < p; ++c) {
            double xo = d.x(o, c), xu = d.x(u, c);
            r += xo * (Q(c, au) + Q(c, bu)) + xu * (Q(ao, c) + Q(bo, c));
            for (int e = 0; e < p; ++e) r += xo * Q(c, e) * d.x(u, e);
        }
        return r;
    }

    // c_o' v
    double dot(const Eigen::VectorXd& v, int o) const
    {
        double r = v(p + d.a[o]) + v(p + d.b[o]);
        for (int c = 0; c < p; ++c) r += d.x(o, c) * v(c);
        return r;
    }

    Eigen::VectorXd theta_bias() const { return b.head(p); }
};

namespace detail {

inline void add_outer(Eigen::MatrixXd& K, const DyadData& d, int o, int u, double w)
{
    int p = d.p;
    int ro[2] = {p + d.a[o], p + d.b[o]}, ru[2] = {p + d.a[u], p + d.b[u]};
    for (int i : ro)
        for (int j : ru) K(i, j) += w;
    for (int c = 0; c < p; ++c) {
        for (int j : ru) K(c, j) += w * d.x(o, c);
        for (int i : ro) K(i, c) += w * d.x(u, c);
        for (int e = 0; e < p; ++e) K(c, e) += w * d.x(o, c) * d.x(u, e);
    }
}

inline void add_vec(Eigen::VectorXd& v, const DyadData& d, int o, double w)
{
    v(d.p + d.a[o]) += w;
    v(d.p + d.b[o]) += w;
    for (int c = 0; c < d.p; ++c) v(c) += w * d.x(o, c);
}

} // namespace detail

// rho is the reciprocity correlation of the shocks (directed probit); it
// enters through the covariance of the scores of G_ij and G_ji.
inline Expansion expand(const Network& g, const DyadCovariates& cov, const JmlFit& fit, double rho = 0.0,
                        bool indices_only = false)
{
    Expansion e;
    e.d = fit_data(g, cov, fit);
    const auto& d = e.d;
    e.family = fit.family;
    e.rho = d.directed ? rho : 0.0;
    e.p = d.p;
    e.n = d.n;
    e.theta = fit.theta;
    e.A = fit.kept_A();
    int m = e.p + e.n, N = d.obs();
    Eigen::VectorXd xb = detail::linear_index(d, e.theta);
    e.z.resize(N);
    e.t.resize(N);
    for (int o = 0; o < N; ++o) {
        e.z(o) = xb(o) + e.A(d.a[o]) + e.A(d.b[o]);
        e.t[o] = link_terms(e.z(o), e.family);
    }
    e.joint = Eigen::VectorXd::Zero(N);
    e.covar = Eigen::VectorXd::Zero(N);
    if (d.directed) {
        for (int o = 0; o < N; o += 2) {
            double s = e.rho == 0.0 ? e.t[o].p * e.t[o + 1].p : bvn_cdf(e.z(o), e.z(o + 1), e.rho);
            e.joint(o) = e.joint(o + 1) = s;
            e.covar(o) = e.covar(o + 1) = s - e.t[o].p * e.t[o + 1].p;
        }
    }
    if (indices_only) return e;

    e.info = Eigen::MatrixXd::Zero(m, m);
    for (int o = 0; o < N; ++o) detail::add_outer(e.info, d, o, o, e.t[o].omega);
    Eigen::LLT<Eigen::MatrixXd> llt(e.info);
    if (llt.info() != Eigen::Success) throw SingularityError("information matrix is not positive definite");
    e.info_inv = llt.solve(Eigen::MatrixXd::Identity(m, m));

    e.M = e.info_inv;
    bool recip = d.directed && e.rho != 0.0;
    if (recip) {
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m);
        for (int o = 0; o < N; ++o) {
            int r = o ^ 1;
            detail::add_outer(K, d, o, r, e.t[o].h * e.t[r].h * e.covar(o));
        }
        e.M.noalias() += e.info_inv * K * e.info_inv;
    }

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
    for (int o = 0; o < N; ++o) {
        const auto& t = e.t[o];
        double qoo = e.form(e.info_inv, o, o);
        double moo = recip ? e.form(e.M, o, o) : qoo;
        double gterm = qoo * t.dh * t.dp + 0.5 * (-2.0 * t.dh * t.dp - t.h * t.d2p) * moo;
        if (recip) {
            int r = o ^ 1;
            gterm += e.form(e.info_inv, o, r) * t.dh * e.t[r].h * e.covar(o);
        }
        detail::add_vec(acc, d, o, gterm);
    }
    e.b = e.info_inv * acc;
    return e;
}

} // namespace netform

#endif

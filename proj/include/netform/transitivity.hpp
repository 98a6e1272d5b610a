#ifndef NETFORM_TRANSITIVITY_HPP
#define NETFORM_TRANSITIVITY_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bias.hpp"
#include "jml.hpp"
#include "network.hpp"

namespace netform {

// Sum over the triangle set of the product of link probabilities. Undirected:
// unordered triples. Directed: ordered (i,j,k) with links ij, ik, jk.
inline double expected_triangles(const Eigen::MatrixXd& P, bool directed)
{
    Eigen::MatrixXd Q = P;
    Q.diagonal().setZero();
    if (!directed) return (Q * Q).cwiseProduct(Q).sum() / 6.0;
    return (Q * Q.transpose()).cwiseProduct(Q).sum();
}

// (S_n - sum over triangles of prod p_e) / n^3
inline double excess_transitivity(const Network& g, const Eigen::MatrixXd& P)
{
    if (P.rows() != g.size() || P.cols() != g.size()) throw DomainError("probability field size does not match network");
    double n = g.size();
    return (double(count_transitive_triangles(g)) - expected_triangles(P, g.directed())) / (n * n * n);
}

// link probabilities of a fitted model on its kept players
inline Eigen::MatrixXd fitted_probabilities(const Expansion& e)
{
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(e.n, e.n);
    for (int o = 0; o < e.d.obs(); ++o) {
        P(e.d.a[o], e.d.b[o]) = e.t[o].p;
        if (!e.d.directed) P(e.d.b[o], e.d.a[o]) = e.t[o].p;
    }
    return P;
}

inline Network induced_subnetwork(const Network& g, const std::vector<int>& keep)
{
    Network s(int(keep.size()), g.directed());
    for (std::size_t u = 0; u < keep.size(); ++u)
        for (std::size_t v = 0; v < keep.size(); ++v)
            if (u != v && g.has_link(keep[u], keep[v])) s.set_link(int(u), int(v));
    return s;
}

struct TransitivityReport {
    long long s_n = 0;
    std::optional<double> e_n_oracle;
    double e_hat = 0;          // T / n^3
    double bias_E = 0;         // heterogeneity part, scaled like n * e_hat
    Eigen::VectorXd bias_theta;  // one entry per component of theta
    double variance = 0;
    double z_stat = 0;
    Eigen::VectorXd corr;
    int n = 0;

    double bias_beta() const { return bias_theta.size() ? bias_theta.sum() : 0.0; }
};

// Projection residual of a per-observation vector v off the span of the
// heterogeneity indicators, in the omega-weighted inner product.
inline Eigen::VectorXd project_off_A(const Expansion& e, const Eigen::VectorXd& v)
{
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(e.n);
    for (int o = 0; o < e.d.obs(); ++o) {
        double w = e.t[o].omega * v(o);
        rhs(e.d.a[o]) += w;
        rhs(e.d.b[o]) += w;
    }
    Eigen::VectorXd c = e.info.bottomRightCorner(e.n, e.n).llt().solve(rhs);
    Eigen::VectorXd r = v;
    for (int o = 0; o < e.d.obs(); ++o) r(o) -= c(e.d.a[o]) + c(e.d.b[o]);
    return r;
}

// Variance of sum_i sum_{j<k} e_ij e_ik p_jk (two centered links sharing
// vertex i) after the fit absorbs degree deviations: for each i only the part
// of p_jk that is not additive in (j,k) survives, so p_jk is reduced to its
// weighted two-way residual with weights p_ij(1-p_ij).
inline double star_variance(const Eigen::MatrixXd& P)
{
    int n = int(P.rows());
    Eigen::MatrixXd Q = P.array() * (1.0 - P.array());
    Q.diagonal().setZero();
    double total = 0.0;
    Eigen::VectorXd u(n), w(n);
    for (int i = 0; i < n; ++i) {
        w = Q.row(i).transpose();
        double wsum = w.sum();
        // normal equations (diag(S - 2w) + 1 w') u = P w, solved by Sherman-Morrison
        Eigen::VectorXd rhs = P * w;
        Eigen::VectorXd dinv = (wsum - 2.0 * w.array()).inverse().matrix();
        dinv(i) = 0.0;
        rhs(i) = 0.0;
        Eigen::VectorXd y = dinv.cwiseProduct(rhs);
        double denom = 1.0 + w.dot(dinv);
        u = y - dinv * (w.dot(y) / denom);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            for (int k = j + 1; k < n; ++k) {
                if (k == i) continue;
                double r = P(j, k) - u(j) - u(k);
                total += w(j) * w(k) * r * r;
            }
        }
    }
    return total;
}

inline TransitivityReport transitivity_test(const Network& g, const DyadCovariates& cov, const JmlFit& fit,
                                            double rho = 0.0, const Eigen::MatrixXd* true_p = nullptr)
{
    if (!fit.converged) throw DomainError("transitivity test needs a converged fit");
    Expansion e = expand(g, cov, fit, rho);
    const auto& d = e.d;
    int n = e.n, p = e.p, N = d.obs();
    auto keep = fit.kept();
    Network sub = induced_subnetwork(g, keep);
    Eigen::MatrixXd P = fitted_probabilities(e);

    TransitivityReport rep;
    rep.n = n;
    rep.s_n = count_transitive_triangles(sub);
    double T = double(rep.s_n) - expected_triangles(P, d.directed);
    double nn = n;
    rep.e_hat = T / (nn * nn * nn);
    if (true_p) rep.e_n_oracle = excess_transitivity(g, *true_p);

    // chi*_o: expected triangles through o given G_o = 1
    Eigen::MatrixXd C = d.directed ? Eigen::MatrixXd(P * P.transpose() + P * P + P.transpose() * P)
                                   : Eigen::MatrixXd(P * P);
    Eigen::VectorXd chistar(N), chi(N);
    for (int o = 0; o < N; ++o) {
        chistar(o) = C(d.a[o], d.b[o]);
        chi(o) = chistar(o) / (nn * e.t[o].h);
    }
    Eigen::VectorXd chit = project_off_A(e, chi);
    Eigen::MatrixXd Xt(N, p);
    for (int c = 0; c < p; ++c) Xt.col(c) = project_off_A(e, d.x.col(c));
    Eigen::VectorXd V = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p, p);
    for (int o = 0; o < N; ++o) {
        double w = e.t[o].omega;
        V += w * chit(o) * Xt.row(o).transpose();
        W += w * Xt.row(o).transpose() * Xt.row(o);
    }
    Eigen::VectorXd resid = chit;
    if (p > 0) {
        double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(W / (nn * nn)).eigenvalues()(0);
        if (lmin < 1e-10) throw IllConditioned("covariate residual matrix is ill-conditioned", lmin);
        resid -= Xt * W.ldlt().solve(V);
    }
    double v = 0.0;
    for (int o = 0; o < N; ++o) {
        v += e.t[o].omega * resid(o) * resid(o);
        if (d.directed) {
            int r = o ^ 1;
            v += e.t[o].h * e.t[r].h * e.covar(o) * resid(o) * resid(r);
        }
    }
    // bias of sum prod p-hat: gradient term, own curvature, cross-link curvature
    Eigen::VectorXd gradA = Eigen::VectorXd::Zero(n);
    double curv = 0.0;
    for (int o = 0; o < N; ++o) {
        double w = chistar(o) * e.t[o].dp;
        gradA(d.a[o]) += w;
        gradA(d.b[o]) += w;
        curv += 0.5 * chistar(o) * e.t[o].d2p * e.form(e.M, o, o);
    }
    // observation index of each ordered pair
    std::vector<int> idx(std::size_t(n) * n, -1);
    for (int o = 0; o < N; ++o) {
        idx[std::size_t(d.a[o]) * n + d.b[o]] = o;
        if (!d.directed) idx[std::size_t(d.b[o]) * n + d.a[o]] = o;
    }
    // variance of the product of three centered links in the triangle sum;
    // lower order asymptotically but not negligible in samples
    double v_high = 0.0;
    auto cross = [&](int e1, int e2, int e3) {
        const auto &t1 = e.t[e1], &t2 = e.t[e2], &t3 = e.t[e3];
        v_high += t1.p * t1.q * t2.p * t2.q * t3.p * t3.q;
        return t1.dp * t2.dp * t3.p * e.form(e.M, e1, e2) + t1.dp * t3.dp * t2.p * e.form(e.M, e1, e3) +
               t2.dp * t3.dp * t1.p * e.form(e.M, e2, e3);
    };
    for (int i = 0; i < n; ++i)
        for (int j = d.directed ? 0 : i + 1; j < n; ++j) {
            if (i == j) continue;
            int eij = idx[std::size_t(i) * n + j];
            for (int k = d.directed ? 0 : j + 1; k < n; ++k) {
                if (k == i || k == j) continue;
                curv += cross(eij, idx[std::size_t(i) * n + k], idx[std::size_t(j) * n + k]);
            }
        }
    if (!d.directed) v_high += star_variance(P);
    Eigen::VectorXd bA = e.b.tail(n);
    if (p > 0) bA += e.info.bottomRightCorner(n, n).llt().solve(e.info.bottomLeftCorner(n, p) * e.b.head(p));
    double bias_E_raw = gradA.dot(bA) + curv;
    rep.bias_theta.resize(p);
    for (int c = 0; c < p; ++c) rep.bias_theta(c) = nn * V(c) * e.b(c) / (nn * nn);
    rep.bias_E = bias_E_raw / (nn * nn);
    rep.variance = v / (nn * nn) + v_high / (nn * nn * nn * nn);
    rep.z_stat = (T / (nn * nn) + rep.bias_E + rep.bias_beta()) / std::sqrt(rep.variance);

    rep.corr = Eigen::VectorXd::Zero(n);
    if (d.directed) {
        Eigen::VectorXd num = Eigen::VectorXd::Zero(n), out = Eigen::VectorXd::Zero(n), in = Eigen::VectorXd::Zero(n);
        for (int o = 0; o < N; ++o) {
            int r = o ^ 1;
            double p1o = e.t[o].p * e.t[o].q, p1r = e.t[r].p * e.t[r].q;
            double rt = e.covar(o) / std::sqrt(p1o * p1r);
            num(d.a[o]) += rt * std::sqrt(e.t[o].omega * e.t[r].omega);
            out(d.a[o]) += e.t[o].omega;
            in(d.b[o]) += e.t[o].omega;
        }
        for (int i = 0; i < n; ++i) rep.corr(i) = num(i) / std::sqrt(out(i) * in(i));
    }
    return rep;
}

struct ReciprocityFit {
    double rho_hat = 0;
    double loglik = 0;
    bool at_boundary = false;
    int iters = 0;
};

namespace detail {

struct DyadPair {
    double z1, z2;
    bool both;
};

inline std::vector<DyadPair> reciprocity_pairs(const Expansion& e)
{
    std::vector<DyadPair> v;
    v.reserve(e.d.obs() / 2);
    for (int o = 0; o < e.d.obs(); o += 2) v.push_back({e.z(o), e.z(o + 1), e.d.y(o) > 0 && e.d.y(o + 1) > 0});
    return v;
}

inline double clamp_prob(double s) { return std::clamp(s, 1e-300, 1.0 - 1e-16); }

// objective, score and expected curvature in rho
inline void rho_terms(const std::vector<DyadPair>& pairs, double rho, double* obj, double* score, double* info)
{
    double f = 0, sc = 0, in = 0;
    for (const auto& q : pairs) {
        double s = clamp_prob(bvn_cdf(q.z1, q.z2, rho));
        if (obj) f += q.both ? std::log(s) : std::log1p(-s);
        double phi2 = bvn_pdf(q.z1, q.z2, rho);
        double J = phi2 / (s * (1.0 - s));
        sc += J * ((q.both ? 1.0 : 0.0) - s);
        in += J * phi2;
    }
    if (obj) *obj = f;
    if (score) *score = sc;
    if (info) *info = in;
}

} // namespace detail

inline double reciprocity_objective(const Expansion& e, double rho)
{
    double f;
    detail::rho_terms(detail::reciprocity_pairs(e), rho, &f, nullptr, nullptr);
    return f;
}

// Maximizes the reciprocated-link pseudo likelihood over [-1+c, 1-c] by
// safeguarded Fisher scoring on the score.
inline ReciprocityFit rho_estimate(const Expansion& e, double c_tilde = 0.01)
{
    if (!e.d.directed) throw DomainError("reciprocity needs a directed network");
    if (e.family != Family::probit) throw DomainError("reciprocity correlation is defined for probit shocks");
    if (!(c_tilde > 0 && c_tilde < 0.5)) throw DomainError("c_tilde must lie in (0, 1/2)");
    auto pairs = detail::reciprocity_pairs(e);
    double lo = -1.0 + c_tilde, hi = 1.0 - c_tilde;
    double L = lo, U = hi, r = 0.0;
    bool lo_seen = false, hi_seen = false;
    ReciprocityFit fit;
    for (int it = 1; it <= 200; ++it) {
        double sc, in;
        detail::rho_terms(pairs, r, nullptr, &sc, &in);
        fit.iters = it;
        if (r == hi) hi_seen = true;
        if (r == lo) lo_seen = true;
        if (sc > 0) {
            L = r;
            if (r == hi) {
                fit.at_boundary = true;
                break;
            }
        } else {
            U = r;
            if (r == lo && sc < 0) {
                fit.at_boundary = true;
                break;
            }
        }
        double next = r + sc / std::max(in, 1e-300);
        if (std::abs(next - r) < 1e-12) {
            r = std::clamp(next, lo, hi);
            break;
        }
        if (next >= U) next = (U == hi && !hi_seen) ? hi : 0.5 * (r + U);
        if (next <= L) next = (L == lo && !lo_seen) ? lo : 0.5 * (r + L);
        if (U - L < 1e-13) {
            r = 0.5 * (U + L);
            break;
        }
        r = next;
    }
    fit.rho_hat = r;
    detail::rho_terms(pairs, r, &fit.loglik, nullptr, nullptr);
    return fit;
}

// First-order bias of rho-hat induced by estimating (theta, A). The expansion
// must be evaluated at rho-hat.
inline double rho_bias(const Expansion& e, double rho)
{
    const auto& d = e.d;
    double sig2 = 1.0 - rho * rho, sig = std::sqrt(sig2);
    double num = 0.0, den = 0.0;
    for (int o = 0; o < d.obs(); o += 2) {
        int r = o + 1;
        double z1 = e.z(o), z2 = e.z(r);
        double s = detail::clamp_prob(bvn_cdf(z1, z2, rho));
        double phi2 = bvn_pdf(z1, z2, rho);
        double s1 = norm_pdf(z1) * norm_cdf((z2 - rho * z1) / sig);
        double s2 = norm_pdf(z2) * norm_cdf((z1 - rho * z2) / sig);
        double s11 = -z1 * s1 - rho * phi2, s22 = -z2 * s2 - rho * phi2, s12 = phi2;
        double v = s * (1.0 - s);
        double J = phi2 / v;
        double J1 = (-phi2 * (z1 - rho * z2) / sig2 - J * (1.0 - 2.0 * s) * s1) / v;
        double J2 = (-phi2 * (z2 - rho * z1) / sig2 - J * (1.0 - 2.0 * s) * s2) / v;
        const auto &t1 = e.t[o], &t2 = e.t[r];
        double q11 = e.form(e.info_inv, o, o), q12 = e.form(e.info_inv, o, r), q22 = e.form(e.info_inv, r, r);
        double m11 = e.form(e.M, o, o), m12 = e.form(e.M, o, r), m22 = e.form(e.M, r, r);
        double grad = -J * (s1 * e.dot(e.b, o) + s2 * e.dot(e.b, r));
        double covt = s * (J1 * (q11 * t1.h * t1.q + q12 * t2.h * t2.q) + J2 * (q12 * t1.h * t1.q + q22 * t2.h * t2.q));
        double tr = 0.5 * (-2.0 * (J1 * s1 * m11 + (J1 * s2 + J2 * s1) * m12 + J2 * s2 * m22) -
                           J * (s11 * m11 + 2.0 * s12 * m12 + s22 * m22));
        num += grad + covt + tr;
        den += J * phi2;
    }
    return num / den;
}

inline ReciprocityFit rho_estimate(const Network& g, const DyadCovariates& cov, const JmlFit& fit,
                                   double c_tilde = 0.01)
{
    if (!g.directed()) throw DomainError("reciprocity needs a directed network");
    return rho_estimate(expand(g, cov, fit, 0.0, true), c_tilde);
}

struct BiasCorrected {
    Eigen::VectorXd theta_bc;
    Eigen::VectorXd theta_correction;
    std::optional<double> rho_bc;
    std::optional<double> rho_correction;
};

inline BiasCorrected bias_corrected_estimates(const JmlFit& fit, const Expansion& e,
                                              const std::optional<ReciprocityFit>& rho_fit = std::nullopt)
{
    BiasCorrected out;
    out.theta_correction = e.b.head(e.p);
    out.theta_bc = fit.theta - out.theta_correction;
    if (rho_fit) {
        double c = rho_bias(e, rho_fit->rho_hat);
        out.rho_correction = c;
        out.rho_bc = rho_fit->rho_hat - c;
    }
    return out;
}

} // namespace netform

#endif

#ifndef NETFORM_JML_HPP
#define NETFORM_JML_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "distributions.hpp"
#include "formation.hpp"
#include "network.hpp"

namespace netform {

// Observations of the dyadic model restricted to a set of kept players.
// Undirected: one observation per unordered pair. Directed: both ordered
// pairs, stored adjacently so rev[o] = o ^ 1.
struct DyadData {
    int n = 0;                  // kept players
    std::vector<int> players;   // original index of each kept player
    bool directed = false;
    int p = 0;                  // columns of x
    std::vector<int> a, b;      // endpoints (kept indices), a is the sender
    Eigen::VectorXd y;
    Eigen::MatrixXd x;          // obs x p
    Eigen::VectorXd offset;     // fixed part of the index (fixed delta term)
    std::vector<int> degree;    // sum of y over observations touching a player
    std::vector<int> count;     // observations touching a player

    int obs() const { return int(a.size()); }
    int rev(int o) const { return directed ? (o ^ 1) : -1; }
};

inline DyadData build_dyad_data(const Network& g, const DyadCovariates& cov, bool with_delta, double fixed_delta,
                                const std::vector<int>& keep)
{
    DyadData d;
    d.n = int(keep.size());
    d.players = keep;
    d.directed = g.directed();
    d.p = cov.dim() + (with_delta ? 1 : 0);
    std::size_t m = d.directed ? std::size_t(d.n) * (d.n - 1) : std::size_t(d.n) * (d.n - 1) / 2;
    d.a.reserve(m);
    d.b.reserve(m);
    d.y.resize(Eigen::Index(m));
    d.x.resize(Eigen::Index(m), d.p);
    d.offset = Eigen::VectorXd::Zero(Eigen::Index(m));
    d.degree.assign(d.n, 0);
    d.count.assign(d.n, 0);
    int o = 0;
    auto push = [&](int u, int v) {
        int gu = keep[u], gv = keep[v];
        d.a.push_back(u);
        d.b.push_back(v);
        d.y(o) = g.has_link(gu, gv) ? 1.0 : 0.0;
        for (int c = 0; c < cov.dim(); ++c) d.x(o, c) = cov(c, gu, gv);
        if (with_delta || fixed_delta != 0.0) {
            double t = g.common_neighbors(gu, gv);
            if (with_delta)
                d.x(o, d.p - 1) = t;
            else
                d.offset(o) = fixed_delta * t;
        }
        d.degree[u] += int(d.y(o));
        d.degree[v] += int(d.y(o));
        ++d.count[u];
        ++d.count[v];
        ++o;
    };
    for (int u = 0; u < d.n; ++u)
        for (int v = u + 1; v < d.n; ++v) {
            push(u, v);
            if (d.directed) push(v, u);
        }
    return d;
}

// players whose degree is 0 or saturated among the candidates, iterated
// because dropping one player can saturate another
inline std::vector<int> degenerate_players(const Network& g, std::vector<int>& keep)
{
    std::vector<int> dropped;
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<int> next;
        for (int i : keep) {
            int deg = 0, cnt = 0;
            for (int j : keep) {
                if (j == i) continue;
                deg += g.has_link(i, j);
                ++cnt;
                if (g.directed()) {
                    deg += g.has_link(j, i);
                    ++cnt;
                }
            }
            if (deg == 0 || deg == cnt) {
                dropped.push_back(i);
                changed = true;
            } else {
                next.push_back(i);
            }
        }
        keep = next;
    }
    std::sort(dropped.begin(), dropped.end());
    return dropped;
}

struct JmlSettings {
    Family family = Family::logistic;
    bool estimate_delta = true;
    double fixed_delta = 0.0;      // used when delta is not estimated
    double inner_tol = 1e-10;
    int inner_max_iters = 2000;
    bool picard = true;            // logistic only; probit always uses Newton
    double outer_tol = 1e-8;
    int outer_max_iters = 100;
    double a_bound = 20.0;
    double theta_bound = 20.0;
    bool drop_degenerate = false;
};

struct JmlFit {
    Eigen::VectorXd theta;     // beta, then delta when estimated
    Eigen::VectorXd A;         // all players; NaN for dropped ones
    double loglik = 0;
    int inner_iters = 0;
    int outer_iters = 0;
    bool converged = false;
    double gradient_norm = 0;
    std::vector<int> dropped;
    std::vector<int> boundary_hits;
    Family family = Family::logistic;
    bool directed = false;
    bool estimate_delta = true;
    double fixed_delta = 0.0;
    int beta_dim = 0;

    Eigen::VectorXd beta() const { return theta.head(beta_dim); }
    double delta() const { return estimate_delta ? theta(beta_dim) : fixed_delta; }
    std::vector<int> kept() const
    {
        std::vector<int> k;
        for (int i = 0; i < A.size(); ++i)
            if (!std::isnan(A(i))) k.push_back(i);
        return k;
    }
    Eigen::VectorXd kept_A() const
    {
        auto k = kept();
        Eigen::VectorXd out(k.size());
        for (std::size_t i = 0; i < k.size(); ++i) out(i) = A(k[i]);
        return out;
    }
};

namespace detail {

inline Eigen::VectorXd linear_index(const DyadData& d, const Eigen::VectorXd& theta)
{
    Eigen::VectorXd xb = d.offset;
    if (d.p > 0) xb += d.x * theta;
    return xb;
}

inline double dyad_loglik(const DyadData& d, const Eigen::VectorXd& xb, const Eigen::VectorXd& A, Family f)
{
    double ll = 0.0;
    for (int o = 0; o < d.obs(); ++o) {
        double z = xb(o) + A(d.a[o]) + A(d.b[o]);
        ll += d.y(o) > 0 ? link_logcdf(z, f) : link_logccdf(z, f);
    }
    return ll;
}

// score in A, observed negative Hessian in A
inline void a_derivatives(const DyadData& d, const Eigen::VectorXd& xb, const Eigen::VectorXd& A, Family f,
                          Eigen::VectorXd& grad, Eigen::MatrixXd* hess)
{
    grad.setZero(d.n);
    if (hess) hess->setZero(d.n, d.n);
    for (int o = 0; o < d.obs(); ++o) {
        double z = xb(o) + A(d.a[o]) + A(d.b[o]);
        auto t = link_terms(z, f);
        double r = d.y(o) - t.p;
        double s = t.h * r;
        grad(d.a[o]) += s;
        grad(d.b[o]) += s;
        if (hess) {
            double w = t.omega - t.dh * r;
            (*hess)(d.a[o], d.a[o]) += w;
            (*hess)(d.b[o], d.b[o]) += w;
            (*hess)(d.a[o], d.b[o]) += w;
            (*hess)(d.b[o], d.a[o]) += w;
        }
    }
}

// gradient ignoring components pinned at the box and pushing outward
inline double projected_norm(const Eigen::VectorXd& g, const Eigen::VectorXd& A, double bound)
{
    double m = 0.0;
    for (int i = 0; i < g.size(); ++i) {
        if (A(i) >= bound && g(i) > 0) continue;
        if (A(i) <= -bound && g(i) < 0) continue;
        m = std::max(m, std::abs(g(i)));
    }
    return m;
}

struct InnerResult {
    Eigen::VectorXd A;
    int iters = 0;
    bool converged = false;
};

// phi_i(A) = A_i + ln G_i+ - ln sum_j p_ij, the logistic fixed-point map
inline InnerResult picard_logistic(const DyadData& d, const Eigen::VectorXd& xb, Eigen::VectorXd A, double tol,
                                   int max_iters, double bound)
{
    InnerResult res;
    Eigen::VectorXd sum(d.n), logdeg(d.n);
    for (int i = 0; i < d.n; ++i) logdeg(i) = std::log(double(d.degree[i]));
    double ll = dyad_loglik(d, xb, A, Family::logistic);
    double damping = 1.0;
    for (int it = 1; it <= max_iters; ++it) {
        sum.setZero();
        for (int o = 0; o < d.obs(); ++o) {
            double p = logistic_cdf(xb(o) + A(d.a[o]) + A(d.b[o]));
            sum(d.a[o]) += p;
            sum(d.b[o]) += p;
        }
        Eigen::VectorXd step = logdeg - sum.array().log().matrix();
        res.iters = it;
        Eigen::VectorXd probe = A;
        for (int i = 0; i < d.n; ++i) probe(i) = std::clamp(A(i) + step(i), -bound, bound);
        if ((probe - A).cwiseAbs().maxCoeff() <= tol) {
            res.A = probe;
            res.converged = true;
            return res;
        }
        // monotonicity guard: shrink the sweep until the likelihood does not fall
        Eigen::VectorXd next;
        double nll = -std::numeric_limits<double>::infinity();
        double t = damping;
        for (int k = 0; k < 30; ++k) {
            next = A;
            for (int i = 0; i < d.n; ++i) next(i) = std::clamp(A(i) + t * step(i), -bound, bound);
            nll = dyad_loglik(d, xb, next, Family::logistic);
            if (nll >= ll - 1e-12 * std::abs(ll)) break;
            t *= 0.5;
        }
        if (t < damping) damping = std::max(t, 0.5 * damping);
        A = next;
        ll = nll;
    }
    res.A = A;
    return res;
}

inline InnerResult newton_a(const DyadData& d, const Eigen::VectorXd& xb, Eigen::VectorXd A, Family f, double tol,
                            int max_iters, double bound)
{
    InnerResult res;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    double ll = dyad_loglik(d, xb, A, f);
    for (int it = 1; it <= max_iters; ++it) {
        a_derivatives(d, xb, A, f, grad, &hess);
        res.iters = it;
        if (projected_norm(grad, A, bound) <= tol) {
            res.A = A;
            res.converged = true;
            return res;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(hess);
        Eigen::VectorXd step;
        if (llt.info() == Eigen::Success) {
            step = llt.solve(grad);
        } else {
            Eigen::MatrixXd h2 = hess;
            h2.diagonal().array() += 1e-8 + hess.diagonal().cwiseAbs().maxCoeff() * 1e-10;
            step = h2.ldlt().solve(grad);
        }
        double t = 1.0;
        Eigen::VectorXd next = A;
        double nll = ll;
        bool moved = false;
        for (int k = 0; k < 40; ++k) {
            for (int i = 0; i < d.n; ++i) next(i) = std::clamp(A(i) + t * step(i), -bound, bound);
            nll = dyad_loglik(d, xb, next, f);
            if (nll >= ll - 1e-13 * std::abs(ll)) {
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) {
            res.A = A;
            res.converged = projected_norm(grad, A, bound) <= std::max(tol, 1e-7);
            return res;
        }
        A = next;
        ll = nll;
    }
    res.A = A;
    return res;
}

inline Eigen::VectorXd initial_A(const DyadData& d, const Eigen::VectorXd& xb, Family f)
{
    Eigen::VectorXd A(d.n);
    double mean_xb = d.obs() > 0 ? xb.mean() : 0.0;
    for (int i = 0; i < d.n; ++i) {
        double pbar = std::clamp(double(d.degree[i]) / d.count[i], 1e-6, 1 - 1e-6);
        A(i) = 0.5 * (link_quantile(pbar, f) - mean_xb);
    }
    return A;
}

inline InnerResult solve_inner(const DyadData& d, const Eigen::VectorXd& xb, const Eigen::VectorXd& A0,
                               const JmlSettings& s)
{
    if (s.family == Family::logistic && s.picard) {
        auto r = picard_logistic(d, xb, A0, s.inner_tol, s.inner_max_iters, s.a_bound);
        if (r.converged) return r;
        auto r2 = newton_a(d, xb, r.A, s.family, s.inner_tol, 200, s.a_bound);
        r2.iters += r.iters;
        return r2;
    }
    return newton_a(d, xb, A0, s.family, s.inner_tol, std::min(s.inner_max_iters, 500), s.a_bound);
}

inline std::string player_list(const std::vector<int>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size() && i < 20; ++i) s += (i ? "," : "") + std::to_string(v[i] + 1);
    if (v.size() > 20) s += ",...";
    return s;
}

inline std::vector<int> checked_players(const Network& g, const JmlSettings& s, std::vector<int>& dropped)
{
    std::vector<int> keep(g.size());
    for (int i = 0; i < g.size(); ++i) keep[i] = i;
    std::vector<int> bad = degenerate_players(g, keep);
    if (!bad.empty() && !s.drop_degenerate)
        throw Nonexistence("heterogeneity MLE does not exist for players " + player_list(bad) +
                               " (degree 0 or saturated)",
                           bad);
    dropped = bad;
    if (keep.size() < 3) throw Nonexistence("fewer than three players with interior degree", bad);
    return keep;
}

} // namespace detail

// A-hat(theta): the heterogeneity vector solving the degree equations at theta
inline Eigen::VectorXd concentrate_A(const Network& g, const DyadCovariates& cov, const Eigen::VectorXd& theta,
                                     const JmlSettings& s = {})
{
    cov.validate(g.size());
    std::vector<int> keep(g.size());
    for (int i = 0; i < g.size(); ++i) keep[i] = i;
    auto copy = keep;
    auto bad = degenerate_players(g, copy);
    if (!bad.empty())
        throw Nonexistence("heterogeneity MLE does not exist for players " + detail::player_list(bad), bad);
    auto d = build_dyad_data(g, cov, s.estimate_delta, s.fixed_delta, keep);
    if (theta.size() != d.p) throw DomainError("theta has wrong dimension");
    Eigen::VectorXd xb = detail::linear_index(d, theta);
    auto r = detail::solve_inner(d, xb, detail::initial_A(d, xb, s.family), s);
    if (!r.converged) throw NoConvergence("heterogeneity fixed point did not converge", r.iters);
    return r.A;
}

inline DyadData fit_data(const Network& g, const DyadCovariates& cov, const JmlFit& fit)
{
    return build_dyad_data(g, cov, fit.estimate_delta, fit.fixed_delta, fit.kept());
}

namespace detail {

// One sweep over the observations: loglik, gradient and observed negative
// Hessian in (theta, A), theta first.
inline double joint_pass(const DyadData& d, const Eigen::VectorXd& xb, const Eigen::VectorXd& A, Family f,
                         Eigen::VectorXd* grad, Eigen::MatrixXd* hess)
{
    int p = d.p, m = p + d.n;
    if (grad) grad->setZero(m);
    if (hess) hess->setZero(m, m);
    double ll = 0.0;
    for (int o = 0; o < d.obs(); ++o) {
        int ia = p + d.a[o], ib = p + d.b[o];
        double z = xb(o) + A(d.a[o]) + A(d.b[o]);
        if (!grad) {
            ll += d.y(o) > 0 ? link_logcdf(z, f) : link_logccdf(z, f);
            continue;
        }
        auto t = link_terms(z, f);
        double pr = d.y(o) > 0 ? t.p : t.q;
        ll += pr > 1e-300 ? std::log(pr) : (d.y(o) > 0 ? link_logcdf(z, f) : link_logccdf(z, f));
        double r = d.y(o) - t.p;
        double sc = t.h * r;
        for (int c = 0; c < p; ++c) (*grad)(c) += sc * d.x(o, c);
        (*grad)(ia) += sc;
        (*grad)(ib) += sc;
        if (hess) {
            double w = t.omega - t.dh * r;
            auto& H = *hess;
            for (int c = 0; c < p; ++c) {
                double wx = w * d.x(o, c);
                for (int e = 0; e <= c; ++e) H(c, e) += wx * d.x(o, e);
                H(ia, c) += wx;
                H(ib, c) += wx;
            }
            H(ia, ia) += w;
            H(ib, ib) += w;
            H(std::max(ia, ib), std::min(ia, ib)) += w;
        }
    }
    if (hess) hess->triangularView<Eigen::StrictlyUpper>() = hess->transpose();
    return ll;
}

// minimum eigenvalue of the profile (Schur complement) information in theta
inline double profile_min_eigen(const Eigen::MatrixXd& H, int p, double* scale)
{
    int n = int(H.rows()) - p;
    Eigen::LLT<Eigen::MatrixXd> llt(H.bottomRightCorner(n, n));
    if (llt.info() != Eigen::Success) throw IdentificationFailure("heterogeneity Hessian is not positive definite");
    Eigen::MatrixXd S = llt.solve(H.bottomLeftCorner(n, p));
    Eigen::MatrixXd Jp = H.topLeftCorner(p, p) - H.bottomLeftCorner(n, p).transpose() * S;
    Jp = 0.5 * (Jp + Jp.transpose());
    *scale = std::max(1.0, H.topLeftCorner(p, p).diagonal().cwiseAbs().maxCoeff());
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Jp).eigenvalues()(0);
}

} // namespace detail

// Joint maximum likelihood. The concentrated likelihood in theta is maximized
// by Newton steps in (theta, A) jointly, which at a stationary point coincide
// with the profile solution A = A-hat(theta).
inline JmlFit jml_estimate(const Network& g, const DyadCovariates& cov, const Eigen::VectorXd& theta_init,
                           const JmlSettings& s = {})
{
    cov.validate(g.size());
    JmlFit fit;
    fit.family = s.family;
    fit.directed = g.directed();
    fit.estimate_delta = s.estimate_delta;
    fit.fixed_delta = s.fixed_delta;
    fit.beta_dim = cov.dim();
    auto keep = detail::checked_players(g, s, fit.dropped);
    auto d = build_dyad_data(g, cov, s.estimate_delta, s.fixed_delta, keep);
    int p = d.p, n = d.n;
    if (theta_init.size() != p) throw DomainError("theta_init has wrong dimension");
    Eigen::VectorXd theta = theta_init.cwiseMax(-s.theta_bound).cwiseMin(s.theta_bound);

    Eigen::VectorXd xb = detail::linear_index(d, theta);
    Eigen::VectorXd A = detail::initial_A(d, xb, s.family);
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    double ll = detail::joint_pass(d, xb, A, s.family, &grad, &hess);
    bool id_checked = false;

    for (int it = 0; it < s.outer_max_iters; ++it) {
        fit.outer_iters = it;
        fit.inner_iters = it;
        double gth = p > 0 ? grad.head(p).cwiseAbs().maxCoeff() : 0.0;
        double gA = detail::projected_norm(grad.tail(n), A, s.a_bound);
        fit.gradient_norm = gth;
        if (p > 0 && !id_checked && (it >= 2 || gA < 1e-4)) {
            // flat profile likelihood in some direction of theta
            double scale;
            if (detail::profile_min_eigen(hess, p, &scale) <= 1e-9 * scale)
                throw IdentificationFailure("concentrated likelihood is flat in theta; covariates not identified");
            id_checked = true;
        }
        if (gth <= s.outer_tol && gA <= s.inner_tol) {
            fit.converged = true;
            break;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(hess);
        Eigen::VectorXd step;
        if (llt.info() == Eigen::Success) {
            step = llt.solve(grad);
        } else {
            Eigen::MatrixXd h2 = hess;
            h2.diagonal().array() += 1e-8 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
            step = h2.ldlt().solve(grad);
        }
        if (!step.allFinite()) throw IdentificationFailure("Newton system is singular; parameters not identified");
        double t = 1.0;
        bool accepted = false;
        for (int k = 0; k < 40; ++k) {
            Eigen::VectorXd th2 = (theta + t * step.head(p)).cwiseMax(-s.theta_bound).cwiseMin(s.theta_bound);
            Eigen::VectorXd A2 = (A + t * step.tail(n)).cwiseMax(-s.a_bound).cwiseMin(s.a_bound);
            Eigen::VectorXd xb2 = detail::linear_index(d, th2);
            double ll2 = detail::joint_pass(d, xb2, A2, s.family, nullptr, nullptr);
            if (ll2 >= ll - 1e-13 * std::abs(ll)) {
                theta = th2;
                A = A2;
                xb = xb2;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // no ascent left: stationary up to rounding
            fit.converged = gth <= 1e-6 && gA <= 1e-6;
            break;
        }
        ll = detail::joint_pass(d, xb, A, s.family, &grad, &hess);
    }
    if (p > 0 && !id_checked) {
        double scale;
        if (detail::profile_min_eigen(hess, p, &scale) <= 1e-9 * scale)
            throw IdentificationFailure("concentrated likelihood is flat in theta; covariates not identified");
    }
    if (!fit.converged) throw NoConvergence("likelihood search did not converge", fit.outer_iters);

    fit.theta = theta;
    fit.loglik = ll;
    fit.A = Eigen::VectorXd::Constant(g.size(), std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < n; ++i) {
        fit.A(keep[i]) = A(i);
        if (std::abs(A(i)) >= s.a_bound) fit.boundary_hits.push_back(keep[i]);
    }
    return fit;
}

// max_i |sum_j p_ij - G_i+| over kept players (the logistic score identity)
inline double degree_residual(const Network& g, const DyadCovariates& cov, const JmlFit& fit)
{
    auto d = fit_data(g, cov, fit);
    Eigen::VectorXd xb = detail::linear_index(d, fit.theta), A = fit.kept_A();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d.n);
    for (int o = 0; o < d.obs(); ++o) {
        double p = link_cdf(xb(o) + A(d.a[o]) + A(d.b[o]), fit.family);
        sum(d.a[o]) += p;
        sum(d.b[o]) += p;
    }
    double m = 0;
    for (int i = 0; i < d.n; ++i) m = std::max(m, std::abs(sum(i) - d.degree[i]));
    return m;
}

} // namespace netform

#endif

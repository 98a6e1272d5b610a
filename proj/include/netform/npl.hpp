#ifndef NETFORM_NPL_HPP
#define NETFORM_NPL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "distributions.hpp"
#include "error.hpp"
#include "game.hpp"
#include "network.hpp"

namespace netform {

// Players stacked block by block; interactions stay inside a block.
struct NplData {
    std::vector<Network> blocks;
    Eigen::MatrixXd X;         // n x q, no intercept (block effects absorb it)
    Eigen::MatrixXd actions;   // n x r, 0/1
    bool row_normalize = true;

    int players() const { return int(X.rows()); }
    int activities() const { return int(actions.cols()); }
    int covariates() const { return int(X.cols()); }
    int num_blocks() const { return int(blocks.size()); }

    std::vector<int> block_of() const
    {
        std::vector<int> b;
        for (int t = 0; t < num_blocks(); ++t) b.insert(b.end(), blocks[t].size(), t);
        return b;
    }

    void validate() const
    {
        int n = 0;
        for (const auto& g : blocks) n += g.size();
        if (n != players()) throw DomainError("block sizes do not add up to the covariate rows");
        if (actions.rows() != n) throw DomainError("action rows do not match players");
        if (activities() < 1) throw DomainError("need at least one activity");
        for (int i = 0; i < actions.rows(); ++i)
            for (int k = 0; k < actions.cols(); ++k)
                if (actions(i, k) != 0.0 && actions(i, k) != 1.0) throw DomainError("actions must be 0/1");
    }
};

inline Eigen::SparseMatrix<double> stacked_adjacency(const NplData& d)
{
    int n = d.players();
    std::vector<Eigen::Triplet<double>> trip;
    int off = 0;
    for (const auto& g : d.blocks) {
        auto G = block_adjacency(g, {}, d.row_normalize);
        for (int k = 0; k < G.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(G, k); it; ++it)
                trip.emplace_back(off + int(it.row()), off + int(it.col()), it.value());
        off += g.size();
    }
    Eigen::SparseMatrix<double> S(n, n);
    S.setFromTriplets(trip.begin(), trip.end());
    return S;
}

struct ReducedFormParams {
    Eigen::MatrixXd lambda_star;   // r x r, (l, k): effect of G psi_l on activity k
    Eigen::MatrixXd alpha_star;    // q x r
    Eigen::MatrixXd gamma_star;    // T x r

    // Gamma = [lambda; alpha; gamma], (r + q + T) x r
    Eigen::MatrixXd stacked() const
    {
        Eigen::MatrixXd G(lambda_star.rows() + alpha_star.rows() + gamma_star.rows(), lambda_star.cols());
        G << lambda_star, alpha_star, gamma_star;
        return G;
    }
    static ReducedFormParams from_stacked(const Eigen::MatrixXd& G, int r, int q)
    {
        int T = int(G.rows()) - r - q;
        return {G.topRows(r), G.middleRows(r, q), G.bottomRows(T)};
    }

    // W-tilde for every player: x_i' alpha + gamma of the player's block
    Eigen::MatrixXd w_tilde(const NplData& d) const
    {
        Eigen::MatrixXd W = d.X * alpha_star;
        auto b = d.block_of();
        for (int i = 0; i < d.players(); ++i) W.row(i) += gamma_star.row(b[i]);
        return W;
    }
};

struct StructuralParams {
    Eigen::MatrixXd Phi;      // r x r, zero diagonal
    Eigen::MatrixXd Lambda;   // r x r
    Eigen::MatrixXd alpha;    // q x r
    Eigen::MatrixXd gamma;    // T x r
};

// reduced form implied by structural parameters
inline ReducedFormParams implied_reduced_form(const StructuralParams& s)
{
    int r = int(s.Phi.rows());
    Eigen::MatrixXd ImP = Eigen::MatrixXd::Identity(r, r) - s.Phi;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ImP);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) throw SingularityError("I - Phi is singular");
    Eigen::MatrixXd inv = lu.inverse();
    return {s.Lambda * inv, s.alpha * inv, s.gamma * inv};
}

struct NplSettings {
    double tol = 1e-8;
    int max_iters = 500;
    std::optional<Eigen::MatrixXd> psi0;   // default: observed actions
    int drop_limit = 5;
    bool keep_iterates = true;
};

struct NplTrace {
    std::vector<Eigen::MatrixXd> psi;
    std::vector<Eigen::MatrixXd> xi;   // stacked Gamma per sweep
    std::vector<double> loglik;
    std::vector<double> step;
    bool converged = false;
    int iterations = 0;
};

struct NplNonContraction : NonContraction {
    NplNonContraction(const std::string& w, int sweeps, NplTrace t) : NonContraction(w, sweeps), trace(std::move(t)) {}
    NplTrace trace;
};

struct NplResult {
    ReducedFormParams params;
    Beliefs beliefs;
    NplTrace trace;
};

struct ProbitFit {
    Eigen::VectorXd coef;
    double loglik = 0;
    Eigen::VectorXd score;
};

// Probit MLE by Newton with backtracking
inline ProbitFit probit_mle(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, Eigen::VectorXd start,
                            double tol = 1e-10, int max_iters = 200)
{
    int n = int(Z.rows()), k = int(Z.cols());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) throw IdentificationFailure("pseudo-likelihood design [G psi, X, block dummies] is rank deficient");
    auto eval = [&](const Eigen::VectorXd& b, Eigen::VectorXd* g, Eigen::MatrixXd* H) {
        Eigen::VectorXd z = Z * b;
        double ll = 0;
        if (g) g->setZero(k);
        Eigen::VectorXd w(n);
        for (int i = 0; i < n; ++i) {
            ll += y(i) > 0 ? norm_logcdf(z(i)) : norm_logcdf(-z(i));
            if (g) {
                auto t = link_terms(z(i), Family::probit);
                double r = y(i) - t.p;
                *g += t.h * r * Z.row(i).transpose();
                w(i) = t.omega - t.dh * r;
            }
        }
        if (H) *H = Z.transpose() * w.asDiagonal() * Z;
        return ll;
    };
    ProbitFit f;
    Eigen::VectorXd b = start.size() == k ? start : Eigen::VectorXd::Zero(k);
    Eigen::VectorXd g;
    Eigen::MatrixXd H;
    double ll = eval(b, &g, &H);
    for (int it = 0; it < max_iters; ++it) {
        if (g.cwiseAbs().maxCoeff() <= tol) break;
        Eigen::VectorXd step = H.ldlt().solve(g);
        double t = 1.0;
        bool moved = false;
        for (int s = 0; s < 40; ++s) {
            Eigen::VectorXd nb = b + t * step;
            double nll = eval(nb, nullptr, nullptr);
            if (nll >= ll - 1e-12 * std::abs(ll)) {
                b = nb;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
        ll = eval(b, &g, &H);
    }
    f.coef = b;
    f.loglik = ll;
    f.score = g;
    return f;
}

// [G psi, X, block dummies]
inline Eigen::MatrixXd npl_design(const NplData& d, const Eigen::SparseMatrix<double>& G, const Eigen::MatrixXd& psi)
{
    int n = d.players(), r = d.activities(), q = d.covariates(), T = d.num_blocks();
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, r + q + T);
    Z.leftCols(r) = G * psi;
    Z.middleCols(r, q) = d.X;
    auto b = d.block_of();
    for (int i = 0; i < n; ++i) Z(i, r + q + b[i]) = 1.0;
    return Z;
}

// One Step 1 pass: per-activity probits given psi. Returns stacked Gamma.
inline Eigen::MatrixXd npl_step1(const NplData& d, const Eigen::MatrixXd& Z, const Eigen::MatrixXd& start,
                                 double* loglik, Eigen::VectorXd* max_score = nullptr)
{
    int r = d.activities();
    Eigen::MatrixXd Gam(Z.cols(), r);
    double ll = 0;
    if (max_score) max_score->resize(r);
    for (int k = 0; k < r; ++k) {
        Eigen::VectorXd s0 = start.size() ? Eigen::VectorXd(start.col(k)) : Eigen::VectorXd();
        auto f = probit_mle(Z, d.actions.col(k), s0);
        Gam.col(k) = f.coef;
        ll += f.loglik;
        if (max_score) (*max_score)(k) = f.score.cwiseAbs().maxCoeff();
    }
    if (loglik) *loglik = ll;
    return Gam;
}

inline NplResult npl_run(const NplData& d, const NplSettings& s = {})
{
    d.validate();
    int n = d.players(), r = d.activities(), q = d.covariates();
    auto G = stacked_adjacency(d);
    std::vector<Family> fam(r, Family::probit);
    Eigen::MatrixXd psi = s.psi0 ? *s.psi0 : d.actions;
    if (psi.rows() != n || psi.cols() != r) throw DomainError("psi0 has wrong shape");
    if (psi.minCoeff() < 0.0 || psi.maxCoeff() > 1.0) throw DomainError("psi0 entries must lie in [0,1]");

    NplResult res;
    auto& tr = res.trace;
    Eigen::MatrixXd Gam;
    double prev_step = std::numeric_limits<double>::infinity();
    int grows = 0;
    for (int it = 1; it <= s.max_iters; ++it) {
        Eigen::MatrixXd Z = npl_design(d, G, psi);
        double ll;
        Gam = npl_step1(d, Z, Gam, &ll);
        auto rf = ReducedFormParams::from_stacked(Gam, r, q);
        Eigen::MatrixXd next = belief_map(G, rf.lambda_star, rf.w_tilde(d), fam, psi);
        double step = (next - psi).cwiseAbs().maxCoeff();
        if (s.keep_iterates) {
            tr.psi.push_back(next);
            tr.xi.push_back(Gam);
        }
        tr.loglik.push_back(ll);
        tr.step.push_back(step);
        tr.iterations = it;
        psi = std::move(next);
        if (step <= s.tol) {
            tr.converged = true;
            break;
        }
        // the pseudo-likelihood can fall along a converging path, so divergence
        // is judged by the belief step failing to shrink
        grows = (it > 1 && step >= prev_step) ? grows + 1 : 0;
        if (grows >= s.drop_limit)
            throw NplNonContraction("pseudo-likelihood iterations are not contracting", it, tr);
        prev_step = step;
    }
    if (!tr.converged) throw NoConvergence("NPL did not converge", s.max_iters);
    // refit Step 1 at the fixed point so parameters and beliefs are consistent
    Eigen::MatrixXd Z = npl_design(d, G, psi);
    double ll;
    Gam = npl_step1(d, Z, Gam, &ll);
    res.params = ReducedFormParams::from_stacked(Gam, r, q);
    res.beliefs.psi = psi;
    return res;
}

struct IdentificationReport {
    std::vector<int> rank;         // rank(R_k [I; -Gamma])
    std::vector<int> order;        // h_k = rank(R_k)
    std::vector<bool> rank_ok, order_ok;
    std::optional<bool> instruments_full_rank;
    bool ok = true;
};

// Restrictions act on omega_k = [(I - Phi)_.k ; -(Lambda; alpha; gamma)_.k],
// i.e. omega_k = [I; -Gamma] c_k with c_k = (I - Phi)_.k.
inline IdentificationReport identification_check(const std::vector<Eigen::MatrixXd>& R, const Eigen::MatrixXd& Gamma,
                                                 const Eigen::MatrixXd* instruments = nullptr)
{
    int r = int(Gamma.cols()), m = int(Gamma.rows());
    if (int(R.size()) != r) throw DomainError("need one restriction matrix per activity");
    Eigen::MatrixXd S(r + m, r);
    S << Eigen::MatrixXd::Identity(r, r), -Gamma;
    IdentificationReport rep;
    for (int k = 0; k < r; ++k) {
        if (R[k].cols() != r + m) throw DomainError("restriction matrix has wrong width");
        auto rank_of = [](const Eigen::MatrixXd& A) {
            if (A.size() == 0) return 0;
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
            qr.setThreshold(1e-10);
            return int(qr.rank());
        };
        int h = rank_of(R[k]);
        int rk = rank_of(R[k] * S);
        rep.order.push_back(h);
        rep.rank.push_back(rk);
        rep.order_ok.push_back(h >= std::max(1, r - 1));
        rep.rank_ok.push_back(rk == r - 1);
        rep.ok = rep.ok && rep.order_ok.back() && rep.rank_ok.back();
    }
    if (instruments) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(*instruments);
        qr.setThreshold(1e-10);
        rep.instruments_full_rank = qr.rank() == instruments->cols();
        rep.ok = rep.ok && *rep.instruments_full_rank;
    }
    return rep;
}

// Minimum-distance recovery: for each activity k solve R_k [I; -Gamma] c = 0
// with c_k = 1 in least squares, then Phi_lk = -c_l and the structural column
// is Gamma c. Exact when the pattern is exactly identified.
inline StructuralParams structural_recovery(const ReducedFormParams& rf, const std::vector<Eigen::MatrixXd>& R)
{
    Eigen::MatrixXd Gamma = rf.stacked();
    int r = int(Gamma.cols()), q = int(rf.alpha_star.rows());
    auto rep = identification_check(R, Gamma);
    for (int k = 0; k < r; ++k)
        if (!rep.rank_ok[k] || !rep.order_ok[k])
            throw IdentificationFailure("structural parameters of activity " + std::to_string(k + 1) +
                                        " are not identified (rank " + std::to_string(rep.rank[k]) + ", need " +
                                        std::to_string(r - 1) + ")");
    Eigen::MatrixXd S(r + Gamma.rows(), r);
    S << Eigen::MatrixXd::Identity(r, r), -Gamma;
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(r, r);
    for (int k = 0; k < r; ++k) {
        Eigen::MatrixXd M = R[k] * S;
        Eigen::VectorXd c = Eigen::VectorXd::Zero(r);
        c(k) = 1.0;
        if (r > 1) {
            Eigen::MatrixXd A(M.rows(), r - 1);
            for (int l = 0, j = 0; l < r; ++l)
                if (l != k) A.col(j++) = M.col(l);
            Eigen::VectorXd sol = A.colPivHouseholderQr().solve(-M.col(k));
            for (int l = 0, j = 0; l < r; ++l)
                if (l != k) c(l) = sol(j++);
        }
        C.col(k) = c;
    }
    StructuralParams sp;
    sp.Phi = Eigen::MatrixXd::Identity(r, r) - C;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) throw SingularityError("recovered I - Phi is singular");
    Eigen::MatrixXd B = Gamma * C;
    sp.Lambda = B.topRows(r);
    sp.alpha = B.middleRows(r, q);
    sp.gamma = B.bottomRows(B.rows() - r - q);
    return sp;
}

// Simulated data from the reduced form: within-block Erdos-Renyi networks,
// normal covariates, equilibrium beliefs, then actions drawn given beliefs.
struct NplSimulation {
    NplData data;
    Eigen::MatrixXd psi;
};

inline NplSimulation simulate_npl(int blocks, int block_size, const ReducedFormParams& truth, double link_prob,
                                  std::uint64_t seed)
{
    int r = int(truth.lambda_star.cols()), q = int(truth.alpha_star.rows());
    if (truth.gamma_star.rows() != blocks) throw DomainError("one block effect row per block required");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    NplSimulation sim;
    auto& d = sim.data;
    for (int t = 0; t < blocks; ++t) {
        Network g(block_size, false);
        for (int i = 0; i < block_size; ++i)
            for (int j = i + 1; j < block_size; ++j)
                if (u(rng) < link_prob) g.set_link(i, j);
        d.blocks.push_back(std::move(g));
    }
    int n = blocks * block_size;
    d.X.resize(n, q);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < q; ++c) d.X(i, c) = nd(rng);
    auto G = stacked_adjacency(d);
    std::vector<Family> fam(r, Family::probit);
    auto eq = solve_fixed_point(G, truth.lambda_star, truth.w_tilde(d), fam, BneSettings{});
    sim.psi = eq.beliefs.psi;
    d.actions.resize(n, r);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < r; ++k) d.actions(i, k) = u(rng) < sim.psi(i, k) ? 1.0 : 0.0;
    return sim;
}

} // namespace netform

#endif

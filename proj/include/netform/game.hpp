#ifndef NETFORM_GAME_HPP
#define NETFORM_GAME_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "distributions.hpp"
#include "formation.hpp"
#include "network.hpp"

namespace netform {

struct WeightContext {
    int player = 0;
    int activity = 0;
    int group = 0;
    int group_size = 0;
    int group_degree = 0;
    double action = 0;
};

using WeightFn = std::function<double(const WeightContext&)>;

struct GameSpec {
    int r = 1;
    Eigen::MatrixXd synergy;   // s(l,k): peers' activity l on own activity k
    Eigen::MatrixXd cost;      // phi(l,k)
    Eigen::MatrixXd w;         // n x r productivity
    std::vector<Family> shock_family;
    std::vector<int> groups;   // block label per player, empty means one block
    WeightFn weight_fn;        // empty means weight 1

    int players() const { return int(w.rows()); }

    void validate() const
    {
        if (r < 1) throw DomainError("activity count must be positive");
        if (synergy.rows() != r || synergy.cols() != r || cost.rows() != r || cost.cols() != r)
            throw DomainError("synergy and cost must be r x r");
        if (w.cols() != r) throw DomainError("productivity matrix must have r columns");
        if (int(shock_family.size()) != r) throw DomainError("one shock family per activity required");
        for (int m = 0; m < r; ++m)
            if (!(cost(m, m) > 0)) throw DomainError("cost diagonal must be positive");
        if (!groups.empty() && int(groups.size()) != players()) throw DomainError("group labels must cover every player");
    }

    int group_of(int i) const
    {
        if (groups.empty()) return 0;
        if (i < 0 || i >= int(groups.size()) || groups[i] < 0)
            throw StructuralError("player " + std::to_string(i + 1) + " belongs to no group");
        return groups[i];
    }

    bool same_group(int i, int j) const { return group_of(i) == group_of(j); }

    int group_size(int g) const
    {
        if (groups.empty()) return players();
        return int(std::count(groups.begin(), groups.end(), g));
    }

    // Phi(l,m) = -phi(l,m)/phi(m,m), zero diagonal
    Eigen::MatrixXd simultaneity() const
    {
        Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(r, r);
        for (int l = 0; l < r; ++l)
            for (int m = 0; m < r; ++m)
                if (l != m) phi(l, m) = -cost(l, m) / cost(m, m);
        return phi;
    }

    // Lambda(l,m) = s(l,m)/phi(m,m)
    Eigen::MatrixXd peer() const
    {
        Eigen::MatrixXd lam(r, r);
        for (int l = 0; l < r; ++l)
            for (int m = 0; m < r; ++m) lam(l, m) = synergy(l, m) / cost(m, m);
        return lam;
    }

    Eigen::MatrixXd normalized_w() const
    {
        Eigen::MatrixXd out = w;
        for (int m = 0; m < r; ++m) out.col(m) /= cost(m, m);
        return out;
    }

    double weight(const WeightContext& c) const { return weight_fn ? weight_fn(c) : 1.0; }
};

struct Beliefs {
    Eigen::MatrixXd psi;   // n x r
};

struct ReducedForm {
    Eigen::MatrixXd lambda_tilde;   // Lambda (I - Phi)^-1
    Eigen::MatrixXd transform;      // (I - Phi)^-1, also maps w and the shocks
    Eigen::MatrixXd w_tilde;        // normalized w times transform
};

inline ReducedForm reduced_form(const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& lam, const Eigen::MatrixXd& wbar)
{
    int r = int(Phi.rows());
    Eigen::MatrixXd ImP = Eigen::MatrixXd::Identity(r, r) - Phi;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ImP);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) throw SingularityError("I - Phi is singular");
    ReducedForm rf;
    rf.transform = lu.inverse();
    rf.lambda_tilde = lam * rf.transform;
    rf.w_tilde = wbar * rf.transform;
    double err = (rf.lambda_tilde * ImP - lam).cwiseAbs().maxCoeff();
    if (err > 1e-10 * std::max(1.0, lam.cwiseAbs().maxCoeff()))
        throw SingularityError("reduced form check failed; I - Phi badly conditioned");
    return rf;
}

inline ReducedForm reduced_form(const GameSpec& spec)
{
    spec.validate();
    return reduced_form(spec.simultaneity(), spec.peer(), spec.normalized_w());
}

// Within-block adjacency, rows scaled to sum to one when requested.
inline Eigen::SparseMatrix<double> block_adjacency(const Network& g, const std::vector<int>& groups, bool row_normalize)
{
    int n = g.size();
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i) {
        int deg = 0;
        for (int j = 0; j < n; ++j)
            if (g.has_link(i, j) && (groups.empty() || groups[i] == groups[j])) ++deg;
        double v = row_normalize && deg > 0 ? 1.0 / deg : 1.0;
        for (int j = 0; j < n; ++j)
            if (g.has_link(i, j) && (groups.empty() || groups[i] == groups[j])) trip.emplace_back(i, j, v);
    }
    Eigen::SparseMatrix<double> G(n, n);
    G.setFromTriplets(trip.begin(), trip.end());
    return G;
}

// g(psi): psi'_im = F_m(sum_l lt(l,m) (G psi)_il + wt_im). Shared by the BNE
// solver and the pseudo-likelihood belief update.
inline Eigen::MatrixXd belief_map(const Eigen::SparseMatrix<double>& G, const Eigen::MatrixXd& lambda_tilde,
                                  const Eigen::MatrixXd& w_tilde, const std::vector<Family>& families,
                                  const Eigen::MatrixXd& psi)
{
    Eigen::MatrixXd q = (G * psi) * lambda_tilde + w_tilde;
    for (int m = 0; m < q.cols(); ++m)
        for (int i = 0; i < q.rows(); ++i) q(i, m) = link_cdf(q(i, m), families[m]);
    return q;
}

struct ContractionInfo {
    double norm1 = 0;      // max column sum
    double norm_inf = 0;   // max row sum
    double bound = 0;      // 1 / max sup density
    bool holds = false;
    double lipschitz = 0;
    bool column_norm = true;   // which norm certifies the contraction
};

inline ContractionInfo contraction_info(const Eigen::MatrixXd& lambda_tilde, const std::vector<Family>& families)
{
    ContractionInfo c;
    double f = 0;
    for (auto fam : families) f = std::max(f, sup_density(fam));
    c.bound = 1.0 / f;
    c.norm1 = lambda_tilde.cwiseAbs().colwise().sum().maxCoeff();
    c.norm_inf = lambda_tilde.cwiseAbs().rowwise().sum().maxCoeff();
    c.column_norm = c.norm1 <= c.norm_inf;
    double best = std::min(c.norm1, c.norm_inf);
    c.holds = best < c.bound;
    c.lipschitz = best * f;
    return c;
}

struct BneSettings {
    double tol = 1e-10;
    int max_iters = 10000;
    bool force = false;
    bool row_normalize = true;
    std::optional<Eigen::MatrixXd> psi0;
};

struct BneResult {
    Beliefs beliefs;
    int iterations = 0;
    double lipschitz = 0;
    double residual = 0;
};

// sup-norm, or sum over activities of per-activity sup-norms
inline double belief_distance(const Eigen::MatrixXd& d, bool sup_norm)
{
    if (sup_norm) return d.cwiseAbs().maxCoeff();
    return d.cwiseAbs().colwise().maxCoeff().sum();
}

inline BneResult solve_fixed_point(const Eigen::SparseMatrix<double>& G, const Eigen::MatrixXd& lambda_tilde,
                                   const Eigen::MatrixXd& w_tilde, const std::vector<Family>& families,
                                   const BneSettings& s)
{
    auto ci = contraction_info(lambda_tilde, families);
    if (!ci.holds && !s.force)
        throw ContractionViolation("peer-effect matrix violates the contraction bound", std::min(ci.norm1, ci.norm_inf),
                                   ci.bound);
    int n = int(G.rows()), r = int(lambda_tilde.rows());
    Eigen::MatrixXd psi = s.psi0 ? *s.psi0 : Eigen::MatrixXd::Constant(n, r, 0.5);
    if (psi.rows() != n || psi.cols() != r) throw DomainError("initial beliefs have wrong shape");
    // norm in which g contracts: sup-norm pairs with the column-sum bound
    bool sup_norm = ci.column_norm || !ci.holds;
    double L = ci.holds ? ci.lipschitz : 0.0;
    BneResult res;
    res.lipschitz = ci.lipschitz;
    for (int it = 1; it <= s.max_iters; ++it) {
        Eigen::MatrixXd next = belief_map(G, lambda_tilde, w_tilde, families, psi);
        double step = belief_distance(next - psi, sup_norm);
        psi = std::move(next);
        double err = L > 0 ? L / (1.0 - L) * step : step;
        if (err <= s.tol) {
            res.beliefs.psi = psi;
            res.iterations = it;
            res.residual = (belief_map(G, lambda_tilde, w_tilde, families, psi) - psi).cwiseAbs().maxCoeff();
            return res;
        }
    }
    throw NoConvergence("belief fixed point did not converge", s.max_iters);
}

inline BneResult bne_solve(const Network& g, const GameSpec& spec, const BneSettings& s = {})
{
    spec.validate();
    if (spec.players() != g.size()) throw DomainError("productivity matrix rows must equal player count");
    for (int i = 0; i < g.size(); ++i) spec.group_of(i);
    auto rf = reduced_form(spec);
    auto G = block_adjacency(g, spec.groups, s.row_normalize);
    return solve_fixed_point(G, rf.lambda_tilde, rf.w_tilde, spec.shock_family, s);
}

namespace detail {

inline int group_degree(const Network& g, const GameSpec& spec, int i)
{
    int d = 0, gi = spec.group_of(i);
    for (int j = 0; j < g.size(); ++j)
        if (g.has_link(i, j) && spec.group_of(j) == gi) ++d;
    return d;
}

} // namespace detail

// Payoff minus cost for player i: peers enter through a_bar_il = sum_j G_ij a_jl / n_g
// within i's block.
inline double utility(int i, const Network& g, const Eigen::MatrixXd& actions, const Eigen::MatrixXd& intents,
                      const GameSpec& spec, const Eigen::MatrixXd& shocks)
{
    int r = spec.r, n = g.size();
    int gi = spec.group_of(i);
    int ng = spec.group_size(gi);
    Eigen::VectorXd abar = Eigen::VectorXd::Zero(r);
    for (int j = 0; j < n; ++j)
        if (g.has_link(i, j) && spec.group_of(j) == gi) abar += actions.row(j).transpose();
    abar /= ng;
    int gdeg = detail::group_degree(g, spec, i);
    double payoff = 0.0;
    for (int k = 0; k < r; ++k) {
        double wt = spec.weight({i, k, gi, ng, gdeg, actions(i, k)});
        double peer = 0.0;
        for (int l = 0; l < r; ++l) peer += spec.synergy(l, k) * abar(l);
        payoff += wt * (peer + spec.w(i, k) - shocks(i, k)) * intents(i, k);
    }
    double cost = 0.0;
    for (int k = 0; k < r; ++k)
        for (int l = 0; l < r; ++l) cost += spec.cost(l, k) * intents(i, k) * intents(i, l);
    return payoff - 0.5 * cost;
}

// Gain for i from adding the link ij: (1/n_g) sum_k weight * s(l,k) a_jl y_ik
inline double marginal_utility(int i, int j, const Network& g_minus, const Eigen::MatrixXd& actions,
                               const Eigen::MatrixXd& intents, const GameSpec& spec)
{
    if (g_minus.has_link(i, j)) throw DomainError("link ij must be absent");
    int gi = spec.group_of(i);
    if (spec.group_of(j) != gi) return 0.0;
    int ng = spec.group_size(gi);
    int gdeg = detail::group_degree(g_minus, spec, i);
    double m = 0.0;
    for (int k = 0; k < spec.r; ++k) {
        double wt = spec.weight({i, k, gi, ng, gdeg, actions(i, k)});
        for (int l = 0; l < spec.r; ++l) m += wt * spec.synergy(l, k) * actions(j, l) * intents(i, k);
    }
    return m / ng;
}

// i's expected gain from a link to j, with j's activities replaced by the
// beliefs psi_j (realized actions when no beliefs are given)
inline double expected_marginal_utility(int i, int j, const Eigen::MatrixXd& actions, const Eigen::MatrixXd& intents,
                                        const GameSpec& spec, const Beliefs* beliefs)
{
    if (!spec.same_group(i, j)) return 0.0;
    const Eigen::MatrixXd& m = beliefs ? beliefs->psi : actions;
    double v = 0.0;
    for (int k = 0; k < spec.r; ++k) {
        double peer = 0.0;
        for (int l = 0; l < spec.r; ++l) peer += spec.synergy(l, k) * m(j, l);
        v += peer * actions(i, k) * intents(i, k);
    }
    return v;
}

// Theta(G) = sum_i sum_k (sum_l s(l,k) sum_j G_ij m_jl a_ik + w_ik - eps_ik) y_ik
inline double potential(const Network& g, const Eigen::MatrixXd& actions, const Eigen::MatrixXd& intents,
                        const GameSpec& spec, const Eigen::MatrixXd& shocks, const Beliefs* beliefs = nullptr)
{
    int n = g.size();
    const Eigen::MatrixXd& m = beliefs ? beliefs->psi : actions;
    double theta = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < spec.r; ++k) {
            double peer = 0.0;
            for (int j = 0; j < n; ++j) {
                if (!g.has_link(i, j) || !spec.same_group(i, j)) continue;
                for (int l = 0; l < spec.r; ++l) peer += spec.synergy(l, k) * m(j, l);
            }
            theta += (peer * actions(i, k) + spec.w(i, k) - shocks(i, k)) * intents(i, k);
        }
    }
    return theta;
}

// Formation channel of the joint link surplus:
// delta * common neighbours + X_ij'beta + A_i + A_j - nu_ij
struct FormationPart {
    DyadCovariates cov;
    FormationParams params;
    Eigen::MatrixXd nu;   // symmetric dyad shocks
};

struct StabilityGame {
    GameSpec spec;
    Eigen::MatrixXd actions;
    Eigen::MatrixXd intents;
    Eigen::MatrixXd shocks;
    std::optional<Beliefs> beliefs;
    std::optional<FormationPart> formation;

    int players() const { return int(actions.rows()); }
};

namespace detail {

inline double static_surplus(const StabilityGame& game, int i, int j)
{
    const Beliefs* b = game.beliefs ? &*game.beliefs : nullptr;
    double s = expected_marginal_utility(i, j, game.actions, game.intents, game.spec, b) +
               expected_marginal_utility(j, i, game.actions, game.intents, game.spec, b);
    if (game.formation) {
        const auto& f = *game.formation;
        s += homophily(i, j, f.cov, f.params.beta) + f.params.A(i) + f.params.A(j) - f.nu(i, j);
    }
    return s;
}

inline double triadic(const StabilityGame& game) { return game.formation ? game.formation->params.delta : 0.0; }

} // namespace detail

// Joint surplus of dyad ij given the rest of g; undirected networks only.
inline double pair_surplus(const Network& g, const StabilityGame& game, int i, int j)
{
    return detail::static_surplus(game, i, j) + detail::triadic(game) * g.common_neighbors(i, j);
}

inline bool is_pairwise_stable(const Network& g, const StabilityGame& game)
{
    if (g.directed()) throw DomainError("pairwise stability is defined on undirected networks");
    for (int i = 0; i < g.size(); ++i)
        for (int j = i + 1; j < g.size(); ++j) {
            double s = pair_surplus(g, game, i, j);
            if (g.has_link(i, j) ? s < 0.0 : s >= 0.0) return false;
        }
    return true;
}

// game potential plus the formation channel summed over present links
inline double total_potential(const Network& g, const StabilityGame& game)
{
    const Beliefs* b = game.beliefs ? &*game.beliefs : nullptr;
    double v = potential(g, game.actions, game.intents, game.spec, game.shocks, b);
    if (game.formation) {
        const auto& f = *game.formation;
        for (int i = 0; i < g.size(); ++i)
            for (int j = i + 1; j < g.size(); ++j)
                if (g.has_link(i, j)) v += homophily(i, j, f.cov, f.params.beta) + f.params.A(i) + f.params.A(j) - f.nu(i, j);
        v += f.params.delta * double(count_transitive_triangles(g));
    }
    return v;
}

// Small-network enumeration: networks encoded as bitmasks over dyads
// (0,1),(0,2),...,(n-2,n-1).
class DyadEnumerator {
public:
    static constexpr int max_players = 7;

    DyadEnumerator(int n, const StabilityGame& game) : n_(n)
    {
        if (n > max_players) throw ScaleError("exhaustive enumeration supports at most 7 players");
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                a_.push_back(i);
                b_.push_back(j);
                c_.push_back(detail::static_surplus(game, i, j));
            }
        delta_ = detail::triadic(game);
    }

    int dyads() const { return int(a_.size()); }

    std::vector<std::uint8_t> rows(std::uint32_t mask) const
    {
        std::vector<std::uint8_t> r(n_, 0);
        for (int d = 0; d < dyads(); ++d)
            if (mask >> d & 1u) {
                r[a_[d]] |= std::uint8_t(1u << b_[d]);
                r[b_[d]] |= std::uint8_t(1u << a_[d]);
            }
        return r;
    }

    double surplus(const std::vector<std::uint8_t>& rows, int d) const
    {
        return c_[d] + delta_ * std::popcount(unsigned(rows[a_[d]] & rows[b_[d]]));
    }

    // first dyad violating stability, or -1
    int first_violation(std::uint32_t mask) const
    {
        auto r = rows(mask);
        for (int d = 0; d < dyads(); ++d) {
            double s = surplus(r, d);
            if ((mask >> d & 1u) ? s < 0.0 : s >= 0.0) return d;
        }
        return -1;
    }

    std::vector<std::uint32_t> stable_masks() const
    {
        std::vector<std::uint32_t> out;
        std::uint32_t total = std::uint32_t{1} << dyads();
        for (std::uint32_t m = 0; m < total; ++m)
            if (first_violation(m) < 0) out.push_back(m);
        return out;
    }

    Network to_network(std::uint32_t mask) const
    {
        Network g(n_, false);
        for (int d = 0; d < dyads(); ++d)
            if (mask >> d & 1u) g.set_link(a_[d], b_[d]);
        return g;
    }

    std::uint32_t to_mask(const Network& g) const
    {
        std::uint32_t m = 0;
        for (int d = 0; d < dyads(); ++d)
            if (g.has_link(a_[d], b_[d])) m |= std::uint32_t{1} << d;
        return m;
    }

private:
    int n_;
    std::vector<int> a_, b_;
    std::vector<double> c_;
    double delta_ = 0;
};

inline std::vector<Network> enumerate_ps(int n, const StabilityGame& game)
{
    DyadEnumerator e(n, game);
    std::vector<Network> out;
    for (auto m : e.stable_masks()) out.push_back(e.to_network(m));
    return out;
}

// Flip the first unstable dyad until a stable network is reached. Throws if a
// network repeats.
inline std::vector<Network> improvement_path(const Network& start, const StabilityGame& game)
{
    DyadEnumerator e(start.size(), game);
    std::uint32_t m = e.to_mask(start);
    std::set<std::uint32_t> seen{m};
    std::vector<Network> path{start};
    while (true) {
        int d = e.first_violation(m);
        if (d < 0) return path;
        m ^= std::uint32_t{1} << d;
        if (!seen.insert(m).second) throw NoConvergence("improvement path revisited a network", int(path.size()));
        path.push_back(e.to_network(m));
    }
}

struct PsBounds {
    double lower = 0;
    double upper = 0;
};

struct BoundsEstimate {
    PsBounds bounds;
    double selected = 0;   // frequency under uniform selection among PS networks
    int draws = 0;
};

// Monte Carlo bounds on the probability that the players in `subset` are
// linked as in `sub`; dyad shocks redrawn from the formation family each draw.
inline BoundsEstimate subnetwork_bounds(const Network& sub, const std::vector<int>& subset, const StabilityGame& game,
                                        int n_draws, std::uint64_t seed)
{
    int n = game.players();
    if (int(subset.size()) != sub.size()) throw DomainError("subset size must match the subnetwork");
    if (sub.size() > 5) throw ScaleError("subnetwork bounds support at most 5 players in the subset");
    if (n > DyadEnumerator::max_players) throw ScaleError("subnetwork bounds support at most 7 players");
    if (!game.formation) throw DomainError("bounds need a formation channel to draw dyad shocks from");
    std::mt19937_64 rng(seed);
    std::mt19937_64 pick(seed ^ 0x9e3779b97f4a7c15ULL);
    StabilityGame g = game;
    int lo = 0, up = 0, sel = 0;
    for (int d = 0; d < n_draws; ++d) {
        auto& nu = g.formation->nu;
        nu = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) nu(i, j) = nu(j, i) = draw_shock(rng, g.formation->params.family);
        DyadEnumerator e(n, g);
        auto ps = e.stable_masks();
        int match = 0;
        std::vector<char> hit(ps.size(), 0);
        for (std::size_t s = 0; s < ps.size(); ++s) {
            auto rows = e.rows(ps[s]);
            bool ok = true;
            for (int a = 0; a < sub.size() && ok; ++a)
                for (int b = a + 1; b < sub.size() && ok; ++b)
                    ok = bool(rows[subset[a]] >> subset[b] & 1u) == sub.has_link(a, b);
            hit[s] = ok;
            match += ok;
        }
        if (match > 0) ++up;
        if (match > 0 && match == int(ps.size())) ++lo;
        if (!ps.empty()) {
            std::uniform_int_distribution<std::size_t> u(0, ps.size() - 1);
            if (hit[u(pick)]) ++sel;
        }
    }
    BoundsEstimate b;
    b.draws = n_draws;
    b.bounds.lower = double(lo) / n_draws;
    b.bounds.upper = double(up) / n_draws;
    b.selected = double(sel) / n_draws;
    return b;
}

} // namespace netform

#endif

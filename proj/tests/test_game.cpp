#include <gtest/gtest.h>

#include <random>
#include <set>

#include "netform/game.hpp"

using namespace netform;

namespace {

GameSpec simple_spec(int n, int r, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> nd;
    GameSpec s;
    s.r = r;
    s.synergy = Eigen::MatrixXd::NullaryExpr(r, r, [&] { return scale * nd(rng); });
    s.cost = Eigen::MatrixXd::NullaryExpr(r, r, [&] { return 0.3 * nd(rng); });
    for (int m = 0; m < r; ++m) s.cost(m, m) = 1.0 + std::abs(nd(rng));
    s.w = Eigen::MatrixXd::NullaryExpr(n, r, [&] { return nd(rng); });
    s.shock_family.assign(r, Family::probit);
    return s;
}

Network random_graph(int n, double p, std::mt19937_64& rng)
{
    std::bernoulli_distribution b(p);
    Network g(n, false);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (b(rng)) g.set_link(i, j);
    return g;
}

Eigen::MatrixXd random_binary(int n, int r, std::mt19937_64& rng)
{
    std::bernoulli_distribution b(0.5);
    return Eigen::MatrixXd::NullaryExpr(n, r, [&] { return b(rng) ? 1.0 : 0.0; });
}

Eigen::MatrixXd random_normal(int n, int r, std::mt19937_64& rng)
{
    std::normal_distribution<double> nd;
    return Eigen::MatrixXd::NullaryExpr(n, r, [&] { return nd(rng); });
}

StabilityGame random_stability_game(int n, int r, std::mt19937_64& rng, bool with_formation = true)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd;
    StabilityGame g;
    g.spec = simple_spec(n, r, rng);
    g.actions = random_binary(n, r, rng);
    g.intents = random_normal(n, r, rng);
    g.shocks = random_normal(n, r, rng);
    g.beliefs = Beliefs{Eigen::MatrixXd::NullaryExpr(n, r, [&] { return u(rng); })};
    if (with_formation) {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x(i) = u(rng) < 0.5 ? -1.0 : 1.0;
        FormationPart f;
        f.cov = DyadCovariates::product(x);
        f.params.beta = Eigen::VectorXd::Constant(1, nd(rng));
        f.params.delta = 0.5 * nd(rng);
        f.params.A = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.5 * nd(rng); });
        f.params.family = Family::logistic;
        f.nu = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) f.nu(i, j) = f.nu(j, i) = draw_shock(rng, Family::logistic);
        g.formation = f;
    }
    return g;
}

// Def. 1 checked from first principles
bool oracle_stable(const Network& net, const StabilityGame& g)
{
    int n = net.size(), r = g.spec.r;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double s = 0;
            for (int k = 0; k < r; ++k)
                for (int l = 0; l < r; ++l)
                    s += g.spec.synergy(l, k) * (g.beliefs->psi(j, l) * g.actions(i, k) * g.intents(i, k) +
                                                 g.beliefs->psi(i, l) * g.actions(j, k) * g.intents(j, k));
            if (g.formation) {
                const auto& f = *g.formation;
                int common = 0;
                for (int k = 0; k < n; ++k) common += net.has_link(i, k) && net.has_link(j, k);
                s += f.params.delta * common + f.params.beta(0) * f.cov(0, i, j) + f.params.A(i) + f.params.A(j) -
                     f.nu(i, j);
            }
            if (net.has_link(i, j) && s < 0) return false;
            if (!net.has_link(i, j) && s >= 0) return false;
        }
    return true;
}

double scalar_root(double lam)
{
    // psi = Phi(lam * psi) by bisection
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid - norm_cdf(lam * mid) < 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST(Utility, ZeroIntents)
{
    std::mt19937_64 rng(1);
    auto spec = simple_spec(5, 2, rng);
    auto g = random_graph(5, 0.5, rng);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(5, 2);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(utility(i, g, random_binary(5, 2, rng), y, spec, random_normal(5, 2, rng)), 0.0);
}

TEST(Utility, IsolatedPlayer)
{
    GameSpec s;
    s.r = 1;
    s.synergy = Eigen::MatrixXd::Constant(1, 1, 0.7);
    s.cost = Eigen::MatrixXd::Constant(1, 1, 1.3);
    s.w = Eigen::MatrixXd::Constant(3, 1, 0.4);
    s.shock_family = {Family::probit};
    Network g(3, false);
    g.set_link(1, 2);
    Eigen::MatrixXd a = Eigen::MatrixXd::Ones(3, 1), y = Eigen::MatrixXd::Constant(3, 1, 0.9);
    Eigen::MatrixXd e = Eigen::MatrixXd::Constant(3, 1, -0.2);
    EXPECT_NEAR(utility(0, g, a, y, s, e), (0.4 + 0.2) * 0.9 - 0.5 * 1.3 * 0.81, 1e-14);
}

TEST(Utility, TriangleMatchesMatrixOracle)
{
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        auto spec = simple_spec(3, 2, rng);
        Network g(3, false);
        g.set_link(0, 1);
        g.set_link(0, 2);
        g.set_link(1, 2);
        auto a = random_binary(3, 2, rng);
        auto y = random_normal(3, 2, rng);
        auto e = random_normal(3, 2, rng);
        Eigen::MatrixXd abar = g.adjacency() * a / 3.0;
        Eigen::MatrixXd lin = (abar * spec.synergy + spec.w - e).cwiseProduct(y);
        for (int i = 0; i < 3; ++i) {
            double expect = lin.row(i).sum() - 0.5 * y.row(i) * spec.cost.transpose() * y.row(i).transpose();
            EXPECT_NEAR(utility(i, g, a, y, spec, e), expect, 1e-12);
        }
    }
}

TEST(Utility, PlayerOutsideGroups)
{
    std::mt19937_64 rng(3);
    auto spec = simple_spec(3, 1, rng);
    spec.groups = {0, 0, -1};
    Network g(3, false);
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 1);
    EXPECT_THROW(utility(2, g, z, z, spec, z), StructuralError);
}

TEST(MarginalUtility, ZeroCases)
{
    std::mt19937_64 rng(4);
    auto spec = simple_spec(5, 2, rng);
    Network g(5, false);
    auto a = random_binary(5, 2, rng);
    a.row(3).setZero();
    auto y = random_normal(5, 2, rng);
    EXPECT_EQ(marginal_utility(0, 3, g, a, y, spec), 0.0);
    spec.synergy.setZero();
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            if (i != j) EXPECT_EQ(marginal_utility(i, j, g, a, y, spec), 0.0);
}

TEST(MarginalUtility, EqualsUtilityDifference)
{
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        int n = 6;
        auto spec = simple_spec(n, 2, rng);
        if (rep % 2) spec.groups = {0, 0, 0, 1, 1, 1};
        auto g = random_graph(n, 0.4, rng);
        auto a = random_binary(n, 2, rng);
        auto y = random_normal(n, 2, rng);
        auto e = random_normal(n, 2, rng);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                Network minus = g, plus = g;
                minus.set_link(i, j, false);
                plus.set_link(i, j, true);
                double fd = utility(i, plus, a, y, spec, e) - utility(i, minus, a, y, spec, e);
                EXPECT_NEAR(marginal_utility(i, j, minus, a, y, spec), fd, 1e-12);
            }
        Network h = g;
        h.set_link(0, 1, true);
        EXPECT_THROW(marginal_utility(0, 1, h, a, y, spec), DomainError);
    }
}

TEST(ReducedForm, NoSimultaneity)
{
    std::mt19937_64 rng(6);
    auto spec = simple_spec(4, 3, rng);
    Eigen::VectorXd diag = spec.cost.diagonal();
    spec.cost = diag.asDiagonal();
    auto rf = reduced_form(spec);
    EXPECT_LT((rf.lambda_tilde - spec.peer()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ReducedForm, ExampleOneStructure)
{
    // activity 1 depends on activity 2, not the reverse
    double phi21 = 0.4, lam12 = 0.7, lam21 = -0.3;
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(2, 2), Lam = Eigen::MatrixXd::Zero(2, 2);
    Phi(1, 0) = phi21;
    Lam(0, 1) = lam12;
    Lam(1, 0) = lam21;
    Eigen::MatrixXd alpha(3, 2);
    alpha << 0.5, -1.0, 0.2, 0.3, -0.7, 1.1;
    auto rf = reduced_form(Phi, Lam, alpha);
    EXPECT_NEAR(rf.lambda_tilde(0, 0), phi21 * lam12, 1e-15);
    EXPECT_NEAR(rf.lambda_tilde(1, 0), lam21, 1e-15);
    EXPECT_NEAR(rf.lambda_tilde(0, 1), lam12, 1e-15);
    EXPECT_NEAR(rf.lambda_tilde(1, 1), 0.0, 1e-15);
    for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(rf.w_tilde(c, 0), alpha(c, 0) + alpha(c, 1) * phi21, 1e-15);
        EXPECT_NEAR(rf.w_tilde(c, 1), alpha(c, 1), 1e-15);
    }
}

TEST(ReducedForm, LargeSpectralRadiusStillInvertible)
{
    GameSpec s;
    s.r = 2;
    s.synergy = Eigen::MatrixXd::Constant(2, 2, 0.1);
    s.cost = Eigen::MatrixXd::Identity(2, 2);
    s.cost(0, 1) = s.cost(1, 0) = -2.0;
    s.w = Eigen::MatrixXd::Zero(2, 2);
    s.shock_family = {Family::probit, Family::probit};
    EXPECT_NO_THROW(reduced_form(s));
    s.cost(0, 1) = s.cost(1, 0) = -1.0;
    EXPECT_THROW(reduced_form(s), SingularityError);
}

TEST(Bne, NoPeerEffects)
{
    std::mt19937_64 rng(7);
    auto spec = simple_spec(6, 2, rng);
    spec.synergy.setZero();
    auto g = random_graph(6, 0.5, rng);
    auto res = bne_solve(g, spec);
    auto rf = reduced_form(spec);
    for (int i = 0; i < 6; ++i)
        for (int m = 0; m < 2; ++m) EXPECT_NEAR(res.beliefs.psi(i, m), norm_cdf(rf.w_tilde(i, m)), 1e-15);
    EXPECT_LE(res.iterations, 2);
}

TEST(Bne, TwoPlayerScalarRoot)
{
    GameSpec s;
    s.r = 1;
    s.synergy = Eigen::MatrixXd::Constant(1, 1, 0.5);
    s.cost = Eigen::MatrixXd::Ones(1, 1);
    s.w = Eigen::MatrixXd::Zero(2, 1);
    s.shock_family = {Family::probit};
    Network g(2, false);
    g.set_link(0, 1);
    auto res = bne_solve(g, s);
    double root = scalar_root(0.5);
    EXPECT_NEAR(root, 0.622, 5e-4);
    EXPECT_NEAR(res.beliefs.psi(0, 0), root, 1e-10);
    EXPECT_NEAR(res.beliefs.psi(1, 0), root, 1e-10);
    EXPECT_LE(res.residual, 1e-10);
}

TEST(Bne, ContractionThreshold)
{
    std::mt19937_64 rng(8);
    auto g = random_graph(10, 0.4, rng);
    GameSpec s;
    s.r = 1;
    s.cost = Eigen::MatrixXd::Ones(1, 1);
    s.w = random_normal(10, 1, rng);
    s.shock_family = {Family::probit};
    s.synergy = Eigen::MatrixXd::Constant(1, 1, 2.4);
    EXPECT_NO_THROW(bne_solve(g, s));
    s.synergy = Eigen::MatrixXd::Constant(1, 1, 2.6);
    EXPECT_THROW(bne_solve(g, s), ContractionViolation);
    BneSettings force;
    force.force = true;
    force.max_iters = 200000;
    EXPECT_NO_THROW(bne_solve(g, s, force));
}

TEST(Bne, UniqueFromBothCorners)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        int n = 15, r = 2;
        auto spec = simple_spec(n, r, rng);
        spec.cost = Eigen::MatrixXd::Identity(r, r);
        Eigen::MatrixXd lt = Eigen::MatrixXd::NullaryExpr(r, r, [&] { return u(rng); });
        lt *= 2.3 / lt.cwiseAbs().colwise().sum().maxCoeff();
        spec.synergy = lt;
        auto g = random_graph(n, 0.3, rng);
        BneSettings a, b;
        a.psi0 = Eigen::MatrixXd::Zero(n, r);
        b.psi0 = Eigen::MatrixXd::Ones(n, r);
        auto ra = bne_solve(g, spec, a), rb = bne_solve(g, spec, b);
        EXPECT_LE((ra.beliefs.psi - rb.beliefs.psi).cwiseAbs().maxCoeff(), 2e-10);
    }
}

TEST(Bne, JacobianBound)
{
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int n = 8, r = 2;
    auto spec = simple_spec(n, r, rng, 0.8);
    auto rf = reduced_form(spec);
    auto g = random_graph(n, 0.5, rng);
    auto G = block_adjacency(g, {}, true);
    auto ci = contraction_info(rf.lambda_tilde, spec.shock_family);
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::MatrixXd psi = Eigen::MatrixXd::NullaryExpr(n, r, [&] { return u(rng); });
        Eigen::MatrixXd base = belief_map(G, rf.lambda_tilde, rf.w_tilde, spec.shock_family, psi);
        // induced sup-norm of the Jacobian = max row abs sum over outputs
        Eigen::MatrixXd J(n * r, n * r);
        double h = 1e-6;
        for (int c = 0; c < n * r; ++c) {
            Eigen::MatrixXd p2 = psi;
            p2(c % n, c / n) += h;
            Eigen::MatrixXd d = (belief_map(G, rf.lambda_tilde, rf.w_tilde, spec.shock_family, p2) - base) / h;
            for (int o = 0; o < n * r; ++o) J(o, c) = d(o % n, o / n);
        }
        double jn = J.cwiseAbs().rowwise().sum().maxCoeff();
        EXPECT_LE(jn, ci.norm1 * sup_density(Family::probit) + 1e-5);
    }
}

TEST(Potential, NoSynergyIsNetworkFree)
{
    std::mt19937_64 rng(11);
    auto spec = simple_spec(5, 2, rng);
    spec.synergy.setZero();
    auto a = random_binary(5, 2, rng), y = random_normal(5, 2, rng), e = random_normal(5, 2, rng);
    double base = potential(Network(5, false), a, y, spec, e);
    for (int rep = 0; rep < 10; ++rep) EXPECT_EQ(potential(random_graph(5, 0.5, rng), a, y, spec, e), base);
}

TEST(Potential, SingleLinkExpansion)
{
    GameSpec s;
    s.r = 1;
    s.synergy = Eigen::MatrixXd::Constant(1, 1, 0.8);
    s.cost = Eigen::MatrixXd::Ones(1, 1);
    s.w = Eigen::MatrixXd::Constant(2, 1, 0.1);
    s.shock_family = {Family::probit};
    Eigen::MatrixXd a(2, 1), y(2, 1), e = Eigen::MatrixXd::Zero(2, 1);
    a << 1, 1;
    y << 0.6, -0.4;
    Network g0(2, false), g1(2, false);
    g1.set_link(0, 1);
    double d = potential(g1, a, y, s, e) - potential(g0, a, y, s, e);
    EXPECT_NEAR(d, 0.8 * (a(1) * a(0) * y(0) + a(0) * a(1) * y(1)), 1e-15);
}

TEST(Potential, DifferenceEqualsMarginalExpectedUtilities)
{
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 100; ++rep) {
        auto game = random_stability_game(4, 2, rng, false);
        auto g = random_graph(4, 0.5, rng);
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) {
                Network plus = g, minus = g;
                plus.set_link(i, j, true);
                minus.set_link(i, j, false);
                const Beliefs* b = &*game.beliefs;
                double d = potential(plus, game.actions, game.intents, game.spec, game.shocks, b) -
                           potential(minus, game.actions, game.intents, game.spec, game.shocks, b);
                double m = expected_marginal_utility(i, j, game.actions, game.intents, game.spec, b) +
                           expected_marginal_utility(j, i, game.actions, game.intents, game.spec, b);
                EXPECT_NEAR(d, m, 1e-12);
            }
    }
}

TEST(Stability, AllPositiveGivesComplete)
{
    std::mt19937_64 rng(13);
    auto game = random_stability_game(4, 1, rng, false);
    game.spec.synergy.setConstant(1.0);
    game.actions.setOnes();
    game.intents.setOnes();
    auto ps = enumerate_ps(4, game);
    ASSERT_EQ(ps.size(), 1u);
    EXPECT_EQ(ps[0].link_count(), 6);
    game.spec.synergy.setConstant(-1.0);
    ps = enumerate_ps(4, game);
    ASSERT_EQ(ps.size(), 1u);
    EXPECT_EQ(ps[0].link_count(), 0);
    EXPECT_TRUE(is_pairwise_stable(Network(4, false), game));
}

TEST(Stability, MatchesBruteForceOnThreePlayers)
{
    std::mt19937_64 rng(14);
    for (int rep = 0; rep < 200; ++rep) {
        auto game = random_stability_game(3, 2, rng);
        std::set<std::vector<bool>> brute, fast;
        for (int m = 0; m < 8; ++m) {
            Network g(3, false);
            if (m & 1) g.set_link(0, 1);
            if (m & 2) g.set_link(0, 2);
            if (m & 4) g.set_link(1, 2);
            EXPECT_EQ(is_pairwise_stable(g, game), oracle_stable(g, game));
            if (oracle_stable(g, game)) brute.insert({bool(m & 1), bool(m & 2), bool(m & 4)});
        }
        for (const auto& g : enumerate_ps(3, game)) fast.insert({g.has_link(0, 1), g.has_link(0, 2), g.has_link(1, 2)});
        EXPECT_EQ(brute, fast);
    }
}

TEST(Stability, ThresholdNetworkWithoutSynergy)
{
    std::mt19937_64 rng(15);
    auto game = random_stability_game(5, 2, rng);
    game.spec.synergy.setZero();
    game.formation->params.delta = 0.0;
    auto ps = enumerate_ps(5, game);
    ASSERT_EQ(ps.size(), 1u);
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) {
            const auto& f = *game.formation;
            double s = f.params.beta(0) * f.cov(0, i, j) + f.params.A(i) + f.params.A(j) - f.nu(i, j);
            EXPECT_EQ(ps[0].has_link(i, j), s >= 0);
        }
}

TEST(Stability, ExistenceAndImprovementPaths)
{
    std::mt19937_64 rng(16);
    for (int rep = 0; rep < 200; ++rep) {
        auto game = random_stability_game(4, 2, rng);
        auto ps = enumerate_ps(4, game);
        ASSERT_FALSE(ps.empty());
        if (rep >= 40) continue;
        DyadEnumerator e(4, game);
        for (std::uint32_t m = 0; m < 64; ++m) {
            auto path = improvement_path(e.to_network(m), game);
            EXPECT_TRUE(is_pairwise_stable(path.back(), game));
            EXPECT_NE(std::find(ps.begin(), ps.end(), path.back()), ps.end());
            for (std::size_t t = 1; t < path.size(); ++t)
                EXPECT_GE(total_potential(path[t], game), total_potential(path[t - 1], game) - 1e-12);
        }
    }
}

TEST(Stability, ScaleError)
{
    std::mt19937_64 rng(17);
    auto game = random_stability_game(8, 1, rng);
    EXPECT_THROW(enumerate_ps(8, game), ScaleError);
}

TEST(Bounds, UniqueNetworkCollapsesBounds)
{
    std::mt19937_64 rng(18);
    auto game = random_stability_game(4, 1, rng);
    game.spec.synergy.setZero();
    game.formation->params.delta = 0.0;
    Network sub(3, false);
    sub.set_link(0, 1);
    auto b = subnetwork_bounds(sub, {0, 1, 2}, game, 2000, 5);
    EXPECT_DOUBLE_EQ(b.bounds.lower, b.bounds.upper);
    EXPECT_DOUBLE_EQ(b.selected, b.bounds.lower);
}

TEST(Bounds, HugeNegativeSynergyForcesEmpty)
{
    std::mt19937_64 rng(19);
    auto game = random_stability_game(4, 1, rng);
    game.spec.synergy.setConstant(-1e6);
    game.actions.setOnes();
    game.intents.setOnes();
    game.beliefs->psi.setOnes();
    auto b = subnetwork_bounds(Network(3, false), {0, 2, 3}, game, 500, 1);
    EXPECT_DOUBLE_EQ(b.bounds.lower, 1.0);
    EXPECT_DOUBLE_EQ(b.bounds.upper, 1.0);
}

TEST(Bounds, Sandwich)
{
    std::mt19937_64 rng(20);
    for (int rep = 0; rep < 10; ++rep) {
        auto game = random_stability_game(4, 2, rng);
        Network sub(3, false);
        sub.set_link(0, 2);
        auto b = subnetwork_bounds(sub, {0, 1, 3}, game, 1000, 100 + rep);
        EXPECT_LE(b.bounds.lower, b.selected);
        EXPECT_LE(b.selected, b.bounds.upper);
        EXPECT_LE(0.0, b.bounds.lower);
        EXPECT_LE(b.bounds.upper, 1.0);
    }
}

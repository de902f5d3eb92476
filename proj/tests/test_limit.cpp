#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "limit.hpp"

using namespace glab;

namespace {

LimitPair unit_pair() {
    LimitPair pr;
    pr.su.vertices = {{0.5, 0.0}, {0.5, 1.0}};
    pr.labels = {{0.25, 0.5}, false};
    return pr;
}

struct Brute {
    double value;
    int jumps;
};

Brute brute_force(const std::vector<std::array<double, 2>>& cost, double gamma) {
    const int n = static_cast<int>(cost.size());
    Brute best{std::numeric_limits<double>::infinity(), 0};
    std::vector<int> lab(n);
    for (long mask = 0; mask < (1L << n); ++mask) {
        for (int i = 0; i < n; ++i) lab[i] = (mask >> i) & 1;
        const double v = labelling_cost(cost, lab, gamma);
        const int j = count_jumps(lab);
        if (v < best.value || (v == best.value && j < best.jumps)) best = {v, j};
    }
    return best;
}

}  // namespace

TEST(Phi, StandardPairExamples) {
    const DoubleWell W(-1, 1);
    const LimitConstants c = make_limit_constants(W, W, 2.5, 4.0);
    const double sig = constant_sigma_p(2.5, W);
    EXPECT_NEAR(c.wall_density(true, false), sig, 1e-12);
    LimitPair pr = unit_pair();
    // v ≡ α': the β trace (length 2) pays the full wall density
    PhiValue f = phi_energy(pr, c);
    EXPECT_NEAR(f.surface, sig, 1e-14);
    EXPECT_NEAR(f.wall, 2.0 * sig, 1e-12);
    EXPECT_EQ(f.line, 0.0);
    EXPECT_NEAR(f.total, 3.0 * sig, 1e-12);
    // v = Tu: two jumps at the contact points
    pr.v.jumps = {0.5, 2.5};
    f = phi_energy(pr, c);
    EXPECT_NEAR(f.wall, 0.0, 1e-12);
    EXPECT_EQ(f.line, 8.0);
    // v β on [0.2, 1.7]: mismatch on [0.2,0.5] and [1.7,2.5]
    pr.v.jumps = {0.2, 1.7};
    EXPECT_NEAR(phi_energy(pr, c).wall, 1.1 * sig, 1e-12);
    pr.v = {true, {0.5, 2.5}};  // v opposite to Tu everywhere
    EXPECT_NEAR(phi_energy(pr, c).wall, 4.0 * sig, 1e-12);
}

TEST(Phi, WallIsAdditiveOverSplits) {
    const DoubleWell W(-1, 1), V(-0.5, 0.8);
    const LimitConstants c = make_limit_constants(W, V, 2.5, 1.0);
    LimitPair pr = unit_pair();
    pr.v.jumps = {0.3, 1.2, 2.9, 3.6};
    const double a = phi_energy(pr, c).wall;
    // splitting a piece at an extra cut point must not change the sum: equal to per-segment integration
    double fine = 0.0;
    const int N = 40000;
    for (int i = 0; i < N; ++i) {
        const double s = (i + 0.5) * 4.0 / N;
        fine += c.wall_density(pr.trace_is_beta(s), pr.v.is_beta(s, 4.0)) * 4.0 / N;
    }
    EXPECT_NEAR(a, fine, 1e-9);
}

TEST(Phi, RejectsMalformedPairs) {
    LimitPair pr = unit_pair();
    pr.v.jumps = {0.5};
    EXPECT_THROW(pr.validate(), ConfigError);
    pr.v.jumps = {2.0, 1.0};
    EXPECT_THROW(pr.validate(), ConfigError);
    pr.v.jumps = {0.0, 1.0};
    EXPECT_THROW(pr.validate(), ConfigError);
    pr = unit_pair();
    pr.su.vertices = {{0.5, 0.0}, {1.5, 1.0}};
    EXPECT_THROW(pr.validate(), ConfigError);
}

TEST(PhaseDp, MatchesBruteForce) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::uniform_int_distribution<int> N(1, 16);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = N(rng);
        std::vector<std::array<double, 2>> cost(n);
        for (auto& c : cost) c = {U(rng), U(rng)};
        const double gamma = 0.5 * U(rng);
        const PhaseChoice pc = minimize_phi_over_v(cost, gamma);
        const Brute b = brute_force(cost, gamma);
        EXPECT_NEAR(pc.value, b.value, 1e-12) << trial;
        EXPECT_EQ(pc.jumps, b.jumps) << trial;
        EXPECT_NEAR(labelling_cost(cost, pc.labels, gamma), pc.value, 1e-12);
        EXPECT_EQ(count_jumps(pc.labels), pc.jumps);
    }
}

TEST(PhaseDp, LimitsInGamma) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<std::array<double, 2>> cost(30);
    for (auto& c : cost) c = {U(rng), U(rng)};
    const PhaseChoice free = minimize_phi_over_v(cost, 0.0);
    for (std::size_t i = 0; i < cost.size(); ++i) EXPECT_EQ(free.labels[i], cost[i][1] < cost[i][0] ? 1 : 0);
    const PhaseChoice stiff = minimize_phi_over_v(cost, 1e6);
    EXPECT_EQ(stiff.jumps, 0);
    double s0 = 0, s1 = 0;
    for (auto& c : cost) s0 += c[0], s1 += c[1];
    EXPECT_NEAR(stiff.value, std::min(s0, s1), 1e-12);
    EXPECT_THROW(minimize_phi_over_v({}, 1.0), ConfigError);
}

TEST(PhaseDp, NoRandomLabellingBeatsTheMinimum) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<std::array<double, 2>> cost(64);
    for (auto& c : cost) c = {U(rng), U(rng)};
    const PhaseChoice pc = minimize_phi_over_v(cost, 0.3);
    std::bernoulli_distribution B(0.5);
    std::vector<int> lab(cost.size());
    for (int k = 0; k < 1000; ++k) {
        for (int& l : lab) l = B(rng);
        EXPECT_GE(labelling_cost(cost, lab, 0.3), pc.value - 1e-12);
    }
}

TEST(PhaseDp, StandardPairOptimum) {
    // wall costs on 64 segments of the unit square: with small γ the optimal v follows Tu
    const DoubleWell W(-1, 1);
    LimitConstants c = make_limit_constants(W, W, 2.5, 0.1);
    const LimitPair pr = unit_pair();
    PhaseChoice pc = minimize_phi_over_v(boundary_wall_costs(pr, c, 64), c.gamma_p);
    EXPECT_EQ(pc.jumps, 2);
    const LimitPair lp = with_boundary_labels(pr, pc.labels);
    ASSERT_EQ(lp.v.jumps.size(), 2u);
    EXPECT_NEAR(lp.v.jumps[0], 0.5, 1e-12);
    EXPECT_NEAR(lp.v.jumps[1], 2.5, 1e-12);
    EXPECT_NEAR(phi_energy(lp, c).total, pc.value + c.sigma_p, 1e-12);
    // a γ above σ_p makes paying the wall cheaper than two jumps
    c.gamma_p = 2.0 * c.sigma_p;
    pc = minimize_phi_over_v(boundary_wall_costs(pr, c, 64), c.gamma_p);
    EXPECT_EQ(pc.jumps, 0);
}

TEST(BulkRecovery, ProfileAcrossTheInterface) {
    const DoubleWell W(-1, 1);
    const ProfileSolution1D prof = solve_profile_ode(W, 2.5);
    const RectDomainGrid g(1.0, 1.0, 1.0 / 32, 2.5);
    const LimitPair pr = unit_pair();
    const double eps = 1e-3, k = 0.5 / 1.5;
    const Recovery r = build_bulk_recovery(pr, g, eps, 2.5, prof);
    EXPECT_EQ(r.u(0, 16), -1.0);
    EXPECT_EQ(r.u(32, 16), 1.0);
    EXPECT_EQ(r.u(16, 16), 0.0);
    const Point x{0.53125, 0.25};
    EXPECT_DOUBLE_EQ(bulk_profile_value(pr, g, x, eps, 2.5, prof), prof.at(0.03125 * std::pow(0.25 / eps, k)));
    const Point y{0.46875, 0.25};
    EXPECT_DOUBLE_EQ(bulk_profile_value(pr, g, y, eps, 2.5, prof), prof.at(-0.03125 * std::pow(0.25 / eps, k)));
    EXPECT_TRUE(r.warning);  // the layer widens to the wall near both contact points
    LimitPair none;
    none.labels = {{0.5, 0.5}, true};
    for (double v : build_bulk_recovery(none, g, eps, 2.5, prof).u.values) EXPECT_EQ(v, 1.0);
    EXPECT_THROW(build_bulk_recovery(pr, g, 0.0, 2.5, prof), ConfigError);
}

TEST(WallRecovery, LayerVariableAndValues) {
    const double eps = 1e-6, p = 2.5;
    for (double S : {0.5, 3.0, 7.4}) EXPECT_NEAR(wall_layer_variable(wall_layer_thickness(eps, p, S), eps, p), S, 1e-12 * S);
    const DoubleWell W(-1, 1);
    const TransitionMap T(W, p, -1, 1);
    const RectDomainGrid g(1.0, 1.0, 1.0 / 64, p);
    const Recovery r = build_wall_recovery(1.0, -1.0, eps, p, g, T);
    for (int n : g.lattice().boundary_nodes) EXPECT_EQ(r.u.values[n], -1.0);
    EXPECT_EQ(r.u(32, 32), 1.0);
    EXPECT_FALSE(r.warning);
    const double thick = wall_layer_thickness(eps, p, T.extent(-1, 1));
    for (int n = 0; n < g.shape().size(); ++n) {
        if (g.lattice().h[n] >= thick) {
            EXPECT_EQ(r.u.values[n], 1.0);
        }
    }
    EXPECT_THROW(build_wall_recovery(0.5, -1.0, eps, p, g, T), ConfigError);
    EXPECT_TRUE(build_wall_recovery(1.0, -1.0, 0.5, p, g, T).warning);
}

TEST(WallRecovery, EnergyApproachesWallDensity) {
    const DoubleWell W(-1, 1);
    const double p = 2.5;
    const TransitionMap T(W, p, -1, 1);
    const RectDomainGrid g(1.0, 1.0, 1.0 / 1024, p);
    const double target = constant_sigma_p(p, W) * g.perimeter();
    double prev = 0.0;
    for (double eps : {1e-6, 1e-7, 1e-8}) {
        const Recovery r = build_wall_recovery(1.0, -1.0, eps, p, g, T);
        const double e = full_energy_F(r.u, g, eps, W, W).total / target;
        EXPECT_GT(e, prev) << eps;
        prev = e;
    }
    EXPECT_NEAR(prev, 1.0, 0.05);
}

TEST(Lipschitz, ExtensionBounds) {
    const DoubleWell W(-1, 1);
    const RectDomainGrid g(1.0, 1.0, 1.0 / 32, 2.5);
    std::vector<double> v;
    for (int n : g.lattice().boundary_nodes) {
        const Point b = g.shape().node(n);
        v.push_back(0.6 + 0.3 * std::sin(3.0 * b.x + 2.0 * b.y));
    }
    for (double eps : {1e-2, 1e-4}) {
        const LipschitzExtension e = build_lipschitz_extension(g, v, eps, 2.5, W, 2.0);
        for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(e.u.values[g.lattice().boundary_nodes[i]], v[i]);
        EXPECT_EQ(e.well, 1.0);
        EXPECT_NEAR(e.omega, 0.7, 0.02);
        EXPECT_LE(e.lip_u, e.lip_bound * (1 + 1e-9));
        EXPECT_LE(e.G.total, e.bound);
        EXPECT_EQ(e.u(16, 16), 1.0);
    }
    EXPECT_THROW(build_lipschitz_extension(g, {0.1, 0.2}, 1e-2, 2.5, W, 2.0), ConfigError);
}

TEST(Cutoff, PrintedRadiiRejected) {
    for (double eps : {1e-2, 1e-5}) {
        const CutoffRadii pr = printed_radii(eps, 2.5);
        EXPECT_GT(pr.sigma, pr.rho);
        EXPECT_THROW(check_cutoff_order(pr), ConfigError);
        const CutoffRadii c = corrected_radii(eps, 2.5);
        EXPECT_NO_THROW(check_cutoff_order(c));
        EXPECT_NEAR(c.b, 1.0 / 3.0, 1e-15);
        EXPECT_NEAR(c.rho, std::cbrt(eps), 1e-12 * c.rho);
        // the rescaled core √ε sits well inside σ, and ρ is below the wall scale ε^k
        EXPECT_LT(std::sqrt(eps), c.sigma);
    }
    EXPECT_THROW(corrected_radii(1e-3, 2.5, 1.0 / 6.0), ConfigError);
    EXPECT_THROW(corrected_radii(1e-3, 2.5, 0.5), ConfigError);
    EXPECT_NO_THROW(corrected_radii(1e-3, 2.5, 0.2));
}

TEST(Fan, Rays) {
    EXPECT_EQ(fan_value({1.0, 0.0}, -1, 1), 1.0);
    EXPECT_EQ(fan_value({-1.0, 0.0}, -1, 1), -1.0);
    EXPECT_NEAR(fan_value({0.0, 2.0}, -1, 1), 0.0, 1e-15);
    EXPECT_NEAR(fan_value({1.0, 1.0}, -1, 1), 0.5, 1e-15);
    EXPECT_NEAR(fan_value({0.0, 0.0}, 0.0, 2.0), 1.0, 1e-15);
}

TEST(BoundaryRecovery, FanProfileLeavesNoCutoffGap) {
    const DoubleWell V(-1, 1);
    const HalfPlaneGrid hg(8.0, 8.0, 0.25, 2.5);
    Field fan(hg.shape());
    for (int n = 0; n < hg.shape().size(); ++n) fan.values[n] = fan_value(hg.shape().node(n), -1, 1);
    const PsiProfile psi(fan, -1, 1);
    EXPECT_EQ(psi.radius(), 6.0);
    const double eps = 1e-4;
    const CutoffRadii c = corrected_radii(eps, 2.5);
    const BoundaryRecovery br = build_boundary_recovery(psi, 4.0, eps, c, 2.5, V, V, 1.0, 32);
    const GridShape& s = br.grid.shape();
    double far = 0.0;
    for (int n = 0; n < s.size(); ++n) {
        const Point x = s.node(n);
        if (std::hypot(x.x, x.y) >= c.rho) far = std::max(far, std::abs(br.w.values[n] - fan_value(x, -1, 1)));
    }
    EXPECT_EQ(far, 0.0);
    // ψ_ε equals ū up to interpolation of the fan on the ψ lattice
    EXPECT_LT(br.terms.cutoff_actual, 1e-3 * br.terms.cutoff_bound);
    EXPECT_NEAR(br.terms.psi_annulus, br.terms.fan_annulus, 0.05 * br.terms.fan_annulus);
    EXPECT_EQ(br.terms.gamma_ref, 4.0);
    EXPECT_GT(br.terms.H_patch, 0.0);
    EXPECT_THROW(build_boundary_recovery(psi, 4.0, eps, printed_radii(eps, 2.5), 2.5, V, V, 1.0), ConfigError);
}

TEST(Assembly, LevelCrossings) {
    LimitPair pr = unit_pair();
    const auto q = interface_level_crossings(pr, 0.1);
    ASSERT_EQ(q.size(), 2u);
    EXPECT_NEAR(q[0].y, 0.1, 1e-12);
    EXPECT_NEAR(q[1].y, 0.9, 1e-12);
    EXPECT_EQ(q[0].x, 0.5);
}

namespace {

struct AssemblyFixture {
    DoubleWell W{-1, 1}, V{-1, 1};
    ProfileSolution1D prof = solve_profile_ode(W, 2.5);
    TransitionMap tmap{W, 2.5, -1, 1};
    PsiProfile psi;
    AssemblyInputs in;

    AssemblyFixture() {
        const HalfPlaneGrid hg(4.0, 4.0, 0.25, 2.5);
        psi = PsiProfile(polar_extension(-1, 1, hg.shape()), -1, 1);
        in = {&W, &V, 2.5, &prof, &tmap, &psi};
    }
};

LimitPair square_pair(double L) {
    LimitPair pr;
    pr.lx = pr.ly = L;
    pr.su.vertices = {{0.5 * L, 0.0}, {0.5 * L, L}};
    pr.labels = {{0.25 * L, 0.5 * L}, false};
    pr.v.jumps = {0.5 * L, 2.5 * L};
    return pr;
}

}  // namespace

TEST(Assembly, RegionsPartitionTheEnergy) {
    const AssemblyFixture f;
    const LimitPair pr = square_pair(4.0);
    const RectDomainGrid g(4.0, 4.0, 1.0 / 16, 2.5);
    AssemblyOptions o;
    o.r = 0.5;
    const GlobalRecovery gr = assemble_global_recovery(pr, g, 1e-3, f.in, o);
    ASSERT_EQ(gr.regions.size(), 4u);
    double s = 0.0;
    for (const RegionEnergy& r : gr.regions) {
        EXPECT_GE(r.energy.total, 0.0);
        s += r.energy.total;
    }
    EXPECT_NEAR(s, gr.total.total, 1e-10 * gr.total.total);
    EXPECT_NEAR(gr.lambda, 2.0 * gr.radii.rho, 1e-15);
    for (double x : gr.u.values) {
        EXPECT_GE(x, -1.0);
        EXPECT_LE(x, 1.0);
    }
    // far from Su and ∂Ω the field sits in a well
    EXPECT_EQ(gr.u(16, 32), -1.0);
    EXPECT_EQ(gr.u(48, 32), 1.0);
    EXPECT_EQ(truncate_field(gr.u, {1.0}).values, gr.u.values);
}

TEST(Assembly, TrivialPairHasZeroEnergy) {
    const AssemblyFixture f;
    LimitPair pr;
    pr.lx = pr.ly = 4.0;
    pr.labels = {{1.0, 1.0}, true};
    pr.v = {true, {}};
    const RectDomainGrid g(4.0, 4.0, 1.0 / 8, 2.5);
    const GlobalRecovery gr = assemble_global_recovery(pr, g, 1e-3, f.in, {});
    for (double x : gr.u.values) EXPECT_EQ(x, 1.0);
    EXPECT_EQ(gr.total.total, 0.0);
}

TEST(Assembly, InfeasiblePartitions) {
    const AssemblyFixture f;
    const LimitPair pr = square_pair(4.0);
    const RectDomainGrid g(4.0, 4.0, 1.0 / 8, 2.5);
    AssemblyOptions o;
    o.r = 1.5;  // A2 empty
    EXPECT_THROW(assemble_global_recovery(pr, g, 1e-3, f.in, o), InfeasiblePartition);
    o.r = 0.05;  // below ε^k
    EXPECT_THROW(assemble_global_recovery(pr, g, 1e-3, f.in, o), InfeasiblePartition);
    LimitPair corner = pr;
    corner.v.jumps = {0.5, 2.5 * 4.0};
    o.r = 0.5;
    EXPECT_THROW(assemble_global_recovery(corner, g, 1e-3, f.in, o), InfeasiblePartition);
    LimitPair close = pr;
    close.v.jumps = {1.6, 2.4};
    EXPECT_THROW(assemble_global_recovery(close, g, 1e-3, f.in, o), InfeasiblePartition);
    const RectDomainGrid other(2.0, 4.0, 1.0 / 8, 2.5);
    EXPECT_THROW(assemble_global_recovery(pr, other, 1e-3, f.in, o), ConfigError);
    AssemblyInputs missing = f.in;
    missing.psi = nullptr;
    EXPECT_THROW(assemble_global_recovery(pr, g, 1e-3, missing, o), ConfigError);
}

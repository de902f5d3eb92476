#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "functionals.hpp"
#include "profiles.hpp"

using namespace glab;

namespace {

double beta_fn(double a, double b) { return std::tgamma(a) * std::tgamma(b) / std::tgamma(a + b); }

// Nonlinear Gauss-Seidel on H_1: every free node minimises its local energy by golden section.
double coordinate_descent_gamma(const HalfPlaneGrid& g, const DoubleWell& V, int sweeps) {
    const Lattice2D& L = g.lattice();
    const GridShape& s = g.shape();
    const double d2 = s.dx * s.dx, p = L.p;
    Field u = polar_extension(V.well_low(), V.well_high(), s);
    apply_lateral(u, g, V.well_low(), V.well_high());
    std::vector<std::vector<int>> nt(s.size()), ne(s.size());
    for (std::size_t t = 0; t < L.tri.size(); ++t)
        for (int v : L.tri[t]) nt[v].push_back(static_cast<int>(t));
    for (std::size_t e = 0; e < L.bedge.size(); ++e)
        for (int v : L.bedge[e]) ne[v].push_back(static_cast<int>(e));
    auto local = [&](int n, double x) {
        const double keep = u.values[n];
        u.values[n] = x;
        double E = 0.0;
        for (int t : nt[n]) {
            const auto& T = L.tri[t];
            const double a = u.values[T[1]] - u.values[T[0]], b = u.values[T[2]] - u.values[T[0]];
            E += std::pow((a * a + b * b) / d2, 0.5 * p) * L.wgrad[t];
        }
        for (int e : ne[n]) {
            const double x0 = u.values[L.bedge[e][0]], x1 = u.values[L.bedge[e][1]];
            double m = std::max(V(x0), V(x1));
            if ((V.hump() - x0) * (V.hump() - x1) < 0) m = std::max(m, V(V.hump()));
            E += L.blen[e] * m;
        }
        u.values[n] = keep;
        return E;
    };
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int sw = 0; sw < sweeps; ++sw)
        for (int n = 0; n < s.size(); ++n) {
            if (g.is_lateral(n)) continue;
            double lo = std::max(V.well_low(), u.values[n] - 0.5), hi = std::min(V.well_high(), u.values[n] + 0.5);
            double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo), f1 = local(n, x1), f2 = local(n, x2);
            for (int it = 0; it < 30; ++it) {
                if (f1 < f2) {
                    hi = x2, x2 = x1, f2 = f1, x1 = hi - gr * (hi - lo), f1 = local(n, x1);
                } else {
                    lo = x1, x1 = x2, f1 = f2, x2 = lo + gr * (hi - lo), f2 = local(n, x2);
                }
            }
            const double xb = 0.5 * (lo + hi);
            if (local(n, xb) < local(n, u.values[n])) u.values[n] = xb;
        }
    return halfplane_energy_H(u, g, 1.0, V).total;
}

}  // namespace

TEST(Profile, TanhAtPTwo) {
    const DoubleWell W(-1, 1);
    const ProfileSolution1D sol = solve_profile_ode(W, 2.0);
    double dev = 0.0;
    for (std::size_t i = 0; i < sol.s.size(); ++i) dev = std::max(dev, std::abs(sol.theta[i] - std::tanh(sol.s[i])));
    EXPECT_LT(dev, 1e-6);
    EXPECT_NEAR(sol.at(0.0), 0.0, 1e-15);
    EXPECT_NEAR(sol.energy, 8.0 / 3.0, 1e-6);
}

TEST(Profile, EnergyEqualsSigma) {
    const DoubleWell W(-1, 1);
    for (double p : {2.25, 2.5, 2.75}) {
        const ProfileSolution1D sol = solve_profile_ode(W, p);
        EXPECT_NEAR(sol.energy, constant_sigma_p(p, W), 1e-6) << p;
        EXPECT_NEAR(profile_energy_1d(sol, W, p), sol.energy, 1e-15);
        EXPECT_LT(sol.young_residual, 1e-12);
    }
    const DoubleWell A(0.0, 2.0, 0.5, WellForm::double_parabola);
    EXPECT_NEAR(solve_profile_ode(A, 2.5).energy, constant_sigma_p(2.5, A), 1e-6);
}

TEST(Profile, MonotoneWithWellEnds) {
    const DoubleWell W(-1, 1);
    const ProfileSolution1D sol = solve_profile_ode(W, 2.5, 1e-12);
    for (std::size_t i = 1; i < sol.theta.size(); ++i) EXPECT_GE(sol.theta[i], sol.theta[i - 1]);
    EXPECT_LT(W(sol.theta.front()), 1.01e-12);
    EXPECT_LT(W(sol.theta.back()), 1.01e-12);
    EXPECT_EQ(sol.at(sol.s_min() - 1.0), -1.0);
    EXPECT_EQ(sol.at(sol.s_max() + 1.0), 1.0);
    // p > 2: the profile reaches the wells at finite s
    EXPECT_LT(sol.s_max(), 4.0);
}

TEST(Profile, PrintedConstantOvershoots) {
    // slope factor (p(p-1))^{-1/p} at p = 2: θ = tanh(s/√2), energy ∫(W/2 + W) = (3√2/4)σ₂
    const DoubleWell W(-1, 1);
    const ProfileSolution1D sol = solve_profile_ode(W, 2.0, 1e-12, 20001, ProfileConstant::printed);
    EXPECT_NEAR(sol.energy / (8.0 / 3.0), 3.0 * std::sqrt(2.0) / 4.0, 1e-3);
    EXPECT_NEAR(sol.energy / (8.0 / 3.0), 1.0607, 1e-3);
}

TEST(Profile, RejectsDegenerateWell) {
    EXPECT_THROW(solve_profile_ode(DoubleWell(1, 1), 2.5), ConfigError);
    EXPECT_THROW(solve_profile_ode(DoubleWell(-1, 1, 1, WellForm::zero), 2.5), ConfigError);
}

TEST(TransitionMap, ExtentClosedForm) {
    // S(1) - S(-1) = (p-1)^{1/p} ∫(1-t²)^{-2/p} = 1.5^{0.4} B(1/2, 1/5) at p = 2.5
    const DoubleWell W(-1, 1);
    const TransitionMap T(W, 2.5, -1, 1);
    const double exact = std::pow(1.5, 0.4) * beta_fn(0.5, 0.2);
    EXPECT_NEAR(exact, 7.372431, 1e-6);
    EXPECT_NEAR(T.extent(-1, 1), exact, 1e-5);
    EXPECT_NEAR(T.extent(1, -1), exact, 1e-5);
    EXPECT_NEAR(T.S(0.0), 0.0, 1e-15);
}

TEST(TransitionMap, InverseAndTransition) {
    const DoubleWell W(-1, 1);
    const TransitionMap T(W, 2.5, -1, 1);
    for (double th : {-0.99, -0.5, 0.0, 0.3, 0.97}) EXPECT_NEAR(T.inverse(T.S(th)), th, 1e-9);
    EXPECT_EQ(T.transition(-1.0, 1.0, 0.0), -1.0);
    EXPECT_EQ(T.transition(0.2, 0.2, 3.0), 0.2);
    EXPECT_EQ(T.transition(-1.0, 1.0, 100.0), 1.0);
    EXPECT_EQ(T.transition(1.0, -1.0, 100.0), -1.0);
    // the transition from 0 to 1 follows the profile: θ' = (p-1)^{-1/p} W^{1/p}
    const double s = 0.4, h = 1e-5;
    const double th = T.transition(0.0, 1.0, s);
    const double slope = (T.transition(0.0, 1.0, s + h) - T.transition(0.0, 1.0, s - h)) / (2 * h);
    EXPECT_NEAR(slope, std::pow(1.5, -0.4) * std::pow(W(th), 0.4), 1e-4);
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
        const double v = T.transition(-1.0, 1.0, 0.08 * i);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(Polar, RayValues) {
    const HalfPlaneGrid g(1.0, 1.0, 0.25, 2.5);
    const Field u = polar_extension(-1, 1, g.shape());
    const GridShape& s = g.shape();
    EXPECT_EQ(u(8, 0), 1.0);   // θ = 0 ray
    EXPECT_EQ(u(0, 0), -1.0);  // θ = π ray
    EXPECT_NEAR(u(4, 2), 0.0, 1e-15);  // θ = π/2
    EXPECT_NEAR(polar_extension(0.5, 2.5, s)(4, 3), 1.5, 1e-15);
}

TEST(Rearrange, Basics) {
    const HalfPlaneGrid g(1.0, 0.5, 0.25, 2.5);
    const GridShape& s = g.shape();
    Field m(s), r(s);
    for (int j = 0; j < s.ny; ++j)
        for (int i = 0; i < s.nx; ++i) {
            m(i, j) = i * 0.1 + j;
            r(i, j) = (s.nx - 1 - i) * 0.1 + j;
        }
    EXPECT_EQ(monotone_rearrange_x1(m).values, m.values);
    EXPECT_EQ(monotone_rearrange_x1(r).values, m.values);
}

TEST(Rearrange, WeightedGradientNonIncreasing) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int cells : {8, 16}) {
        const HalfPlaneGrid g(1.0, 1.0, 1.0 / cells, 2.5);
        EnergyTerms t;
        for (int k = 0; k < 100; ++k) {
            Field u(g.shape());
            for (double& x : u.values) x = U(rng);
            EXPECT_LE(evaluate_energy(g.lattice(), monotone_rearrange_x1(u), t).total,
                      evaluate_energy(g.lattice(), u, t).total * (1 + 1e-12));
        }
    }
}

TEST(GammaEstimate, ReEvaluationAndLateralData) {
    const DoubleWell V(-1, 1);
    const HalfPlaneGrid g(2.0, 2.0, 0.25, 2.5);
    GammaOptions o;
    o.random_starts = 1;
    const GammaEstimate e = estimate_gamma_p(V, g, o);
    EXPECT_EQ(e.estimate, halfplane_energy_H(e.minimizer, g, 1.0, V).total);
    const auto tr = trace(e.minimizer, g.lattice());
    EXPECT_EQ(tr.front(), -1.0);
    EXPECT_EQ(tr.back(), 1.0);
    EXPECT_EQ(e.start_names.size(), 3u);
    for (double x : e.minimizer.values) {
        EXPECT_GE(x, -1.0);
        EXPECT_LE(x, 1.0);
    }
}

TEST(GammaEstimate, NestedLadderNonIncreasing) {
    const auto lad = estimate_gamma_nested(DoubleWell(-1, 1), 2.5, 4.0, 4.0, {0.5, 0.25, 0.125});
    ASSERT_EQ(lad.size(), 3u);
    for (std::size_t k = 1; k < lad.size(); ++k) EXPECT_LE(lad[k].estimate, lad[k - 1].estimate + 1e-8);
    EXPECT_THROW(estimate_gamma_nested(DoubleWell(-1, 1), 2.5, 4.0, 4.0, {0.25, 0.5}), ConfigError);
}

TEST(GammaEstimate, ZeroWallPotentialDecaysWithR) {
    // with V ≡ 0 the dilated competitor costs λ^{4-2p}, so the estimate falls toward 0
    const DoubleWell V(-1, 1, 1, WellForm::zero);
    double prev = std::numeric_limits<double>::infinity();
    for (double R : {2.0, 4.0, 8.0}) {
        GammaOptions o;
        o.random_starts = 0;
        o.step_start = false;
        const double e = estimate_gamma_p(V, HalfPlaneGrid(R, R, 0.5, 2.5), o).estimate;
        EXPECT_LT(e, prev);
        if (std::isfinite(prev)) {
            EXPECT_LT(e, 0.75 * prev);
        }
        prev = e;
    }
}

TEST(GammaEstimate, AgreesWithCoordinateDescent) {
    const DoubleWell V(-1, 1);
    const HalfPlaneGrid g(8.0, 8.0, 0.25, 2.5);
    const auto lad = estimate_gamma_nested(V, 2.5, 8.0, 8.0, {0.5, 0.25});
    const double oracle = coordinate_descent_gamma(g, V, 400);
    EXPECT_NEAR(lad.back().estimate, oracle, 5e-4 * oracle);
    EXPECT_NEAR(lad.back().estimate, 4.1295, 5e-4);
}

TEST(LbCompetitor, FanIsFixedPointAndBlend) {
    const HalfPlaneGrid inner(1.0, 1.0, 1.0 / 16, 2.5), outer(2.0, 2.0, 1.0 / 16, 2.5);
    const Field ubar_in = polar_extension(-1, 1, inner.shape());
    const Field w = build_lb_competitor(ubar_in, 0.5, 0.25, -1, 1, outer.shape());
    const Field ubar = polar_extension(-1, 1, outer.shape());
    for (std::size_t n = 0; n < w.size(); ++n) EXPECT_NEAR(w.values[n], ubar.values[n], 1e-14);
    // constant inner field c: in the annulus w = φc + (1-φ)ū with φ = 1 - (r-s)/c
    const Field cst(inner.shape(), 0.3);
    const Field b = build_lb_competitor(cst, 0.5, 0.25, -1, 1, outer.shape());
    const GridShape& s = outer.shape();
    for (int n : {s.index(32 + 10, 0), s.index(32, 10), s.index(32 - 7, 7)}) {
        const Point x = s.node(n);
        const double r = std::hypot(x.x, x.y), phi = 1.0 - (r - 0.5) / 0.25;
        ASSERT_GT(r, 0.5);
        ASSERT_LT(r, 0.75);
        EXPECT_NEAR(b.values[n], phi * 0.3 + (1 - phi) * ubar.values[n], 1e-14);
    }
    EXPECT_THROW(build_lb_competitor(cst, 0.9, 0.25, -1, 1, outer.shape()), ConfigError);
}

TEST(LbCompetitor, GluedEnergyDominatesInnerPart) {
    const DoubleWell V(-1, 1);
    const HalfPlaneGrid inner(1.0, 1.0, 1.0 / 16, 2.5), outer(2.0, 2.0, 1.0 / 16, 2.5);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> U(-1, 1);
    Field u(inner.shape());
    for (double& x : u.values) x = U(rng);
    const Field w = build_lb_competitor(u, 0.5, 0.25, -1, 1, outer.shape());
    // cells inside radius 1/2 carry the same values in both fields
    const GridShape& so = outer.shape();
    std::vector<char> cells(outer.lattice().cell_count(), 0), edges(outer.lattice().bedge.size(), 0);
    for (int j = 0; j + 1 < so.ny; ++j)
        for (int i = 0; i + 1 < so.nx; ++i) {
            const Point c = so.node(so.index(i + 1, j + 1));
            cells[i + j * (so.nx - 1)] = std::hypot(std::max(std::abs(c.x), std::abs(c.x - so.dx)), c.y) <= 0.5;
        }
    EnergyTerms t;
    t.V = &V;
    t.cells = &cells;
    t.edges = &edges;
    const double part = evaluate_energy(outer.lattice(), w, t).total;
    EXPECT_GT(part, 0.0);
    EXPECT_GE(halfplane_energy_H(w, outer, 1.0, V).total, part);
}

TEST(Annulus, WellFieldAndConcentration) {
    const DoubleWell V(-1, 1);
    const HalfPlaneGrid g(1.0, 1.0, 1.0 / 32, 2.5);
    const AnnulusChoice c0 = select_annulus(Field(g.shape(), 1.0), g.lattice(), 1e-4, V);
    EXPECT_EQ(c0.energy, 0.0);
    EXPECT_NEAR(c0.width, std::pow(1e-4, 1.0 / 6.0), 1e-15);
    // a ring of gradient near r = 0.55: the selected annulus lies outside it
    Field u(g.shape());
    for (int n = 0; n < g.shape().size(); ++n) {
        const Point x = g.shape().node(n);
        u.values[n] = std::tanh(60.0 * (std::hypot(x.x, x.y) - 0.55));
    }
    const AnnulusChoice c = select_annulus(u, g.lattice(), 1e-4, V);
    EXPECT_GT(c.s, 0.62);
    EXPECT_LT(c.energy, 1e-3 * c.total);
    EXPECT_LE(c.energy, c.bound);
}

TEST(Annulus, ExhaustiveScanOracle) {
    const DoubleWell V(-1, 1);
    const HalfPlaneGrid g(1.0, 1.0, 1.0 / 16, 2.5);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(-1, 1);
    Field u(g.shape());
    for (double& x : u.values) x = U(rng);
    const double eps = 1e-4;
    const AnnulusChoice c = select_annulus(u, g.lattice(), eps, V);
    // brute force: evaluate the annulus energy on a fine grid of radii with cell/edge masks
    const Lattice2D& L = g.lattice();
    auto annulus = [&](double s) {
        std::vector<char> cells(L.cell_count(), 0), edges(L.bedge.size(), 0);
        std::vector<double> parts;
        for (std::size_t q = 0; q < L.tri.size(); ++q) {
            Point cen{0, 0};
            for (int v : L.tri[q]) cen.x += L.shape.node(v).x / 3, cen.y += L.shape.node(v).y / 3;
            const double r = std::hypot(cen.x, cen.y);
            if (r - c.width < s && s <= r && r < 1.0) {
                const auto& T = L.tri[q];
                const double a = u.values[T[1]] - u.values[T[0]], b = u.values[T[2]] - u.values[T[0]];
                parts.push_back(std::pow(eps, 0.5) * L.wgrad[q] *
                                std::pow((a * a + b * b) / (L.shape.dx * L.shape.dx), 1.25));
            }
        }
        for (std::size_t e = 0; e < L.bedge.size(); ++e) {
            const Point x0 = L.shape.node(L.bedge[e][0]), x1 = L.shape.node(L.bedge[e][1]);
            const double r = std::hypot(0.5 * (x0.x + x1.x), 0.5 * (x0.y + x1.y));
            if (r - c.width < s && s <= r && r < 1.0) {
                parts.push_back(L.blen[e] * V.max_on(u.values[L.bedge[e][0]], u.values[L.bedge[e][1]]).value /
                                std::sqrt(eps));
            }
        }
        double t = 0.0;
        for (double x : parts) t += x;
        return t;
    };
    double best = std::numeric_limits<double>::infinity();
    const double hi = 1.0 - c.width;
    for (int i = 1; i < 4000; ++i) best = std::min(best, annulus(0.5 + (hi - 0.5) * i / 4000.0));
    EXPECT_LE(c.energy, best * (1 + 1e-9));
    EXPECT_NEAR(c.energy, annulus(c.s), 1e-9 * std::max(1.0, c.energy));
}

TEST(Annulus, UniformDensityGivesWidthShare) {
    // u = x₁ has |Du| = 1 and V ≡ 0, so the annulus energy is its share of ∫ x₂^{2-p} over the half disk
    const DoubleWell V(-1, 1, 1, WellForm::zero);
    const HalfPlaneGrid g(1.0, 1.0, 1.0 / 64, 2.5);
    Field u(g.shape());
    for (int n = 0; n < g.shape().size(); ++n) u.values[n] = g.shape().node(n).x;
    const double eps = 0.01;
    const AnnulusChoice c = select_annulus(u, g.lattice(), eps, V);
    // ∫ over a < r < b of y^{-1/2} is (b^{3/2} - a^{3/2})/(3/2) ∫_0^π sin^{-1/2}; so the
    // share of the half disk is b^{3/2} - a^{3/2}
    const double share = std::pow(c.s + c.width, 1.5) - std::pow(c.s, 1.5);
    EXPECT_NEAR(c.energy / c.total, share, 0.05 * share);
}

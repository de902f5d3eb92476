#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "functionals.hpp"
#include "geometry.hpp"
#include "json.hpp"
#include "potentials.hpp"
#include "profiles.hpp"

namespace glab {

// Boundary phase v on the counterclockwise loop: label at arclength 0⁺ plus sorted jump positions.
struct BoundaryPhases {
    bool beta_at_start = false;
    std::vector<double> jumps;

    bool is_beta(double s, double perimeter) const {
        s = std::fmod(std::fmod(s, perimeter) + perimeter, perimeter);
        const auto n = std::upper_bound(jumps.begin(), jumps.end(), s) - jumps.begin();
        return (n % 2 == 0) ? beta_at_start : !beta_at_start;
    }
};

// Well values and 𝒲 at each of them.
struct LimitConstants {
    double sigma_p = 0.0, c_p = 0.0, gamma_p = 0.0;
    double alpha = -1, beta = 1, alpha_p = -1, beta_p = 1;
    double Wcal_alpha = 0, Wcal_beta = 0, Wcal_alpha_p = 0, Wcal_beta_p = 0;

    double wall_density(bool u_beta, bool v_beta) const {
        return c_p * std::abs((u_beta ? Wcal_beta : Wcal_alpha) - (v_beta ? Wcal_beta_p : Wcal_alpha_p));
    }
};

inline LimitConstants make_limit_constants(const DoubleWell& W, const DoubleWell& V, double p, double gamma_p) {
    LimitConstants c;
    c.c_p = constant_c_p(p);
    c.sigma_p = constant_sigma_p(p, W);
    c.gamma_p = gamma_p;
    c.alpha = W.well_low();
    c.beta = W.well_high();
    c.alpha_p = V.well_low();
    c.beta_p = V.well_high();
    c.Wcal_alpha = antiderivative_W(W, p, c.alpha);
    c.Wcal_beta = antiderivative_W(W, p, c.beta);
    c.Wcal_alpha_p = antiderivative_W(W, p, c.alpha_p);
    c.Wcal_beta_p = antiderivative_W(W, p, c.beta_p);
    return c;
}

// A limit configuration on the rectangle [0,lx]×[0,ly].
struct LimitPair {
    double lx = 1.0, ly = 1.0;
    InterfaceSpec su;
    PhaseLabels labels;
    BoundaryPhases v;

    double perimeter() const { return 2.0 * (lx + ly); }

    Point boundary_point(double s) const {
        const double per = perimeter();
        s = std::fmod(std::fmod(s, per) + per, per);
        if (s < lx) return {s, 0.0};
        if (s < lx + ly) return {lx, s - lx};
        if (s < 2 * lx + ly) return {lx - (s - lx - ly), ly};
        return {0.0, ly - (s - 2 * lx - ly)};
    }

    Point inward_normal(double s) const {
        const double per = perimeter();
        s = std::fmod(std::fmod(s, per) + per, per);
        if (s < lx) return {0, 1};
        if (s < lx + ly) return {-1, 0};
        if (s < 2 * lx + ly) return {0, -1};
        return {1, 0};
    }

    Point tangent(double s) const {
        const Point n = inward_normal(s);
        return {n.y, -n.x};  // counterclockwise direction
    }

    double arclength(Point b) const {
        const double tol = 1e-12 * (lx + ly);
        if (std::abs(b.y) <= tol && b.x < lx - tol) return std::max(0.0, b.x);
        if (std::abs(b.x - lx) <= tol && b.y < ly - tol) return lx + std::max(0.0, b.y);
        if (std::abs(b.y - ly) <= tol && b.x > tol) return lx + ly + (lx - b.x);
        return 2.0 * lx + ly + (ly - b.y);
    }

    bool on_boundary(Point b) const {
        const double tol = 1e-9 * (lx + ly);
        return std::min({std::abs(b.x), std::abs(b.y), std::abs(lx - b.x), std::abs(ly - b.y)}) <= tol;
    }

    bool bulk_is_beta(Point x) const { return labels.is_beta(su, x); }

    // Tu at arclength s: the bulk label just inside the boundary.
    bool trace_is_beta(double s) const {
        const Point b = boundary_point(s), n = inward_normal(s);
        const double e = 1e-9 * (lx + ly);
        return bulk_is_beta({b.x + e * n.x, b.y + e * n.y});
    }

    // Arclengths where Su meets ∂Ω.
    std::vector<double> contact_points() const {
        std::vector<double> out;
        for (const Point& q : su.vertices)
            if (on_boundary(q)) out.push_back(arclength(q));
        std::sort(out.begin(), out.end());
        return out;
    }

    void validate() const {
        if (!(lx > 0 && ly > 0)) throw ConfigError("limit pair needs a positive rectangle");
        if (v.jumps.size() % 2 != 0)
            throw ConfigError("boundary phase must have an even number of jumps on a closed loop");
        for (std::size_t i = 0; i < v.jumps.size(); ++i) {
            if (!(v.jumps[i] > 0.0 && v.jumps[i] < perimeter()))
                throw ConfigError("boundary jump outside (0, perimeter)");
            if (i > 0 && !(v.jumps[i] > v.jumps[i - 1])) throw ConfigError("boundary jumps must increase");
        }
        if (!su.empty() && !su.is_simple()) throw ConfigError("interface polyline is not simple");
        for (const Point& q : su.vertices)
            if (q.x < -1e-12 || q.y < -1e-12 || q.x > lx + 1e-12 || q.y > ly + 1e-12)
                throw ConfigError("interface vertex outside the domain");
    }
};

struct PhiValue {
    double surface = 0.0, wall = 0.0, line = 0.0, total = 0.0;
};

inline nlohmann::ordered_json to_json(const PhiValue& f) {
    return {{"surface", f.surface}, {"wall", f.wall}, {"line", f.line}, {"total", f.total}};
}

// σ_p|Su| + c_p∫|𝒲(Tu) − 𝒲(v)| + γ_p #Sv, with the wall integral summed exactly piece by piece.
inline PhiValue phi_energy(const LimitPair& pair, const LimitConstants& c) {
    PhiValue f;
    f.surface = c.sigma_p * pair.su.length();
    std::vector<double> cuts{0.0, pair.perimeter()};
    for (double s : pair.v.jumps) cuts.push_back(s);
    for (double s : pair.contact_points()) cuts.push_back(s);
    for (double s : {pair.lx, pair.lx + pair.ly, 2 * pair.lx + pair.ly}) cuts.push_back(s);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<double> pieces;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1], mid = 0.5 * (a + b);
        pieces.push_back(c.wall_density(pair.trace_is_beta(mid), pair.v.is_beta(mid, pair.perimeter())) * (b - a));
    }
    f.wall = pairwise_sum(pieces);
    f.line = c.gamma_p * static_cast<double>(pair.v.jumps.size());
    f.total = f.surface + f.wall + f.line;
    return f;
}

// ---- boundary phase minimisation on a cycle ----

struct PhaseChoice {
    std::vector<int> labels;  // 0 = α', 1 = β'
    double value = 0.0;
    int jumps = 0;
};

// Canonical left-to-right cost of a labelling; the DP accumulates in the same order.
inline double labelling_cost(const std::vector<std::array<double, 2>>& cost, const std::vector<int>& lab,
                             double gamma) {
    double acc = 0.0;
    const std::size_t n = cost.size();
    for (std::size_t i = 0; i < n; ++i) {
        acc = acc + cost[i][lab[i]];
        if (i > 0 && lab[i] != lab[i - 1]) acc = acc + gamma;
    }
    if (n > 1 && lab[n - 1] != lab[0]) acc = acc + gamma;
    return acc;
}

inline int count_jumps(const std::vector<int>& lab) {
    const std::size_t n = lab.size();
    if (n < 2) return 0;
    int j = 0;
    for (std::size_t i = 0; i < n; ++i) j += lab[i] != lab[(i + 1) % n];
    return j;
}

namespace detail {
struct LexCost {
    double v = std::numeric_limits<double>::infinity();
    int jumps = 0, betas = 0;
    bool operator<(const LexCost& o) const {
        if (v != o.v) return v < o.v;
        if (jumps != o.jumps) return jumps < o.jumps;
        return betas < o.betas;
    }
};
}  // namespace detail

// Exact minimiser over all 2ⁿ labellings; ties go to fewer jumps, then to more α'.
inline PhaseChoice minimize_phi_over_v(const std::vector<std::array<double, 2>>& cost, double gamma) {
    using detail::LexCost;
    const std::size_t n = cost.size();
    if (n == 0) throw ConfigError("boundary discretisation needs at least one segment");
    PhaseChoice best;
    LexCost best_c;
    for (int first = 0; first < 2; ++first) {
        std::vector<std::array<LexCost, 2>> dp(n);
        std::vector<std::array<int, 2>> from(n, {-1, -1});
        dp[0][first] = {cost[0][first], 0, first};
        for (std::size_t i = 1; i < n; ++i)
            for (int l = 0; l < 2; ++l)
                for (int k = 0; k < 2; ++k) {
                    const LexCost& pr = dp[i - 1][k];
                    if (!std::isfinite(pr.v)) continue;
                    LexCost c{pr.v + cost[i][l], pr.jumps + (k != l), pr.betas + l};
                    if (k != l) c.v = c.v + gamma;
                    if (c < dp[i][l]) dp[i][l] = c, from[i][l] = k;
                }
        for (int l = 0; l < 2; ++l) {
            LexCost c = dp[n - 1][l];
            if (!std::isfinite(c.v)) continue;
            if (n > 1 && l != first) c.v = c.v + gamma, c.jumps += 1;
            if (c < best_c) {
                best_c = c;
                best.labels.assign(n, 0);
                int cur = l;
                for (std::size_t i = n; i-- > 0;) {
                    best.labels[i] = cur;
                    if (i > 0) cur = from[i][cur];
                }
            }
        }
    }
    best.value = best_c.v;
    best.jumps = best_c.jumps;
    return best;
}

// Wall cost per label for n equal segments of the boundary loop, with Tu read at segment midpoints.
inline std::vector<std::array<double, 2>> boundary_wall_costs(const LimitPair& pair, const LimitConstants& c,
                                                               int n) {
    if (n < 1) throw ConfigError("boundary discretisation needs at least one segment");
    const double len = pair.perimeter() / n;
    std::vector<std::array<double, 2>> cost(n);
    for (int i = 0; i < n; ++i) {
        const bool tu = pair.trace_is_beta((i + 0.5) * len);
        cost[i] = {c.wall_density(tu, false) * len, c.wall_density(tu, true) * len};
    }
    return cost;
}

// The pair with v replaced by a segment labelling.
inline LimitPair with_boundary_labels(LimitPair pair, const std::vector<int>& lab) {
    const std::size_t n = lab.size();
    const double len = pair.perimeter() / static_cast<double>(n);
    pair.v.beta_at_start = lab[0] == 1;
    pair.v.jumps.clear();
    for (std::size_t i = 1; i < n; ++i)
        if (lab[i] != lab[i - 1]) pair.v.jumps.push_back(static_cast<double>(i) * len);
    return pair;
}

// ---- recovery builders ----

struct Recovery {
    Field u;
    bool warning = false;
    std::string note;
};

// θ(d'(x) (h(π(x))/ε)^k): the profile rescaled by the distance of the nearest interface point to ∂Ω.
inline double bulk_profile_value(const LimitPair& pair, const RectDomainGrid& g, Point x, double eps, double p,
                                 const ProfileSolution1D& prof) {
    const double a = prof.alpha, b = prof.beta;
    if (pair.su.empty()) return pair.bulk_is_beta(x) ? b : a;
    const Projection pr = pair.su.project(x);
    const double d = pr.dist == 0.0 ? 0.0 : (pair.bulk_is_beta(x) ? pr.dist : -pr.dist);
    const double hq = std::max(0.0, std::min({pr.q.x, pr.q.y, g.lx() - pr.q.x, g.ly() - pr.q.y}));
    const double k = (p - 2.0) / (p - 1.0);
    return prof.at(d * std::pow(hq / eps, k));
}

inline Recovery build_bulk_recovery(const LimitPair& pair, const RectDomainGrid& g, double eps, double p,
                                    const ProfileSolution1D& prof) {
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    Recovery r;
    r.u = Field(g.shape());
    for (int n = 0; n < g.shape().size(); ++n)
        r.u.values[n] = bulk_profile_value(pair, g, g.shape().node(n), eps, p, prof);
    if (!pair.su.empty()) {
        // fraction of Su whose layer reaches the wall
        const double ext = std::max(-prof.s_min(), prof.s_max()), k = (p - 2.0) / (p - 1.0);
        int hit = 0, tot = 0;
        for (std::size_t i = 0; i + 1 < pair.su.vertices.size(); ++i)
            for (int j = 0; j < 64; ++j, ++tot) {
                const Point a = pair.su.vertices[i], b = pair.su.vertices[i + 1];
                const double t = (j + 0.5) / 64.0;
                const Point q{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
                const double hq = g.distance_to_boundary(q);
                if (hq <= 0.0 || ext * std::pow(eps / hq, k) > hq) ++hit;
            }
        if (hit > tot / 10) {
            r.warning = true;
            r.note = "transition layer reaches the boundary on " + std::to_string(100 * hit / tot) + "% of Su";
        }
    }
    return r;
}

// Distance at which the wall layer of s-extent S ends: τ(h) = ε^k S with τ(h) = h^{(2p-3)/(p-1)}(p-1)/(2p-3).
inline double wall_layer_thickness(double eps, double p, double S) {
    const double k = (p - 2.0) / (p - 1.0), e = (2.0 * p - 3.0) / (p - 1.0);
    return std::pow(std::pow(eps, k) * S * e, 1.0 / e);
}

inline double wall_layer_variable(double h, double eps, double p) {
    const double k = (p - 2.0) / (p - 1.0), e = (2.0 * p - 3.0) / (p - 1.0);
    return std::pow(h, e) / e / std::pow(eps, k);
}

// Trace v on ∂Ω, then the 1D profile in τ(h)/ε^k toward the bulk well.
inline Recovery build_wall_recovery(double bulk_value, double boundary_value, double eps, double p,
                                    const RectDomainGrid& g, const TransitionMap& tmap) {
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (bulk_value != tmap.alpha() && bulk_value != tmap.beta())
        throw ConfigError("wall recovery needs a bulk well value");
    Recovery r;
    r.u = Field(g.shape());
    const Lattice2D& L = g.lattice();
    for (int n = 0; n < g.shape().size(); ++n)
        r.u.values[n] = tmap.transition(boundary_value, bulk_value, wall_layer_variable(L.h[n], eps, p));
    for (int n : L.boundary_nodes) r.u.values[n] = boundary_value;
    const double thick = wall_layer_thickness(eps, p, tmap.extent(boundary_value, bulk_value));
    if (2.0 * thick > std::min(g.lx(), g.ly())) {
        r.warning = true;
        r.note = "wall layer thicker than half the domain";
    }
    return r;
}

// Largest |u(x)-u(y)|/|x-y| over lattice edges (both legs and the anti-diagonal).
inline double lattice_lipschitz(const Field& u) {
    const GridShape& s = u.shape;
    double L = 0.0;
    for (int j = 0; j < s.ny; ++j)
        for (int i = 0; i < s.nx; ++i) {
            if (i + 1 < s.nx) L = std::max(L, std::abs(u(i + 1, j) - u(i, j)) / s.dx);
            if (j + 1 < s.ny) L = std::max(L, std::abs(u(i, j + 1) - u(i, j)) / s.dx);
            if (i + 1 < s.nx && j + 1 < s.ny)
                L = std::max(L, std::abs(u(i + 1, j) - u(i, j + 1)) / (s.dx * std::sqrt(2.0)));
        }
    return L;
}

// ψ on the whole half-plane: the minimizer inside radius r0, its radial projection outside.
class PsiProfile {
public:
    PsiProfile() = default;
    PsiProfile(Field psi, double alpha_p, double beta_p) : psi_(std::move(psi)), a_(alpha_p), b_(beta_p) {
        const GridShape& s = psi_.shape;
        const double R = std::min(-s.x0, s.x0 + (s.nx - 1) * s.dx), H = s.y0 + (s.ny - 1) * s.dx;
        r0_ = 0.75 * std::min(R, H);
    }
    double operator()(Point y) const {
        const double r = std::hypot(y.x, y.y);
        if (r > r0_) y = {y.x * r0_ / r, y.y * r0_ / r};
        return interpolate(psi_, y);
    }
    double alpha_p() const { return a_; }
    double beta_p() const { return b_; }
    double radius() const { return r0_; }
    const Field& field() const { return psi_; }

private:
    Field psi_;
    double a_ = -1, b_ = 1, r0_ = 1;
};

// ū = (θ/π)α' + (1-θ/π)β' about the origin.
inline double fan_value(Point y, double alpha_p, double beta_p) {
    const double th = (y.x == 0.0 && y.y <= 0.0) ? 0.5 * M_PI : std::atan2(std::max(0.0, y.y), y.x);
    return (th / M_PI) * alpha_p + (1.0 - th / M_PI) * beta_p;
}

struct CutoffRadii {
    double rho = 0.0, sigma = 0.0, b = 0.0;
};

// ρ = ε^b with b strictly between (p-2)/(2(p-1)) and 1/2 (default midpoint), σ = ρ/2.
inline CutoffRadii corrected_radii(double eps, double p, double b = -1.0) {
    const double lo = (p - 2.0) / (2.0 * (p - 1.0)), hi = 0.5;
    if (b < 0.0) b = 0.5 * (lo + hi);
    if (!(b > lo && b < hi)) throw ConfigError("cutoff exponent must lie strictly inside the admissible range");
    const double rho = std::pow(eps, b);
    return {rho, 0.5 * rho, b};
}

// The printed choice ρ = ε^{(p-2)/(p-1)}, σ = ε^{(p-2)/(2(p-1))}; σ > ρ for ε < 1.
inline CutoffRadii printed_radii(double eps, double p) {
    const double k = (p - 2.0) / (p - 1.0);
    return {std::pow(eps, k), std::pow(eps, 0.5 * k), k};
}

inline void check_cutoff_order(const CutoffRadii& c) {
    if (!(c.sigma < c.rho))
        throw ConfigError(
            "inner cutoff radius must be smaller than the outer one; the printed choice "
            "rho = eps^((p-2)/(p-1)), sigma = eps^((p-2)/(2(p-1))) reverses them for eps < 1");
}

// ψ(x/√ε) inside σ, ū outside ρ, linear radial blend between.
inline double boundary_patch_value(const PsiProfile& psi, Point x, double eps, const CutoffRadii& c) {
    const double r = std::hypot(x.x, x.y);
    const double ub = fan_value(x, psi.alpha_p(), psi.beta_p());
    if (r >= c.rho) return ub;
    const double se = std::sqrt(eps);
    const double ps = psi({x.x / se, x.y / se});
    if (r <= c.sigma) return ps;
    const double xi = (r - c.sigma) / (c.rho - c.sigma);
    return xi * ub + (1.0 - xi) * ps;
}

// Integrals over the cutoff construction, each without the 3^{p-1} factor.
struct BoundaryErrorTerms {
    double eps = 0.0, rho = 0.0, sigma = 0.0;
    double H_patch = 0.0;        // H_ε(w, D_ρ, E_ρ)
    double gamma_ref = 0.0;
    double psi_annulus = 0.0;    // ε^{p-2}∫_{D_ρ∖D_σ}|Dψ_ε|^p x₂^{2-p}
    double fan_annulus = 0.0;    // ε^{p-2}∫_{D_ρ∖D_σ}|Dū|^p x₂^{2-p}            ~ ε^{p-2}/ρ^{2(p-2)}
    double cutoff_bound = 0.0;   // ε^{p-2}∫_{D_ρ∖D_σ}(2m/(ρ-σ))^p x₂^{2-p}      ~ ε^{p-2}ρ^{4-p}/(ρ-σ)^p
    double cutoff_actual = 0.0;  // same with |ψ_ε - ū| in place of 2m
    double bulk_bound = 0.0;     // ε^{-k}∫_{D_ρ}W(w)                           ~ ρ²/ε^k
    double bulk_weighted = 0.0;  // ε^{-k}∫_{D_ρ}W(w)h^k
};

inline nlohmann::ordered_json to_json(const BoundaryErrorTerms& t) {
    return {{"eps", t.eps},
            {"rho", t.rho},
            {"sigma", t.sigma},
            {"H_patch", t.H_patch},
            {"gamma_ref", t.gamma_ref},
            {"psi_annulus", t.psi_annulus},
            {"fan_annulus", t.fan_annulus},
            {"cutoff_bound", t.cutoff_bound},
            {"cutoff_actual", t.cutoff_actual},
            {"bulk_bound", t.bulk_bound},
            {"bulk_weighted", t.bulk_weighted}};
}

struct BoundaryRecovery {
    HalfPlaneGrid grid;
    Field w;
    BoundaryErrorTerms terms;
};

// Builds w_ε on [-ρ,ρ]×[0,ρ] with spacing min(ρ/cells, √ε·psi_spacing) and measures the error integrals.
inline BoundaryRecovery build_boundary_recovery(const PsiProfile& psi, double gamma_ref, double eps,
                                                const CutoffRadii& c, double p, const DoubleWell& W,
                                                const DoubleWell& V, double m, int cells = 48,
                                                double max_nodes = 2.5e6) {
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    check_cutoff_order(c);
    double delta = std::min(c.rho / cells, std::sqrt(eps) * psi.field().shape.dx);
    int n = static_cast<int>(std::ceil(c.rho / delta));
    if (2.0 * n * n > max_nodes) n = static_cast<int>(std::sqrt(max_nodes / 2.0));
    delta = c.rho / n;
    BoundaryRecovery out{HalfPlaneGrid(c.rho, c.rho, delta, p), Field(), {}};
    const GridShape& s = out.grid.shape();
    const Lattice2D& L = out.grid.lattice();
    out.w = Field(s);
    Field ub(s), ps(s);
    const double se = std::sqrt(eps);
    for (int q = 0; q < s.size(); ++q) {
        const Point x = s.node(q);
        out.w.values[q] = boundary_patch_value(psi, x, eps, c);
        ub.values[q] = fan_value(x, psi.alpha_p(), psi.beta_p());
        ps.values[q] = psi({x.x / se, x.y / se});
    }
    const double k = (p - 2.0) / (p - 1.0), cg = std::pow(eps, p - 2.0), ck = std::pow(eps, -k), dx2 = delta * delta;
    std::vector<char> in_disk(L.tri.size()), in_ann(L.tri.size());
    for (std::size_t t = 0; t < L.tri.size(); ++t) {
        Point cen{0, 0};
        for (int v : L.tri[t]) {
            const Point x = s.node(v);
            cen.x += x.x / 3.0;
            cen.y += x.y / 3.0;
        }
        const double r = std::hypot(cen.x, cen.y);
        in_disk[t] = r < c.rho;
        in_ann[t] = r < c.rho && r > c.sigma;
    }
    std::vector<double> hp_g, psi_a, fan_a, cb, ca, bb, bw;
    for (std::size_t t = 0; t < L.tri.size(); ++t) {
        if (!in_disk[t]) continue;
        const auto& T = L.tri[t];
        auto grad2 = [&](const Field& f) {
            const double a = f.values[T[1]] - f.values[T[0]], b = f.values[T[2]] - f.values[T[0]];
            return (a * a + b * b) / dx2;
        };
        hp_g.push_back(cg * detail::pterm(L.wgrad[t], grad2(out.w), p));
        const IntervalMax wm = W.max_on(std::min({out.w.values[T[0]], out.w.values[T[1]], out.w.values[T[2]]}),
                                        std::max({out.w.values[T[0]], out.w.values[T[1]], out.w.values[T[2]]}));
        bb.push_back(ck * 0.5 * dx2 * wm.value);
        bw.push_back(ck * L.wbulk[t] * wm.value);
        if (!in_ann[t]) continue;
        psi_a.push_back(cg * detail::pterm(L.wgrad[t], grad2(ps), p));
        fan_a.push_back(cg * detail::pterm(L.wgrad[t], grad2(ub), p));
        const double slope = 1.0 / (c.rho - c.sigma);
        cb.push_back(cg * L.wgrad[t] * std::pow(2.0 * m * slope, p));
        double gap = 0.0;
        for (int v : T) gap = std::max(gap, std::abs(ps.values[v] - ub.values[v]));
        ca.push_back(cg * L.wgrad[t] * std::pow(gap * slope, p));
    }
    std::vector<double> hp_b;
    for (std::size_t e = 0; e < L.bedge.size(); ++e) {
        const Point x0 = s.node(L.bedge[e][0]), x1 = s.node(L.bedge[e][1]);
        if (std::abs(0.5 * (x0.x + x1.x)) >= c.rho) continue;
        hp_b.push_back(L.blen[e] * V.max_on(out.w.values[L.bedge[e][0]], out.w.values[L.bedge[e][1]]).value / se);
    }
    BoundaryErrorTerms& t = out.terms;
    t.eps = eps;
    t.rho = c.rho;
    t.sigma = c.sigma;
    t.gamma_ref = gamma_ref;
    t.H_patch = pairwise_sum(hp_g) + pairwise_sum(hp_b);
    t.psi_annulus = pairwise_sum(psi_a);
    t.fan_annulus = pairwise_sum(fan_a);
    t.cutoff_bound = pairwise_sum(cb);
    t.cutoff_actual = pairwise_sum(ca);
    t.bulk_bound = pairwise_sum(bb);
    t.bulk_weighted = pairwise_sum(bw);
    return out;
}

struct LipschitzExtension {
    Field u;
    double lip_v = 0.0, lip_u = 0.0, lip_bound = 0.0;
    double omega = 0.0, well = 0.0;
    EnergyBreakdown G;
    double bound = 0.0;  // ((ε^k Lip v + 1)^p + C_m)·|∂Ω|·ω
};

// Extension of boundary data v (boundary-node order) into the rectangle: McShane extension clamped
// to the range of v, moved linearly to the nearest well within distance ω ε^k of ∂Ω.
inline LipschitzExtension build_lipschitz_extension(const RectDomainGrid& g, const std::vector<double>& v,
                                                    double eps, double p, const DoubleWell& W, double m) {
    const Lattice2D& L = g.lattice();
    if (v.size() != L.boundary_nodes.size()) throw ConfigError("boundary data does not match the grid");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    const double k = (p - 2.0) / (p - 1.0), ek = std::pow(eps, k);
    LipschitzExtension out;
    std::vector<Point> b;
    for (int n : L.boundary_nodes) b.push_back(g.shape().node(n));
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
            out.lip_v = std::max(out.lip_v, std::abs(v[i] - v[j]) / dist(b[i], b[j]));
    const double vmin = *std::min_element(v.begin(), v.end()), vmax = *std::max_element(v.begin(), v.end());
    double oa = 0.0, ob = 0.0;
    for (double x : v) {
        oa = std::max(oa, std::abs(x - W.well_low()));
        ob = std::max(ob, std::abs(x - W.well_high()));
    }
    out.omega = std::min(oa, ob);
    out.well = oa <= ob ? W.well_low() : W.well_high();
    out.u = Field(g.shape());
    for (int n = 0; n < g.shape().size(); ++n) {
        const Point x = g.shape().node(n);
        double ext = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < v.size(); ++i) ext = std::min(ext, v[i] + out.lip_v * dist(x, b[i]));
        ext = std::clamp(ext, vmin, vmax);
        const double t = out.omega > 0.0 ? std::min(1.0, L.h[n] / (out.omega * ek)) : 1.0;
        out.u.values[n] = (1.0 - t) * ext + t * out.well;
    }
    for (std::size_t i = 0; i < v.size(); ++i) out.u.values[L.boundary_nodes[i]] = v[i];
    out.lip_u = lattice_lipschitz(out.u);
    out.lip_bound = 1.0 / ek + out.lip_v;
    out.G = bulk_energy_G(out.u, L, eps, W);
    const double Cm = std::max({W(-m), W(m), W(W.hump())});
    out.bound = (std::pow(ek * out.lip_v + 1.0, p) + Cm) * g.perimeter() * out.omega;
    return out;
}

// ---- global assembly ----

// The requested partition cannot be drawn on this domain at this ε; the CLI maps it to exit code 1.
struct InfeasiblePartition : Error {
    using Error::Error;
};

struct AssemblyOptions {
    double r = 0.25;    // partition radius
    double b = -1.0;    // cutoff exponent (midpoint when negative)
    double lambda_factor = 2.0;  // patch radius λ = factor·ρ; 0 uses the full wall-layer thickness
};

struct RegionEnergy {
    std::string name;
    EnergyBreakdown energy;
};

struct GlobalRecovery {
    Field u;
    EnergyBreakdown total;
    std::vector<RegionEnergy> regions;  // A1, A2, B1, B2
    CutoffRadii radii;
    double lambda = 0.0;
    bool warning = false;
    std::string note;
};

// Points where Su crosses the level set {h = r}.
inline std::vector<Point> interface_level_crossings(const LimitPair& pair, double r) {
    std::vector<Point> out;
    auto hf = [&](Point x) { return std::min({x.x, x.y, pair.lx - x.x, pair.ly - x.y}) - r; };
    for (std::size_t i = 0; i + 1 < pair.su.vertices.size(); ++i) {
        const Point a = pair.su.vertices[i], b = pair.su.vertices[i + 1];
        auto at = [&](double t) { return Point{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; };
        const int N = 512;
        for (int j = 0; j < N; ++j) {
            double t0 = double(j) / N, t1 = double(j + 1) / N;
            double f0 = hf(at(t0)), f1 = hf(at(t1));
            if (f0 == 0.0) {
                out.push_back(at(t0));
                continue;
            }
            if ((f0 < 0) == (f1 < 0) || f1 == 0.0) continue;
            for (int it = 0; it < 100; ++it) {
                const double tm = 0.5 * (t0 + t1), fm = hf(at(tm));
                if ((fm < 0) == (f0 < 0)) t0 = tm, f0 = fm;
                else t1 = tm;
            }
            out.push_back(at(0.5 * (t0 + t1)));
        }
        if (i + 2 == pair.su.vertices.size() && hf(b) == 0.0) out.push_back(b);
    }
    return out;
}

struct AssemblyInputs {
    const DoubleWell* W = nullptr;
    const DoubleWell* V = nullptr;
    double p = 2.5;
    const ProfileSolution1D* profile = nullptr;
    const TransitionMap* tmap = nullptr;
    const PsiProfile* psi = nullptr;
};

// Bulk recovery away from ∂Ω, wall recovery in {h<r}, linear glue in {r<h<2r}. Around each boundary
// jump: the ψ/ū patch up to λ, a blend on [λ,2λ] to the wall profile started from ū instead of v,
// and a blend on [2.5r,3r] back to the outer field.
inline GlobalRecovery assemble_global_recovery(const LimitPair& pair, const RectDomainGrid& g, double eps,
                                               const AssemblyInputs& in, const AssemblyOptions& opt) {
    pair.validate();
    if (!in.W || !in.V || !in.profile || !in.tmap || !in.psi) throw ConfigError("assembly inputs incomplete");
    if (std::abs(g.lx() - pair.lx) > 1e-12 || std::abs(g.ly() - pair.ly) > 1e-12)
        throw ConfigError("grid and limit pair describe different rectangles");
    const double p = in.p, r = opt.r, per = pair.perimeter();
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    const double k = (p - 2.0) / (p - 1.0);
    if (!(r > std::pow(eps, k))) throw InfeasiblePartition("partition radius must exceed eps^((p-2)/(p-1))");
    if (!(4.0 * r < std::min(pair.lx, pair.ly))) throw InfeasiblePartition("partition radius too large: A2 is empty");
    GlobalRecovery out;
    out.radii = corrected_radii(eps, p, opt.b);
    check_cutoff_order(out.radii);
    const TransitionMap& tm = *in.tmap;
    double S = 0.0;
    for (double from : {in.V->well_low(), in.V->well_high()})
        for (double to : {in.W->well_low(), in.W->well_high()}) S = std::max(S, tm.extent(from, to));
    const double lam_eps = opt.lambda_factor > 0.0 ? opt.lambda_factor * out.radii.rho : wall_layer_thickness(eps, p, S);
    out.lambda = std::min(lam_eps, 1.25 * r);
    if (lam_eps > 1.25 * r) {
        out.warning = true;
        out.note = "wall layer thicker than the partition allows; patch radius capped";
    }
    if (!(out.radii.rho < out.lambda))
        throw InfeasiblePartition("cutoff radius rho exceeds the patch radius; partition infeasible at this eps");
    // jump points with local frames
    struct Jump {
        Point P, t, n;
        bool flip;
    };
    std::vector<Jump> jumps;
    const std::vector<double> corners{0.0, pair.lx, pair.lx + pair.ly, 2 * pair.lx + pair.ly, per};
    for (std::size_t i = 0; i < pair.v.jumps.size(); ++i) {
        const double s = pair.v.jumps[i];
        for (double c : corners)
            if (std::abs(s - c) < 3.0 * r)
                throw InfeasiblePartition("partition infeasible: a boundary jump lies within 3r of a corner");
        const bool before = pair.v.is_beta(s - 1e-9 * per, per);
        jumps.push_back({pair.boundary_point(s), pair.tangent(s), pair.inward_normal(s), before});
    }
    for (std::size_t i = 0; i < jumps.size(); ++i)
        for (std::size_t j = i + 1; j < jumps.size(); ++j)
            if (dist(jumps[i].P, jumps[j].P) < 6.0 * r)
                throw InfeasiblePartition("partition infeasible: boundary jumps closer than 6r");
    std::vector<Point> centres;
    for (const Jump& J : jumps) centres.push_back(J.P);
    for (const Point& q : interface_level_crossings(pair, r)) centres.push_back(q);

    const GridShape& s = g.shape();
    const Lattice2D& L = g.lattice();
    const double a_p = in.V->well_low(), b_p = in.V->well_high();
    out.u = Field(s);
    for (int q = 0; q < s.size(); ++q) {
        const Point x = s.node(q);
        const double h = L.h[q];
        const double ub = bulk_profile_value(pair, g, x, eps, p, *in.profile);
        const double xi = std::clamp((2.0 * r - h) / r, 0.0, 1.0);
        const double tau = wall_layer_variable(h, eps, p);
        auto outer = [&](double from) {
            if (xi == 0.0) return ub;
            return xi * tm.transition(from, ub, tau) + (1.0 - xi) * ub;
        };
        const Point b = g.project_to_boundary(x);
        const double vb = pair.v.is_beta(pair.arclength(b), per) ? b_p : a_p;
        double val = outer(vb);
        for (const Jump& J : jumps) {
            const double d = dist(x, J.P);
            if (d >= 3.0 * r) continue;
            Point y{(x.x - J.P.x) * J.t.x + (x.y - J.P.y) * J.t.y, (x.x - J.P.x) * J.n.x + (x.y - J.P.y) * J.n.y};
            if (J.flip) y.x = -y.x;  // β' sits on the positive side of the local frame
            y.y = std::max(0.0, y.y);
            const double fan = fan_value(y, a_p, b_p);
            const double inner_out = outer(fan);
            double w;
            if (d < out.lambda) {
                w = boundary_patch_value(*in.psi, y, eps, out.radii);
            } else if (d < 2.0 * out.lambda) {
                const double z = (d - out.lambda) / out.lambda;
                w = (1.0 - z) * boundary_patch_value(*in.psi, y, eps, out.radii) + z * inner_out;
            } else {
                w = inner_out;
            }
            if (d > 2.5 * r) {
                const double z = (d - 2.5 * r) / (0.5 * r);
                w = (1.0 - z) * w + z * val;
            }
            val = w;
        }
        out.u.values[q] = val;
    }
    // region accounting
    auto region_of = [&](Point c, double h) {
        for (const Point& P : centres)
            if (dist(c, P) < 3.0 * r) return 2;  // B1
        if (h < r) return 0;                      // A1
        if (h < 2.0 * r) return 3;                // B2
        return 1;                                 // A2
    };
    const int ncell = static_cast<int>(L.cell_count());
    std::array<std::vector<char>, 4> cells, edges;
    for (auto& c : cells) c.assign(ncell, 0);
    for (auto& e : edges) e.assign(L.bedge.size(), 0);
    for (int c = 0; c < ncell; ++c) {
        const int i = c % (s.nx - 1), j = c / (s.nx - 1);
        const Point ctr{s.x0 + (i + 0.5) * s.dx, s.y0 + (j + 0.5) * s.dx};
        cells[region_of(ctr, g.distance_to_boundary(ctr))][c] = 1;
    }
    for (std::size_t e = 0; e < L.bedge.size(); ++e) {
        const Point x0 = s.node(L.bedge[e][0]), x1 = s.node(L.bedge[e][1]);
        edges[region_of({0.5 * (x0.x + x1.x), 0.5 * (x0.y + x1.y)}, 0.0)][e] = 1;
    }
    const char* names[4] = {"A1", "A2", "B1", "B2"};
    for (int rg = 0; rg < 4; ++rg)
        out.regions.push_back({names[rg], full_energy_F(out.u, g, eps, *in.W, *in.V, &cells[rg], &edges[rg])});
    out.total = full_energy_F(out.u, g, eps, *in.W, *in.V);
    return out;
}

}  // namespace glab

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"
#include "json.hpp"
#include "potentials.hpp"
#include "quadrature.hpp"

namespace glab {

struct EnergyBreakdown {
    double grad = 0.0, bulk = 0.0, boundary = 0.0, total = 0.0;
    double eps = 1.0, p = 2.5;
};

inline nlohmann::ordered_json to_json(const EnergyBreakdown& e) {
    return {{"grad", e.grad}, {"bulk", e.bulk}, {"boundary", e.boundary},
            {"total", e.total}, {"eps", e.eps}, {"p", e.p}};
}

inline EnergyBreakdown energy_from_json(const nlohmann::json& j) {
    EnergyBreakdown e;
    e.grad = j.at("grad").get<double>();
    e.bulk = j.at("bulk").get<double>();
    e.boundary = j.at("boundary").get<double>();
    e.total = j.at("total").get<double>();
    e.eps = j.at("eps").get<double>();
    e.p = j.at("p").get<double>();
    return e;
}

// Which terms to include and on which cells / boundary edges.
struct EnergyTerms {
    double eps = 1.0;
    const DoubleWell* W = nullptr;  // bulk potential, null drops the term
    const DoubleWell* V = nullptr;  // wall potential, null drops the term
    const std::vector<char>* cells = nullptr;  // (nx-1)(ny-1) cell mask
    const std::vector<char>* edges = nullptr;  // boundary-edge mask
};

namespace detail {

// w · |D|^p written through |D|² so sliced and unsliced sums agree bitwise.
inline double pterm(double w, double d2, double p) {
    return d2 > 0.0 ? w * d2 * std::pow(d2, 0.5 * (p - 2.0)) : 0.0;
}

}  // namespace detail

// Discrete energy on a lattice. P1 gradient with exact ∫_T h^{2-p}; the bulk and wall
// integrands take the max of the potential over the hull of the element's nodal values,
// which keeps the Young bound, truncation monotonicity and refinement nesting exact.
inline EnergyBreakdown evaluate_energy(const Lattice2D& L, const Field& u, const EnergyTerms& t,
                                       std::vector<double>* grad = nullptr) {
    if (u.shape != L.shape) throw Error("field does not live on this lattice");
    if (!(t.eps > 0.0)) throw ConfigError("eps must be positive");
    const double p = L.p, dx2 = L.shape.dx * L.shape.dx;
    const double k = (p - 2.0) / (p - 1.0);
    const double cg = std::pow(t.eps, p - 2.0), cb = std::pow(t.eps, -k), cw = 1.0 / std::sqrt(t.eps);
    const std::size_t nt = L.tri.size();
    std::vector<double> gterm(nt, 0.0), bterm(t.W ? nt : 0, 0.0);
    if (grad) grad->assign(u.size(), 0.0);
    const double* v = u.values.data();
    for (std::size_t e = 0; e < nt; ++e) {
        if (t.cells && !(*t.cells)[e / 2]) continue;
        const auto& T = L.tri[e];
        const double u0 = v[T[0]], u1 = v[T[1]], u2 = v[T[2]];
        const double a = u1 - u0, b = u2 - u0;
        const double d2 = (a * a + b * b) / dx2;
        if (d2 > 0.0) {
            const double s = std::pow(d2, 0.5 * (p - 2.0));
            gterm[e] = L.wgrad[e] * d2 * s;
            if (grad) {
                const double f = cg * L.wgrad[e] * p * s / dx2;
                (*grad)[T[1]] += f * a;
                (*grad)[T[2]] += f * b;
                (*grad)[T[0]] -= f * (a + b);
            }
        }
        if (t.W) {
            const double lo = std::min({u0, u1, u2}), hi = std::max({u0, u1, u2});
            const IntervalMax m = t.W->max_on(lo, hi);
            bterm[e] = L.wbulk[e] * m.value;
            if (grad && m.where != 2) {
                const double target = m.where == 0 ? lo : hi;
                const int node = (u0 == target) ? T[0] : (u1 == target) ? T[1] : T[2];
                (*grad)[node] += cb * L.wbulk[e] * t.W->derivative(target);
            }
        }
    }
    const std::size_t ne = L.bedge.size();
    std::vector<double> wterm(t.V ? ne : 0, 0.0);
    if (t.V)
        for (std::size_t e = 0; e < ne; ++e) {
            if (t.edges && !(*t.edges)[e]) continue;
            const double ua = v[L.bedge[e][0]], ub = v[L.bedge[e][1]];
            const IntervalMax m = t.V->max_on(ua, ub);
            wterm[e] = L.blen[e] * m.value;
            if (grad && m.where != 2) {
                const int node = L.bedge[e][m.where];
                (*grad)[node] += cw * L.blen[e] * t.V->derivative(m.at);
            }
        }
    EnergyBreakdown out;
    out.eps = t.eps;
    out.p = p;
    out.grad = cg * pairwise_sum(gterm);
    out.bulk = t.W ? cb * pairwise_sum(bterm) : 0.0;
    out.boundary = t.V ? cw * pairwise_sum(wterm) : 0.0;
    out.total = out.grad + out.bulk + out.boundary;
    return out;
}

inline EnergyBreakdown bulk_energy_G(const Field& u, const Lattice2D& L, double eps, const DoubleWell& W,
                                     const std::vector<char>* cells = nullptr) {
    EnergyTerms t;
    t.eps = eps;
    t.W = &W;
    t.cells = cells;
    return evaluate_energy(L, u, t);
}

inline EnergyBreakdown halfplane_energy_H(const Field& u, const HalfPlaneGrid& g, double eps,
                                          const DoubleWell& V) {
    EnergyTerms t;
    t.eps = eps;
    t.V = &V;
    return evaluate_energy(g.lattice(), u, t);
}

// F_ε(u, A, A') with optional cell mask A and boundary-edge mask A'.
inline EnergyBreakdown full_energy_F(const Field& u, const RectDomainGrid& g, double eps, const DoubleWell& W,
                                     const DoubleWell& V, const std::vector<char>* cells = nullptr,
                                     const std::vector<char>* edges = nullptr) {
    EnergyTerms t;
    t.eps = eps;
    t.W = &W;
    t.V = &V;
    t.cells = cells;
    t.edges = edges;
    return evaluate_energy(g.lattice(), u, t);
}

// c_p Σ_T |T|·|D_T 𝒲(u)|, same P1 stencil as the gradient term.
inline double modica_lower_bound(const Field& u, const Lattice2D& L, const AntiderivativeTable& Wcal) {
    const double p = L.p, dx = L.shape.dx;
    std::vector<double> w(u.size());
    for (std::size_t n = 0; n < u.size(); ++n) w[n] = Wcal(u.values[n]);
    std::vector<double> terms(L.tri.size());
    for (std::size_t e = 0; e < L.tri.size(); ++e) {
        const auto& T = L.tri[e];
        const double a = w[T[1]] - w[T[0]], b = w[T[2]] - w[T[0]];
        terms[e] = 0.5 * dx * std::hypot(a, b);
    }
    return constant_c_p(p) * pairwise_sum(terms);
}

// Σ_{i<j in J} |g_i - g_j|^p / |t_i - t_j|^{2(p-1)} · Δ² over nodes lo..hi of the trace.
inline double fractional_seminorm(const std::vector<double>& g, double delta, double p, std::size_t lo,
                                  std::size_t hi) {
    if (hi >= g.size() || hi < lo + 1) throw ConfigError("seminorm interval needs at least two nodes");
    std::vector<double> rows;
    rows.reserve(hi - lo);
    const double e = 2.0 * (p - 1.0);
    std::vector<double> row;
    for (std::size_t i = lo; i < hi; ++i) {
        row.clear();
        for (std::size_t j = i + 1; j <= hi; ++j) {
            const double d = std::abs(g[i] - g[j]);
            if (d == 0.0) continue;
            row.push_back(std::pow(d, p) / std::pow((j - i) * delta, e));
        }
        rows.push_back(pairwise_sum(row));
    }
    return pairwise_sum(rows) * delta * delta;
}

inline Field truncate_field(const Field& u, const TruncationLevel& m) {
    Field r = u;
    for (double& x : r.values) x = std::clamp(x, -m.m, m.m);
    return r;
}

struct RescaledField {
    HalfPlaneGrid grid;
    Field field;
    bool node_mapped = false;
};

// u^{(ε)}(x) = u(x/√ε) sampled with the original spacing on the dilated half-plane.
inline RescaledField rescale_field(const Field& u, const HalfPlaneGrid& g, double eps, bool allow_resample) {
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (u.shape != g.shape()) throw Error("field does not live on this grid");
    const double se = std::sqrt(eps), d = g.delta();
    const double ratio = 1.0 / se;
    const long r = std::lround(ratio);
    const double nxr = se * g.R() / d, nyr = se * g.H() / d;
    const bool mapped = r >= 1 && std::abs(ratio - r) < 1e-12 * ratio &&
                        std::abs(nxr - std::lround(nxr)) < 1e-9 && std::abs(nyr - std::lround(nyr)) < 1e-9;
    if (!mapped && !allow_resample)
        throw ConfigError("1/sqrt(eps) does not map lattice nodes to nodes; enable resampling");
    const long cx = mapped ? std::lround(nxr) : static_cast<long>(std::floor(nxr + 1e-9));
    const long cy = mapped ? std::lround(nyr) : static_cast<long>(std::floor(nyr + 1e-9));
    if (cx < 1 || cy < 1) throw ConfigError("dilated grid is smaller than one cell");
    RescaledField out{HalfPlaneGrid(cx * d, cy * d, d, g.p()), Field(), mapped};
    out.field = Field(out.grid.shape());
    const GridShape& s = out.grid.shape();
    for (int j = 0; j < s.ny; ++j)
        for (int i = 0; i < s.nx; ++i) {
            if (mapped) {
                const int si = static_cast<int>((g.shape().nx - 1) / 2 + (i - (s.nx - 1) / 2) * r);
                out.field(i, j) = u(si, static_cast<int>(j * r));
            } else {
                const Point x = s.node(s.index(i, j));
                out.field(i, j) = interpolate(u, {x.x / se, x.y / se});
            }
        }
    return out;
}

struct SliceBound {
    double lhs = 0.0, rhs = 0.0;
};

// lhs: prism discretisation of ε^{p-2}∫|Du|^p x₃^{2-p} + ε^{-1/2}∫_{x₃=0} V(Tu) on the half box;
// rhs: Σ_y Δ·H_ε(u^y) over the slices containing direction e (0 = x₁, 1 = x₂).
inline SliceBound slice_lower_bound(const Field3D& u, double p, double eps, const DoubleWell& V, int e = 0) {
    const HalfBox3D& B = u.box;
    const HalfPlaneGrid slice_grid(1.0, 1.0, B.dx, p);
    const Lattice2D& L = slice_grid.lattice();
    if (L.shape.nx != B.n || L.shape.ny != B.nz) throw Error("slice lattice mismatch");
    const double cg = std::pow(eps, p - 2.0), cw = 1.0 / std::sqrt(eps), dx2 = B.dx * B.dx;
    auto at = [&](int t, int y, int z) { return e == 0 ? u(t, y, z) : u(y, t, z); };
    std::vector<double> lhs_slices, rhs_slices;
    std::vector<double> g3(L.tri.size()), g2(L.tri.size()), wt(L.bedge.size());
    Field cur(L.shape), nxt(L.shape);
    for (int y = 0; y + 1 < B.n; ++y) {
        for (int z = 0; z < B.nz; ++z)
            for (int t = 0; t < B.n; ++t) {
                cur(t, z) = at(t, y, z);
                nxt(t, z) = at(t, y + 1, z);
            }
        for (std::size_t q = 0; q < L.tri.size(); ++q) {
            const auto& T = L.tri[q];
            const double a = cur.values[T[1]] - cur.values[T[0]], b = cur.values[T[2]] - cur.values[T[0]];
            const double d2 = (a * a + b * b) / dx2;
            double gy = 0.0;
            for (int c = 0; c < 3; ++c) gy += nxt.values[T[c]] - cur.values[T[c]];
            gy /= 3.0 * B.dx;
            g2[q] = detail::pterm(L.wgrad[q], d2, p);
            g3[q] = detail::pterm(L.wgrad[q], d2 + gy * gy, p);
        }
        for (std::size_t q = 0; q < L.bedge.size(); ++q)
            wt[q] = L.blen[q] * V.max_on(cur.values[L.bedge[q][0]], cur.values[L.bedge[q][1]]).value;
        const double bnd = cw * pairwise_sum(wt);
        lhs_slices.push_back(B.dx * (cg * pairwise_sum(g3) + bnd));
        rhs_slices.push_back(B.dx * (cg * pairwise_sum(g2) + bnd));
    }
    return {pairwise_sum(lhs_slices), pairwise_sum(rhs_slices)};
}

}  // namespace glab

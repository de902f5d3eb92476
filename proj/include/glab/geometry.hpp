#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "potentials.hpp"
#include "quadrature.hpp"

namespace glab {

struct Point {
    double x = 0.0, y = 0.0;
};

inline double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Exact ∫ of x₂^e over [y0, y0+Δ] times Δ. e must lie in (-1,0).
inline double weight_cell_integral(double y0, double delta, double exponent) {
    if (!(exponent > -1.0 && exponent < 0.0))
        throw ConfigError("weight exponent must lie in (-1,0)");
    if (y0 < 0.0 || !(delta > 0.0)) throw ConfigError("cell must satisfy y0 >= 0, delta > 0");
    const double y1 = y0 + delta, e1 = exponent + 1.0;
    return delta * (std::pow(y1, e1) - std::pow(y0, e1)) / e1;
}

namespace detail {

// ∫_{d0}^{d1} (d1-d) d^a  (corner_at_min) or ∫ (d-d0) d^a, exact up to rounding.
inline double tri_weight(double d0, double d1, double a, bool corner_at_min) {
    const double len = d1 - d0;
    if (d0 > 4.0 * len) {
        static const auto gl = [] {
            std::array<std::vector<double>, 2> r;
            gauss_legendre(10, r[0], r[1]);
            return r;
        }();
        const double c = 0.5 * (d0 + d1), h = 0.5 * len;
        double s = 0.0;
        for (int j = 0; j < 10; ++j) {
            const double d = c + h * gl[0][j];
            s += gl[1][j] * (corner_at_min ? (d1 - d) : (d - d0)) * std::pow(d, a);
        }
        return s * h;
    }
    const double i0 = (std::pow(d1, a + 1.0) - std::pow(d0, a + 1.0)) / (a + 1.0);
    const double i1 = (std::pow(d1, a + 2.0) - std::pow(d0, a + 2.0)) / (a + 2.0);
    return corner_at_min ? d1 * i0 - i1 : i1 - d0 * i0;
}

}  // namespace detail

// Node lattice with origin (x0,y0), nx*ny nodes, spacing dx. Node (i,j) has index i + j*nx.
struct GridShape {
    int nx = 0, ny = 0;
    double dx = 1.0, x0 = 0.0, y0 = 0.0;

    int size() const { return nx * ny; }
    int index(int i, int j) const { return i + j * nx; }
    Point node(int idx) const { return {x0 + (idx % nx) * dx, y0 + (idx / nx) * dx}; }
    bool operator==(const GridShape& o) const {
        return nx == o.nx && ny == o.ny && dx == o.dx && x0 == o.x0 && y0 == o.y0;
    }
    bool operator!=(const GridShape& o) const { return !(*this == o); }
};

struct Field {
    GridShape shape;
    std::vector<double> values;

    Field() = default;
    explicit Field(const GridShape& s, double fill = 0.0) : shape(s), values(s.size(), fill) {}

    double& operator()(int i, int j) { return values[shape.index(i, j)]; }
    double operator()(int i, int j) const { return values[shape.index(i, j)]; }
    std::size_t size() const { return values.size(); }
};

// Two right triangles per cell, split along the anti-diagonal. Each triangle stores
// [corner, x-neighbour, y-neighbour], so |Du|² = ((u1-u0)² + (u2-u0)²)/dx².
struct Lattice2D {
    GridShape shape;
    double p = 2.5;
    std::vector<std::array<int, 3>> tri;
    std::vector<double> wgrad;  // ∫_T h^{2-p}
    std::vector<double> wbulk;  // |T| · h(centroid)^{(p-2)/(p-1)}
    std::vector<std::array<int, 2>> bedge;
    std::vector<double> blen;
    std::vector<int> boundary_nodes;  // arclength order
    std::vector<double> h;            // distance to the boundary per node

    std::size_t cell_count() const { return tri.size() / 2; }
    double area(std::size_t) const { return 0.5 * shape.dx * shape.dx; }
};

// Which flat side a triangle measures its distance from.
enum class Side { bottom, left, right, top };

namespace detail {

inline double side_distance(Side s, Point q, double lx, double ly) {
    switch (s) {
        case Side::bottom: return q.y;
        case Side::left: return q.x;
        case Side::right: return lx - q.x;
        case Side::top: return ly - q.y;
    }
    return 0.0;
}

// Fills tri/wgrad/wbulk for a lattice whose triangles pick a side via `pick`.
template <class Pick>
void triangulate(Lattice2D& L, double lx, double ly, Pick&& pick) {
    const GridShape& s = L.shape;
    const double a = 2.0 - L.p, k = (L.p - 2.0) / (L.p - 1.0), dx = s.dx;
    L.tri.clear();
    L.wgrad.clear();
    L.wbulk.clear();
    L.tri.reserve(2 * (s.nx - 1) * (s.ny - 1));
    for (int j = 0; j + 1 < s.ny; ++j)
        for (int i = 0; i + 1 < s.nx; ++i) {
            const std::array<std::array<int, 3>, 2> ts = {
                std::array<int, 3>{s.index(i, j), s.index(i + 1, j), s.index(i, j + 1)},
                std::array<int, 3>{s.index(i + 1, j + 1), s.index(i, j + 1), s.index(i + 1, j)}};
            for (const auto& t : ts) {
                Point v[3];
                for (int q = 0; q < 3; ++q) {
                    v[q] = s.node(t[q]);
                    v[q].x -= s.x0;
                    v[q].y -= s.y0;
                }
                const Point c{(v[0].x + v[1].x + v[2].x) / 3.0, (v[0].y + v[1].y + v[2].y) / 3.0};
                const Side side = pick(c);
                double d[3];
                for (int q = 0; q < 3; ++q) d[q] = std::max(0.0, side_distance(side, v[q], lx, ly));
                const double dmin = std::min({d[0], d[1], d[2]});
                const double dmax = std::max({d[0], d[1], d[2]});
                const bool corner_at_min = d[0] == dmin;
                L.tri.push_back(t);
                L.wgrad.push_back(detail::tri_weight(dmin, dmax, a, corner_at_min));
                const double hc = (d[0] + d[1] + d[2]) / 3.0;
                L.wbulk.push_back(0.5 * dx * dx * (k == 0.0 ? 1.0 : std::pow(hc, k)));
            }
        }
}

}  // namespace detail

// Truncated half-plane [-R,R]×[0,H]; the trace row is x₂ = 0.
class HalfPlaneGrid {
public:
    HalfPlaneGrid() = default;
    HalfPlaneGrid(double R, double H, double delta, double p) : R_(R), H_(H) {
        if (!(R > 0 && H > 0 && delta > 0)) throw ConfigError("half-plane grid needs R, H, delta > 0");
        const double nxr = 2.0 * R / delta, nyr = H / delta;
        const int nx = static_cast<int>(std::lround(nxr)), ny = static_cast<int>(std::lround(nyr));
        if (std::abs(nxr - nx) > 1e-9 * nxr || std::abs(nyr - ny) > 1e-9 * nyr || nx < 1 || ny < 1)
            throw ConfigError("R and H must be integer multiples of the spacing");
        L_.shape = {nx + 1, ny + 1, delta, -R, 0.0};
        L_.p = p;
        detail::triangulate(L_, 2.0 * R, H, [](Point) { return Side::bottom; });
        for (int i = 0; i < L_.shape.nx; ++i) L_.boundary_nodes.push_back(i);
        for (int i = 0; i + 1 < L_.shape.nx; ++i) {
            L_.bedge.push_back({i, i + 1});
            L_.blen.push_back(delta);
        }
        L_.h.resize(L_.shape.size());
        for (int n = 0; n < L_.shape.size(); ++n) L_.h[n] = L_.shape.node(n).y;
    }

    const Lattice2D& lattice() const { return L_; }
    const GridShape& shape() const { return L_.shape; }
    double R() const { return R_; }
    double H() const { return H_; }
    double delta() const { return L_.shape.dx; }
    double p() const { return L_.p; }

    // Column index range of lateral Dirichlet nodes.
    bool is_lateral(int idx) const {
        const int i = idx % L_.shape.nx;
        return i == 0 || i == L_.shape.nx - 1;
    }

private:
    double R_ = 1.0, H_ = 1.0;
    Lattice2D L_;
};

// Rectangle [0,Lx]×[0,Ly] with the boundary loop traversed counterclockwise from (0,0).
class RectDomainGrid {
public:
    RectDomainGrid() = default;
    RectDomainGrid(double lx, double ly, double delta, double p) : lx_(lx), ly_(ly) {
        if (!(lx > 0 && ly > 0 && delta > 0)) throw ConfigError("rectangle needs Lx, Ly, delta > 0");
        const double nxr = lx / delta, nyr = ly / delta;
        const int nx = static_cast<int>(std::lround(nxr)), ny = static_cast<int>(std::lround(nyr));
        if (std::abs(nxr - nx) > 1e-9 * nxr || std::abs(nyr - ny) > 1e-9 * nyr || nx < 1 || ny < 1)
            throw ConfigError("Lx and Ly must be integer multiples of the spacing");
        L_.shape = {nx + 1, ny + 1, delta, 0.0, 0.0};
        L_.p = p;
        detail::triangulate(L_, lx, ly, [lx, ly](Point c) { return nearest_side(c, lx, ly); });
        const GridShape& s = L_.shape;
        for (int i = 0; i < s.nx - 1; ++i) L_.boundary_nodes.push_back(s.index(i, 0));
        for (int j = 0; j < s.ny - 1; ++j) L_.boundary_nodes.push_back(s.index(s.nx - 1, j));
        for (int i = s.nx - 1; i > 0; --i) L_.boundary_nodes.push_back(s.index(i, s.ny - 1));
        for (int j = s.ny - 1; j > 0; --j) L_.boundary_nodes.push_back(s.index(0, j));
        const std::size_t nb = L_.boundary_nodes.size();
        for (std::size_t q = 0; q < nb; ++q) {
            L_.bedge.push_back({L_.boundary_nodes[q], L_.boundary_nodes[(q + 1) % nb]});
            L_.blen.push_back(delta);
        }
        L_.h.resize(s.size());
        for (int n = 0; n < s.size(); ++n) L_.h[n] = distance_to_boundary(s.node(n));
    }

    static Side nearest_side(Point c, double lx, double ly) {
        Side best = Side::bottom;
        double d = c.y;
        if (c.x < d) d = c.x, best = Side::left;
        if (lx - c.x < d) d = lx - c.x, best = Side::right;
        if (ly - c.y < d) best = Side::top;
        return best;
    }

    double distance_to_boundary(Point x) const {
        const double tol = 1e-12 * std::max(lx_, ly_);
        if (x.x < -tol || x.y < -tol || x.x > lx_ + tol || x.y > ly_ + tol)
            throw ConfigError("point outside the rectangle");
        return std::max(0.0, std::min({x.x, x.y, lx_ - x.x, ly_ - x.y}));
    }

    // Nearest point on ∂Ω (ties resolved bottom, left, right, top).
    Point project_to_boundary(Point x) const {
        switch (nearest_side(x, lx_, ly_)) {
            case Side::bottom: return {x.x, 0.0};
            case Side::left: return {0.0, x.y};
            case Side::right: return {lx_, x.y};
            case Side::top: return {x.x, ly_};
        }
        return x;
    }

    // Arclength coordinate of a boundary point along the counterclockwise loop.
    double arclength(Point b) const {
        const double tol = 1e-12 * (lx_ + ly_);
        if (std::abs(b.y) <= tol && b.x < lx_ - tol) return b.x;
        if (std::abs(b.x - lx_) <= tol && b.y < ly_ - tol) return lx_ + b.y;
        if (std::abs(b.y - ly_) <= tol && b.x > tol) return lx_ + ly_ + (lx_ - b.x);
        return 2.0 * lx_ + ly_ + (ly_ - b.y);
    }

    Point boundary_point(double s) const {
        const double per = perimeter();
        s = std::fmod(std::fmod(s, per) + per, per);
        if (s < lx_) return {s, 0.0};
        if (s < lx_ + ly_) return {lx_, s - lx_};
        if (s < 2 * lx_ + ly_) return {lx_ - (s - lx_ - ly_), ly_};
        return {0.0, ly_ - (s - 2 * lx_ - ly_)};
    }

    const Lattice2D& lattice() const { return L_; }
    const GridShape& shape() const { return L_.shape; }
    double lx() const { return lx_; }
    double ly() const { return ly_; }
    double delta() const { return L_.shape.dx; }
    double perimeter() const { return 2.0 * (lx_ + ly_); }
    double p() const { return L_.p; }

private:
    double lx_ = 1.0, ly_ = 1.0;
    Lattice2D L_;
};

inline double distance_to_boundary(const RectDomainGrid& g, Point x) { return g.distance_to_boundary(x); }

// Half box [-1,1]²×[0,1] with cubic cells; x₃ = 0 is the wall.
struct HalfBox3D {
    int n = 33;  // nodes along x₁ and x₂
    int nz = 17;
    double dx = 1.0 / 16.0;

    HalfBox3D() = default;
    explicit HalfBox3D(int cells) : n(cells + 1), nz(cells / 2 + 1), dx(2.0 / cells) {
        if (cells < 2 || cells % 2 != 0) throw ConfigError("half box needs an even cell count");
        if (n > 49) throw ConfigError("half box is limited to 48 cells per side");
    }
    int size() const { return n * n * nz; }
    int index(int i1, int i2, int i3) const { return i1 + n * (i2 + n * i3); }
};

struct Field3D {
    HalfBox3D box;
    std::vector<double> values;
    explicit Field3D(const HalfBox3D& b, double fill = 0.0) : box(b), values(b.size(), fill) {}
    double& operator()(int a, int b, int c) { return values[box.index(a, b, c)]; }
    double operator()(int a, int b, int c) const { return values[box.index(a, b, c)]; }
};

// Trace row values in arclength order.
inline std::vector<double> trace(const Field& u, const Lattice2D& L) {
    if (u.shape != L.shape) throw Error("field does not live on this lattice");
    std::vector<double> t;
    t.reserve(L.boundary_nodes.size());
    for (int n : L.boundary_nodes) t.push_back(u.values[n]);
    return t;
}

// Piecewise-linear interpolation on the anti-diagonal triangulation; clamps to the lattice.
inline double interpolate(const Field& u, Point x) {
    const GridShape& s = u.shape;
    double fx = (x.x - s.x0) / s.dx, fy = (x.y - s.y0) / s.dx;
    fx = std::clamp(fx, 0.0, static_cast<double>(s.nx - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(s.ny - 1));
    int i = std::min(static_cast<int>(fx), s.nx - 2), j = std::min(static_cast<int>(fy), s.ny - 2);
    i = std::max(i, 0);
    j = std::max(j, 0);
    const double a = fx - i, b = fy - j;
    if (s.nx == 1 || s.ny == 1) return u.values[s.index(std::min(i, s.nx - 1), std::min(j, s.ny - 1))];
    if (a + b <= 1.0)
        return u(i, j) + a * (u(i + 1, j) - u(i, j)) + b * (u(i, j + 1) - u(i, j));
    return u(i + 1, j + 1) + (1.0 - a) * (u(i, j + 1) - u(i + 1, j + 1)) +
           (1.0 - b) * (u(i + 1, j) - u(i + 1, j + 1));
}

// CSV point cloud: x,y,value.
inline void write_field_csv(const Field& u, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write field file " + path);
    out << "x,y,value\n" << std::setprecision(17);
    for (int n = 0; n < u.shape.size(); ++n) {
        const Point q = u.shape.node(n);
        out << q.x << ',' << q.y << ',' << u.values[n] << '\n';
    }
    if (!out) throw Error("write failed for " + path);
}

inline Field read_field_csv(const std::string& path, const GridShape& shape) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read field file " + path);
    std::string line;
    std::getline(in, line);
    Field u(shape);
    for (int n = 0; n < shape.size(); ++n) {
        if (!std::getline(in, line)) throw Error("field file " + path + " is short");
        const auto c2 = line.rfind(',');
        u.values[n] = std::stod(line.substr(c2 + 1));
    }
    return u;
}

// ---- interfaces ----

struct Projection {
    Point q;
    double dist;
    int segment;
};

struct InterfaceSpec {
    std::vector<Point> vertices;  // polyline for Su; empty means no interface

    bool empty() const { return vertices.size() < 2; }

    double length() const {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < vertices.size(); ++i) s += dist(vertices[i], vertices[i + 1]);
        return s;
    }

    // Exact nearest point; ties go to the lowest segment index.
    Projection project(Point x) const {
        Projection best{{}, std::numeric_limits<double>::infinity(), -1};
        for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
            const Point a = vertices[i], b = vertices[i + 1];
            const double vx = b.x - a.x, vy = b.y - a.y, l2 = vx * vx + vy * vy;
            double t = l2 > 0 ? ((x.x - a.x) * vx + (x.y - a.y) * vy) / l2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const Point q{a.x + t * vx, a.y + t * vy};
            const double d = dist(x, q);
            if (d < best.dist) best = {q, d, static_cast<int>(i)};
        }
        return best;
    }

    bool is_simple() const {
        const std::size_t m = vertices.size();
        for (std::size_t i = 0; i + 1 < m; ++i)
            for (std::size_t j = i + 2; j + 1 < m; ++j)
                if (segments_cross(vertices[i], vertices[i + 1], vertices[j], vertices[j + 1]))
                    return false;
        return true;
    }

    static double orient(Point a, Point b, Point c) {
        return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    }

    static bool segments_cross(Point a, Point b, Point c, Point d) {
        const double o1 = orient(a, b, c), o2 = orient(a, b, d);
        const double o3 = orient(c, d, a), o4 = orient(c, d, b);
        return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != o2 && o3 != o4;
    }

    // Parity of crossings of the segment [a,b] with the polyline.
    int crossings(Point a, Point b) const {
        int c = 0;
        for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
            const Point s0 = vertices[i], s1 = vertices[i + 1];
            const double o1 = orient(a, b, s0), o2 = orient(a, b, s1);
            const double o3 = orient(s0, s1, a), o4 = orient(s0, s1, b);
            // half-open in the polyline parameter so shared vertices count once
            if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0))) ++c;
        }
        return c;
    }
};

// Reference cell label: which side of Su carries β.
struct PhaseLabels {
    Point ref{0.0, 0.0};
    bool ref_is_beta = false;

    bool is_beta(const InterfaceSpec& s, Point x) const {
        if (s.empty()) return ref_is_beta;
        return (s.crossings(ref, x) % 2 == 0) ? ref_is_beta : !ref_is_beta;
    }
};

// +dist on the β side, -dist on the α side.
inline double signed_distance_to_interface(const InterfaceSpec& s, const PhaseLabels& lab, Point x) {
    if (s.empty()) return lab.ref_is_beta ? std::numeric_limits<double>::infinity()
                                          : -std::numeric_limits<double>::infinity();
    const double d = s.project(x).dist;
    if (d == 0.0) return 0.0;
    return lab.is_beta(s, x) ? d : -d;
}

}  // namespace glab

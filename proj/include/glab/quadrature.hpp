#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace glab {

// Raised when adaptive quadrature cannot reach the requested tolerance.
struct QuadratureError : std::runtime_error {
    double achieved;
    QuadratureError(const std::string& what, double est)
        : std::runtime_error(what), achieved(est) {}
};

namespace detail {

// Gauss-Kronrod 7/15 nodes on [-1,1]; kronrod nodes listed with the gauss ones at odd index.
inline constexpr std::array<double, 8> gk15_x = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> gk15_wk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gk15_wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkResult {
    double value;
    double error;
};

template <class F>
GkResult gk15(F&& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = f(c);
    double rk = fc * gk15_wk[7];
    double rg = fc * gk15_wg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * gk15_x[j];
        const double f1 = f(c - dx), f2 = f(c + dx);
        rk += gk15_wk[j] * (f1 + f2);
        if (j % 2 == 1) rg += gk15_wg[j / 2] * (f1 + f2);
    }
    return {rk * h, std::abs((rk - rg) * h)};
}

template <class F>
void gk_adapt(F& f, double a, double b, double tol, int depth, double& sum, double& err,
              int max_depth) {
    const GkResult r = gk15(f, a, b);
    if (r.error <= tol || depth >= max_depth || std::abs(b - a) < 1e-15 * (1.0 + std::abs(a))) {
        sum += r.value;
        err += r.error;
        return;
    }
    const double m = 0.5 * (a + b);
    gk_adapt(f, a, m, 0.5 * tol, depth + 1, sum, err, max_depth);
    gk_adapt(f, m, b, 0.5 * tol, depth + 1, sum, err, max_depth);
}

}  // namespace detail

struct IntegralResult {
    double value = 0.0;
    double error = 0.0;
};

// Adaptive Gauss-Kronrod on [a,b]. Endpoints are never evaluated, so integrable
// endpoint singularities are fine. Throws QuadratureError when the estimate stays above tol.
template <class F>
IntegralResult integrate(F&& f, double a, double b, double tol = 1e-10, int max_depth = 48) {
    IntegralResult out;
    if (a == b) return out;
    double sign = 1.0;
    if (b < a) {
        std::swap(a, b);
        sign = -1.0;
    }
    detail::gk_adapt(f, a, b, tol, 0, out.value, out.error, max_depth);
    if (!(out.error <= 10.0 * tol) || !std::isfinite(out.value))
        throw QuadratureError("quadrature did not converge: error estimate " +
                                  std::to_string(out.error) + " above tolerance " +
                                  std::to_string(tol),
                              out.error);
    out.value *= sign;
    return out;
}

// Same, but splits at the given interior breakpoints first.
template <class F>
IntegralResult integrate_split(F&& f, double a, double b, std::vector<double> breaks,
                               double tol = 1e-10) {
    double sign = 1.0;
    if (b < a) {
        std::swap(a, b);
        sign = -1.0;
    }
    std::vector<double> pts{a};
    std::sort(breaks.begin(), breaks.end());
    for (double t : breaks)
        if (t > pts.back() && t < b) pts.push_back(t);
    pts.push_back(b);
    IntegralResult out;
    const double piece_tol = tol / static_cast<double>(pts.size() - 1);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const IntegralResult r = integrate(f, pts[i], pts[i + 1], piece_tol);
        out.value += r.value;
        out.error += r.error;
    }
    out.value *= sign;
    return out;
}

// Gauss-Legendre nodes/weights on [-1,1] by Newton on the Legendre recurrence.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
}

// Pairwise (tree) reduction; deterministic for a fixed input order.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

}  // namespace glab

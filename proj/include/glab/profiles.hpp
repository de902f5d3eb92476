#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <cstdint>
#include <future>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "functionals.hpp"
#include "geometry.hpp"
#include "json.hpp"
#include "optimize.hpp"
#include "potentials.hpp"

namespace glab {

// Worker cap from GAMMA_LAB_THREADS (default: hardware concurrency).
inline int worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* e = std::getenv("GAMMA_LAB_THREADS")) {
        const int v = std::atoi(e);
        if (v > 0) n = std::min(v, std::max(n, 1) * 4);
    }
    return std::max(n, 1);
}

// Runs jobs[0..n) on up to `workers` threads; results land in their own slots.
template <class Fn>
void parallel_for(int n, Fn&& fn, int workers = 0) {
    if (workers <= 0) workers = worker_count();
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex mu;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i; (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// ---- 1D profile ----

enum class ProfileConstant { corrected, printed };

struct ProfileSolution1D {
    std::vector<double> s, theta, dtheta;
    double energy = 0.0;
    double young_residual = 0.0;
    double alpha = -1.0, beta = 1.0;

    // θ(s) by linear interpolation, clamped to the wells outside the sampled range.
    double at(double x) const {
        if (x <= s.front()) return x < s.front() ? alpha : theta.front();
        if (x >= s.back()) return x > s.back() ? beta : theta.back();
        const std::size_t i = std::upper_bound(s.begin(), s.end(), x) - s.begin();
        const double t = (x - s[i - 1]) / (s[i] - s[i - 1]);
        return theta[i - 1] + t * (theta[i] - theta[i - 1]);
    }
    double s_min() const { return s.front(); }
    double s_max() const { return s.back(); }
};

// Young-equality slope factor (p-1)^{-1/p}; the printed variant uses (p(p-1))^{-1/p}.
inline double profile_slope_factor(double p, ProfileConstant c) {
    return c == ProfileConstant::corrected ? std::pow(p - 1.0, -1.0 / p) : std::pow(p * (p - 1.0), -1.0 / p);
}

inline double profile_energy_1d(const ProfileSolution1D& sol, const DoubleWell& W, double p) {
    std::vector<double> pieces;
    pieces.reserve(sol.s.size());
    for (std::size_t i = 0; i + 1 < sol.s.size(); ++i) {
        const double f0 = std::pow(std::abs(sol.dtheta[i]), p) + W(sol.theta[i]);
        const double f1 = std::pow(std::abs(sol.dtheta[i + 1]), p) + W(sol.theta[i + 1]);
        pieces.push_back(0.5 * (sol.s[i + 1] - sol.s[i]) * (f0 + f1));
    }
    return pairwise_sum(pieces);
}

// θ solves θ' = c W(θ)^{1/p}, obtained by inverting s(θ) = ∫_{θ₀}^{θ} W^{-1/p}/c.
inline ProfileSolution1D solve_profile_ode(const DoubleWell& W, double p, double tol = 1e-12, int samples = 20001,
                                           ProfileConstant constant = ProfileConstant::corrected) {
    const double a = W.well_low(), b = W.well_high();
    if (!(a < b) || W.form() == WellForm::zero) throw ConfigError("profile needs a genuine double well");
    const double c = profile_slope_factor(p, constant);
    const double th0 = W.hump();
    // endpoints where W drops below tol, by bisection toward each well
    auto edge = [&](double inner, double well) {
        double lo = inner, hi = well;
        for (int i = 0; i < 200; ++i) {
            const double m = 0.5 * (lo + hi);
            (W(m) >= tol ? lo : hi) = m;
        }
        return lo;
    };
    const double tlo = edge(th0, a), thi = edge(th0, b);
    ProfileSolution1D sol;
    sol.alpha = a;
    sol.beta = b;
    const int n = std::max(samples, 3) | 1;
    const int mid = n / 2;
    sol.theta.resize(n);
    for (int i = 0; i < n; ++i)
        sol.theta[i] = i < mid ? tlo + (th0 - tlo) * i / mid : th0 + (thi - th0) * (i - mid) / (n - 1 - mid);
    sol.theta[mid] = th0;
    auto inv = [&](double r) { return std::pow(W(r), -1.0 / p) / c; };
    sol.s.assign(n, 0.0);
    for (int i = mid + 1; i < n; ++i) {
        const IntegralResult r = integrate(inv, sol.theta[i - 1], sol.theta[i], 1e-12);
        sol.s[i] = sol.s[i - 1] + r.value;
    }
    for (int i = mid - 1; i >= 0; --i) {
        const IntegralResult r = integrate(inv, sol.theta[i], sol.theta[i + 1], 1e-12);
        sol.s[i] = sol.s[i + 1] - r.value;
    }
    for (int i = 1; i < n; ++i)
        if (!(sol.s[i] > sol.s[i - 1]) || !std::isfinite(sol.s[i]))
            throw Error("profile inversion is not integrable at this tolerance");
    sol.dtheta.resize(n);
    double res = 0.0;
    for (int i = 0; i < n; ++i) {
        sol.dtheta[i] = c * std::pow(W(sol.theta[i]), 1.0 / p);
        if (i > 0 && i + 1 < n)
            res = std::max(res, std::abs(std::pow(sol.dtheta[i], p) * (p - 1.0) - W(sol.theta[i])));
    }
    sol.young_residual = constant == ProfileConstant::corrected ? res : std::numeric_limits<double>::quiet_NaN();
    sol.energy = profile_energy_1d(sol, W, p);
    return sol;
}

inline nlohmann::ordered_json to_json(const ProfileSolution1D& s) {
    return {{"samples", s.s.size()},   {"s_min", s.s.front()},     {"s_max", s.s.back()},
            {"energy", s.energy},      {"young_residual", s.young_residual},
            {"alpha", s.alpha},        {"beta", s.beta}};
}

// Monotone transition map S(θ) = ∫_{θ₀}^{θ} (p-1)^{1/p} W^{-1/p} on [lo,hi]. For p > 2 the
// integrand is integrable at the wells, so one table serves transitions between any two values.
class TransitionMap {
public:
    TransitionMap() = default;
    TransitionMap(const DoubleWell& W, double p, double lo, double hi, int n = 8000) : alpha_(W.well_low()), beta_(W.well_high()) {
        if (!(p > 2.0)) {
            // the inversion diverges at the wells; stay strictly inside
            const double pad = 1e-6 * (beta_ - alpha_);
            lo = std::max(lo, alpha_ + pad);
            hi = std::min(hi, beta_ - pad);
        }
        std::vector<double> t;
        for (int i = 0; i <= n; ++i) t.push_back(lo + (hi - lo) * i / n);
        for (double k : W.kinks())
            if (k > lo && k < hi) t.push_back(k);
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());
        const double c = std::pow(p - 1.0, 1.0 / p);
        auto f = [&](double r) {
            const double w = W(r);
            return w > 0.0 ? c * std::pow(w, -1.0 / p) : 0.0;
        };
        theta_ = t;
        S_.assign(t.size(), 0.0);
        // next to a well the integrand behaves like |t - well|^{-2/p}; t = well ± z^m with m = p/(p-2)
        // makes it smooth, and a fixed Gauss rule avoids chasing the rounding in well + z^m
        const double m = p > 2.0 ? p / (p - 2.0) : 1.0;
        std::vector<double> gx, gw;
        gauss_legendre(48, gx, gw);
        auto smooth = [&](double well, double sign, double len) {
            const double zmax = std::pow(len, 1.0 / m), hz = 0.5 * zmax;
            const double d0 = 1e-6 * (hi - lo), curv = W(well + sign * d0) / (d0 * d0);
            double acc = 0.0;
            for (std::size_t j = 0; j < gx.size(); ++j) {
                const double z = hz * (1.0 + gx[j]), d = std::pow(z, m);
                // below d0 use the quadratic model of W, accurate to O(d0)
                acc += gw[j] * (d < d0 ? c * std::pow(curv, -1.0 / p) * m
                                       : f(well + sign * d) * m * std::pow(z, m - 1.0));
            }
            return hz * acc;
        };
        auto piece = [&](double a, double b) {
            if (m > 1.0 && W(a) == 0.0) return smooth(a, 1.0, b - a);
            if (m > 1.0 && W(b) == 0.0) return smooth(b, -1.0, b - a);
            return integrate(f, a, b, 1e-11).value;
        };
        for (std::size_t i = 1; i < t.size(); ++i) S_[i] = S_[i - 1] + piece(t[i - 1], t[i]);
        const double s0 = S(W.hump());
        for (double& v : S_) v -= s0;
    }

    double S(double th) const {
        th = std::clamp(th, theta_.front(), theta_.back());
        std::size_t i = std::upper_bound(theta_.begin(), theta_.end(), th) - theta_.begin();
        if (i >= theta_.size()) return S_.back();
        if (i == 0) return S_.front();
        const double t = (th - theta_[i - 1]) / (theta_[i] - theta_[i - 1]);
        return S_[i - 1] + t * (S_[i] - S_[i - 1]);
    }

    double inverse(double s) const {
        if (s <= S_.front()) return theta_.front();
        if (s >= S_.back()) return theta_.back();
        const std::size_t i = std::upper_bound(S_.begin(), S_.end(), s) - S_.begin();
        const double t = (s - S_[i - 1]) / (S_[i] - S_[i - 1]);
        return theta_[i - 1] + t * (theta_[i] - theta_[i - 1]);
    }

    // Profile leaving `from` at s = 0 and stopping at `to`; the value at s = 0 is exactly `from`.
    double transition(double from, double to, double s) const {
        if (s <= 0.0 || from == to) return from;
        const double s0 = S(from);
        if (to > from) return std::min(to, inverse(s0 + s));
        return std::max(to, inverse(s0 - s));
    }

    // s-extent of the full transition between two values.
    double extent(double from, double to) const { return std::abs(S(to) - S(from)); }

    double alpha() const { return alpha_; }
    double beta() const { return beta_; }

private:
    double alpha_ = -1.0, beta_ = 1.0;
    std::vector<double> theta_, S_;
};

// ---- half-plane problem ----

inline Field polar_extension(double alpha_p, double beta_p, const GridShape& shape, Point center = {0.0, 0.0}) {
    Field u(shape);
    for (int n = 0; n < shape.size(); ++n) {
        const Point x = shape.node(n);
        const double dx = x.x - center.x, dy = std::max(0.0, x.y - center.y);
        const double th = (dx == 0.0 && dy == 0.0) ? 0.5 * M_PI : std::atan2(dy, dx);
        u.values[n] = (th / M_PI) * alpha_p + (1.0 - th / M_PI) * beta_p;
    }
    return u;
}

inline Field monotone_rearrange_x1(const Field& u) {
    Field r = u;
    const GridShape& s = u.shape;
    for (int j = 0; j < s.ny; ++j) {
        auto b = r.values.begin() + static_cast<std::ptrdiff_t>(j) * s.nx;
        std::sort(b, b + s.nx);
    }
    return r;
}

struct GammaOptions {
    MinimizeOptions minimize{6000, 1e-9, 1e-14, 150, 12, 100};
    int random_starts = 3;
    std::uint64_t seed = 1;
    int workers = 0;
    bool polar_start = true;
    bool step_start = true;
    const Field* warm = nullptr;  // extra start, e.g. a prolonged coarse minimizer
};

struct GammaEstimate {
    double estimate = 0.0;
    double R = 0.0, H = 0.0, delta = 0.0, p = 0.0;
    Field minimizer;
    int iterations = 0;
    double pg_norm = 0.0;
    bool converged = false;
    bool warning = false;  // iteration budget exhausted
    std::string stop_reason;
    std::vector<double> start_energies;
    std::vector<std::string> start_names;
    int best_start = 0;
};

inline nlohmann::ordered_json to_json(const GammaEstimate& g) {
    return {{"estimate", g.estimate},       {"upper_bound", true},   {"R", g.R},
            {"H", g.H},                     {"delta", g.delta},      {"p", g.p},
            {"iterations", g.iterations},   {"pg_norm", g.pg_norm},  {"converged", g.converged},
            {"stop_reason", g.stop_reason}, {"warning", g.warning},         {"start_names", g.start_names},
            {"start_energies", g.start_energies}, {"best_start", g.best_start}};
}

// Dirichlet columns at x₁ = ±R.
inline void apply_lateral(Field& u, const HalfPlaneGrid& g, double alpha_p, double beta_p) {
    const GridShape& s = g.shape();
    for (int j = 0; j < s.ny; ++j) {
        u(0, j) = alpha_p;
        u(s.nx - 1, j) = beta_p;
    }
}

// Prolongation by P1 interpolation; exact on node-nested lattices.
inline Field prolong(const Field& coarse, const GridShape& fine) {
    Field f(fine);
    for (int n = 0; n < fine.size(); ++n) f.values[n] = interpolate(coarse, fine.node(n));
    return f;
}

// Upper bound on γ_p: minimise H_1 over grid fields with values in [α',β'] and lateral data.
inline GammaEstimate estimate_gamma_p(const DoubleWell& V, const HalfPlaneGrid& g, const GammaOptions& opt = {}) {
    const double a = V.well_low(), b = V.well_high();
    const GridShape& s = g.shape();
    std::vector<Field> starts;
    std::vector<std::string> names;
    if (opt.warm) {
        if (opt.warm->shape != s) throw Error("warm start lives on another lattice");
        starts.push_back(*opt.warm);
        names.push_back("warm");
    }
    if (opt.polar_start) {
        starts.push_back(polar_extension(a, b, s));
        names.push_back("polar");
    }
    if (opt.step_start) {
        Field u(s);
        for (int n = 0; n < s.size(); ++n) {
            const double x = s.node(n).x;
            u.values[n] = x < 0 ? a : x > 0 ? b : 0.5 * (a + b);
        }
        starts.push_back(u);
        names.push_back("step");
    }
    std::mt19937_64 rng(opt.seed);
    for (int r = 0; r < opt.random_starts; ++r) {
        // shifted fan plus node noise
        std::uniform_real_distribution<double> shift(-0.25 * g.R(), 0.25 * g.R()), noise(-0.25, 0.25);
        Field u = polar_extension(a, b, s, {shift(rng), 0.0});
        for (double& v : u.values) v = std::clamp(v + noise(rng) * (b - a), a, b);
        starts.push_back(u);
        names.push_back("random" + std::to_string(r));
    }
    if (starts.empty()) throw ConfigError("no starts requested");
    std::vector<char> frozen(s.size(), 0);
    for (int n = 0; n < s.size(); ++n) frozen[n] = g.is_lateral(n);
    const Lattice2D& L = g.lattice();
    std::vector<MinimizeResult> res(starts.size());
    parallel_for(static_cast<int>(starts.size()), [&](int k) {
        Field& u = starts[k];
        apply_lateral(u, g, a, b);
        EnergyTerms terms;
        terms.eps = 1.0;
        terms.V = &V;
        Field work(s);
        BoxLbfgs solver(
            [&](const std::vector<double>& x, std::vector<double>& gr) {
                work.values = x;
                return evaluate_energy(L, work, terms, &gr).total;
            },
            a, b, frozen);
        res[k] = solver.run(u.values, opt.minimize, [&](std::vector<double>& x) {
            Field f(s);
            f.values = x;
            std::vector<double> r = monotone_rearrange_x1(f).values;
            if (r == x) return false;
            x.swap(r);
            return true;
        });
    }, opt.workers);
    GammaEstimate out;
    out.R = g.R();
    out.H = g.H();
    out.delta = g.delta();
    out.p = g.p();
    out.start_names = names;
    std::size_t best = 0;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        out.start_energies.push_back(res[k].f);
        if (res[k].f < res[best].f) best = k;
    }
    out.best_start = static_cast<int>(best);
    out.minimizer = starts[best];
    out.iterations = res[best].iterations;
    out.pg_norm = res[best].pg_norm;
    out.converged = res[best].converged;
    out.warning = !res[best].converged;
    out.stop_reason = res[best].reason;
    out.estimate = halfplane_energy_H(out.minimizer, g, 1.0, V).total;
    return out;
}

// Coarse-to-fine ladder: the starts in `opt` run on deltas[0]; every finer level descends from
// the prolonged previous minimizer, so on nested lattices the column is non-increasing.
inline std::vector<GammaEstimate> estimate_gamma_nested(const DoubleWell& V, double p, double R, double H,
                                                        const std::vector<double>& deltas, GammaOptions opt = {}) {
    std::vector<GammaEstimate> out;
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        if (k > 0 && !(deltas[k] < deltas[k - 1])) throw ConfigError("spacings must be strictly decreasing");
        const HalfPlaneGrid g(R, H, deltas[k], p);
        Field warm;
        if (k > 0) {
            warm = prolong(out.back().minimizer, g.shape());
            opt.warm = &warm;
            opt.polar_start = opt.step_start = false;
            opt.random_starts = 0;
        }
        out.push_back(estimate_gamma_p(V, g, opt));
    }
    return out;
}

// w = u inside radius s, ū outside s + c, linear radial blend between.
inline Field build_lb_competitor(const Field& inner, double s, double cutoff, double alpha_p, double beta_p,
                                 const GridShape& outer) {
    const GridShape& si = inner.shape;
    const double reach = std::min({-si.x0, si.x0 + (si.nx - 1) * si.dx, si.y0 + (si.ny - 1) * si.dx});
    if (!(cutoff > 0.0)) throw ConfigError("cutoff width must be positive");
    if (!(s > 0.0) || s + cutoff > reach + 1e-12)
        throw ConfigError("annulus does not fit inside the inner region");
    Field ubar = polar_extension(alpha_p, beta_p, outer);
    Field w(outer);
    for (int n = 0; n < outer.size(); ++n) {
        const Point x = outer.node(n);
        const double r = std::hypot(x.x, x.y);
        if (r >= s + cutoff) {
            w.values[n] = ubar.values[n];
            continue;
        }
        const double ui = interpolate(inner, x);
        if (r <= s) {
            w.values[n] = ui;
            continue;
        }
        const double phi = 1.0 - (r - s) / cutoff;
        w.values[n] = phi * ui + (1.0 - phi) * ubar.values[n];
    }
    return w;
}

struct AnnulusChoice {
    double s = 0.0;
    double energy = 0.0;  // annulus energy at s
    double total = 0.0;   // energy over the half-disk of radius 1
    double bound = 0.0;   // total·width/range
    double width = 0.0;
};

// Minimises the annulus energy over s ∈ (1/2, 1-c) exactly: the annulus energy is piecewise
// constant in s, so the sweep visits every piece.
inline AnnulusChoice select_annulus(const Field& u, const Lattice2D& L, double eps, const DoubleWell& V) {
    const double p = L.p;
    const double c = std::pow(eps, (p - 2.0) / (2.0 * (p - 1.0)));
    const double lo = 0.5, hi = 1.0 - c;
    if (!(hi > lo)) throw ConfigError("annulus width leaves no admissible radius");
    const double cg = std::pow(eps, p - 2.0), cw = 1.0 / std::sqrt(eps), dx2 = L.shape.dx * L.shape.dx;
    struct Item {
        double r, e;
    };
    std::vector<Item> items;
    for (std::size_t q = 0; q < L.tri.size(); ++q) {
        const auto& T = L.tri[q];
        Point cen{0, 0};
        for (int k = 0; k < 3; ++k) {
            const Point x = L.shape.node(T[k]);
            cen.x += x.x / 3.0;
            cen.y += x.y / 3.0;
        }
        const double r = std::hypot(cen.x, cen.y);
        if (r >= 1.0) continue;
        const double a = u.values[T[1]] - u.values[T[0]], b = u.values[T[2]] - u.values[T[0]];
        items.push_back({r, cg * detail::pterm(L.wgrad[q], (a * a + b * b) / dx2, p)});
    }
    for (std::size_t q = 0; q < L.bedge.size(); ++q) {
        const Point x0 = L.shape.node(L.bedge[q][0]), x1 = L.shape.node(L.bedge[q][1]);
        const double r = std::hypot(0.5 * (x0.x + x1.x), 0.5 * (x0.y + x1.y));
        if (r >= 1.0) continue;
        items.push_back({r, cw * L.blen[q] * V.max_on(u.values[L.bedge[q][0]], u.values[L.bedge[q][1]]).value});
    }
    AnnulusChoice out;
    out.width = c;
    std::vector<double> all;
    for (const Item& it : items) all.push_back(it.e);
    out.total = pairwise_sum(all);
    out.bound = out.total * c / (hi - lo);
    // item is inside the annulus [s, s+c) iff r - c < s <= r
    std::vector<double> cuts{lo, hi};
    for (const Item& it : items) {
        if (it.r > lo && it.r < hi) cuts.push_back(it.r);
        if (it.r - c > lo && it.r - c < hi) cuts.push_back(it.r - c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<std::pair<double, double>> ev;  // (s where the item enters/leaves, ±e)
    for (const Item& it : items) {
        ev.push_back({it.r - c, it.e});
        ev.push_back({it.r, -it.e});
    }
    std::sort(ev.begin(), ev.end(), [](auto x, auto y) { return x.first < y.first; });
    // sweep piece by piece; the piece (cuts[i], cuts[i+1]) sees items with r - c < s <= r
    std::size_t k = 0;
    double acc = 0.0, best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double smid = 0.5 * (cuts[i] + cuts[i + 1]);
        while (k < ev.size() && ev[k].first < smid) acc += ev[k++].second;
        if (acc < best) {
            best = acc;
            out.s = smid;
        }
    }
    // exact re-sum for the chosen radius
    std::vector<double> inside;
    for (const Item& it : items)
        if (it.r - c < out.s && out.s <= it.r) inside.push_back(it.e);
    out.energy = pairwise_sum(inside);
    return out;
}

}  // namespace glab

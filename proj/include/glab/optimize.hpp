#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace glab {

struct MinimizeOptions {
    int max_iter = 3000;
    double gtol = 1e-8;     // on the max-norm of the projected gradient
    double ftol = 1e-13;    // relative decrease counted as a stall
    int stall_limit = 60;   // consecutive stalled iterations before stopping
    int memory = 10;
    int hook_every = 0;     // call the hook every k iterations (0 = never)
};

struct MinimizeResult {
    double f = 0.0;
    int iterations = 0;
    int evaluations = 0;
    double pg_norm = 0.0;
    bool converged = false;  // gradient or stall test met
    std::string reason = "max_iter";  // gradient | stall | line_search | max_iter
};

// Projected L-BFGS on the box [lo,hi] with some coordinates frozen.
// obj(x, g) returns f and fills g. hook(x) may edit x in place and returns true if it did;
// edits are kept only when they do not raise f.
class BoxLbfgs {
public:
    using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;
    using Hook = std::function<bool(std::vector<double>&)>;

    BoxLbfgs(Objective obj, double lo, double hi, std::vector<char> frozen)
        : obj_(std::move(obj)), lo_(lo), hi_(hi), frozen_(std::move(frozen)) {}

    MinimizeResult run(std::vector<double>& x, const MinimizeOptions& o, const Hook& hook = {}) {
        const std::size_t n = x.size();
        for (std::size_t i = 0; i < n; ++i)
            if (!frozen(i)) x[i] = std::clamp(x[i], lo_, hi_);
        std::vector<double> g(n), xn(n), gn(n), d(n), pg(n);
        MinimizeResult r;
        double f = obj_(x, g);
        ++r.evaluations;
        std::deque<std::vector<double>> S, Y;
        std::deque<double> rho;
        int stalled = 0;
        for (int it = 0; it < o.max_iter; ++it) {
            r.iterations = it + 1;
            double pgn = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                pg[i] = projected(i, x[i], g[i]);
                pgn = std::max(pgn, std::abs(pg[i]));
            }
            r.pg_norm = pgn;
            if (pgn < o.gtol) {
                r.converged = true;
                r.reason = "gradient";
                break;
            }
            direction(pg, S, Y, rho, d);
            double slope = 0.0;
            for (std::size_t i = 0; i < n; ++i) slope += d[i] * pg[i];
            if (!(slope < 0.0)) {
                S.clear(), Y.clear(), rho.clear();
                for (std::size_t i = 0; i < n; ++i) d[i] = -pg[i];
            }
            double t = 1.0;
            if (S.empty()) {
                double dn = 0.0;
                for (double v : d) dn = std::max(dn, std::abs(v));
                t = dn > 0 ? std::min(1.0, 0.1 / dn) : 1.0;
            }
            bool ok = false;
            double fn = f;
            for (int ls = 0; ls < 50; ++ls) {
                double dec = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    xn[i] = frozen(i) ? x[i] : std::clamp(x[i] + t * d[i], lo_, hi_);
                    dec += g[i] * (xn[i] - x[i]);
                }
                fn = obj_(xn, gn);
                ++r.evaluations;
                if (fn <= f + 1e-4 * std::min(dec, 0.0) && fn <= f) {
                    ok = true;
                    break;
                }
                t *= 0.5;
            }
            if (!ok) {
                if (!S.empty()) {
                    S.clear(), Y.clear(), rho.clear();
                    continue;
                }
                r.converged = true;  // no descent left at working precision
                r.reason = "line_search";
                break;
            }
            double sy = 0.0, ss = 0.0, yy = 0.0;
            std::vector<double> s(n), y(n);
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = xn[i] - x[i];
                y[i] = gn[i] - g[i];
                sy += s[i] * y[i];
                ss += s[i] * s[i];
                yy += y[i] * y[i];
            }
            if (sy > 1e-12 * std::sqrt(ss * yy)) {
                S.push_back(std::move(s));
                Y.push_back(std::move(y));
                rho.push_back(1.0 / sy);
                if (static_cast<int>(S.size()) > o.memory) S.pop_front(), Y.pop_front(), rho.pop_front();
            }
            const double drop = f - fn;
            x.swap(xn);
            g.swap(gn);
            f = fn;
            stalled = drop <= o.ftol * std::max(1.0, std::abs(f)) ? stalled + 1 : 0;
            if (stalled >= o.stall_limit) {
                r.converged = true;
                r.reason = "stall";
                break;
            }
            if (hook && o.hook_every > 0 && (it + 1) % o.hook_every == 0) {
                xn = x;
                if (hook(xn)) {
                    const double fh = obj_(xn, gn);
                    ++r.evaluations;
                    if (fh <= f) {
                        x.swap(xn);
                        g.swap(gn);
                        f = fh;
                        S.clear(), Y.clear(), rho.clear();
                    }
                }
            }
        }
        r.f = f;
        return r;
    }

private:
    bool frozen(std::size_t i) const { return !frozen_.empty() && frozen_[i]; }

    double projected(std::size_t i, double xi, double gi) const {
        if (frozen(i)) return 0.0;
        if (xi <= lo_ && gi > 0.0) return 0.0;
        if (xi >= hi_ && gi < 0.0) return 0.0;
        return gi;
    }

    void direction(const std::vector<double>& pg, const std::deque<std::vector<double>>& S,
                   const std::deque<std::vector<double>>& Y, const std::deque<double>& rho,
                   std::vector<double>& d) const {
        const std::size_t n = pg.size(), m = S.size();
        for (std::size_t i = 0; i < n; ++i) d[i] = -pg[i];
        if (m == 0) return;
        std::vector<double> alpha(m);
        for (std::size_t k = m; k-- > 0;) {
            double a = 0.0;
            for (std::size_t i = 0; i < n; ++i) a += S[k][i] * d[i];
            a *= rho[k];
            alpha[k] = a;
            for (std::size_t i = 0; i < n; ++i) d[i] -= a * Y[k][i];
        }
        double yy = 0.0;
        for (std::size_t i = 0; i < n; ++i) yy += Y[m - 1][i] * Y[m - 1][i];
        const double gamma = 1.0 / (rho[m - 1] * yy);
        for (std::size_t i = 0; i < n; ++i) d[i] *= gamma;
        for (std::size_t k = 0; k < m; ++k) {
            double b = 0.0;
            for (std::size_t i = 0; i < n; ++i) b += Y[k][i] * d[i];
            b *= rho[k];
            for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[k] - b) * S[k][i];
        }
        // keep active bounds and frozen nodes out of the step
        for (std::size_t i = 0; i < n; ++i)
            if (pg[i] == 0.0) d[i] = 0.0;
    }

    Objective obj_;
    double lo_, hi_;
    std::vector<char> frozen_;
};

}  // namespace glab

#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadrature.hpp"

namespace glab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input (config, ranges); the CLI maps this to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

enum class WellForm { quartic, double_parabola, zero };

inline const char* form_name(WellForm f) {
    switch (f) {
        case WellForm::quartic: return "quartic";
        case WellForm::double_parabola: return "double_parabola";
        case WellForm::zero: return "zero";
    }
    return "?";
}

inline WellForm form_from_name(const std::string& s) {
    if (s == "quartic") return WellForm::quartic;
    if (s == "double_parabola") return WellForm::double_parabola;
    if (s == "zero") return WellForm::zero;
    throw ConfigError("unknown potential form '" + s + "'");
}

// Value of W together with where its max over an interval is attained.
struct IntervalMax {
    double value;
    double at;
    int where;  // 0 = lower end, 1 = upper end, 2 = interior critical point
};

class DoubleWell {
public:
    DoubleWell() = default;
    DoubleWell(double low, double high, double amplitude = 1.0, WellForm form = WellForm::quartic)
        : lo_(low), hi_(high), amp_(amplitude), form_(form) {
        if (!(low <= high)) throw ConfigError("double well needs well_low <= well_high");
        if (!(amplitude > 0.0)) throw ConfigError("double well amplitude must be positive");
    }

    double well_low() const { return lo_; }
    double well_high() const { return hi_; }
    double amplitude() const { return amp_; }
    WellForm form() const { return form_; }
    double hump() const { return 0.5 * (lo_ + hi_); }

    double operator()(double t) const {
        switch (form_) {
            case WellForm::quartic: {
                const double a = t - lo_, b = t - hi_;
                return amp_ * a * a * b * b;
            }
            case WellForm::double_parabola: {
                const double a = t - lo_, b = t - hi_;
                return amp_ * std::min(a * a, b * b);
            }
            case WellForm::zero: return 0.0;
        }
        return 0.0;
    }

    double derivative(double t) const {
        switch (form_) {
            case WellForm::quartic: {
                const double a = t - lo_, b = t - hi_;
                return 2.0 * amp_ * a * b * (a + b);
            }
            case WellForm::double_parabola: {
                const double a = t - lo_, b = t - hi_;
                return a * a <= b * b ? 2.0 * amp_ * a : 2.0 * amp_ * b;
            }
            case WellForm::zero: return 0.0;
        }
        return 0.0;
    }

    // max of W over [min(s,t), max(s,t)]; the only interior local max of every form is the hump.
    IntervalMax max_on(double s, double t) const {
        const bool swap = t < s;
        const double a = swap ? t : s, b = swap ? s : t;
        const double wa = (*this)(a), wb = (*this)(b);
        IntervalMax r = wa >= wb ? IntervalMax{wa, a, swap ? 1 : 0} : IntervalMax{wb, b, swap ? 0 : 1};
        const double c = hump();
        if (form_ != WellForm::zero && c > a && c < b) {
            const double wc = (*this)(c);
            if (wc > r.value) r = {wc, c, 2};
        }
        return r;
    }

    // Points where W^{(p-1)/p} loses smoothness; used as quadrature breakpoints.
    std::vector<double> kinks() const { return {lo_, hump(), hi_}; }

private:
    double lo_ = -1.0, hi_ = 1.0, amp_ = 1.0;
    WellForm form_ = WellForm::quartic;
};

struct PExponent {
    double p = 2.5;
    bool cross_check = false;

    PExponent() = default;
    explicit PExponent(double pv, bool cc = false) : p(pv), cross_check(cc) { validate(); }

    void validate() const {
        if (p > 2.0 && p < 3.0) return;
        if (p == 2.0 && cross_check) return;
        if (p == 2.0)
            throw ConfigError("p = 2 is only allowed in cross-check mode");
        throw ConfigError("p must lie in (2,3), got " + std::to_string(p));
    }

    double k() const { return (p - 2.0) / (p - 1.0); }  // bulk-weight exponent and layer scaling
};

struct TruncationLevel {
    double m = 1.0;
};

inline double eval_potential(const DoubleWell& P, double t) { return P(t); }

// Default truncation level; checks the monotonicity hypothesis by sampling.
inline TruncationLevel make_truncation(const DoubleWell& W, const DoubleWell& V, double m = -1.0) {
    const double need = std::max({std::abs(W.well_low()), std::abs(W.well_high()),
                                  std::abs(V.well_low()), std::abs(V.well_high())});
    if (m < 0.0) m = need;
    if (m < need) throw ConfigError("truncation level m below the largest well modulus");
    for (const DoubleWell* P : {&W, &V}) {
        double prev_hi = (*P)(m), prev_lo = (*P)(-m);
        for (int i = 1; i <= 200; ++i) {
            const double t = m + 0.05 * i;
            const double hi = (*P)(t), lo = (*P)(-t);
            if (hi < prev_hi || lo < prev_lo)
                throw ConfigError("potential decreases beyond the truncation level");
            prev_hi = hi;
            prev_lo = lo;
        }
    }
    return {m};
}

inline double constant_c_p(double p) { return p / std::pow(p - 1.0, (p - 1.0) / p); }

// 𝒲(t) = ∫_{well_low}^t W^{(p-1)/p}.
inline double antiderivative_W(const DoubleWell& P, double p, double t, double tol = 1e-10) {
    if (P.form() == WellForm::zero) return 0.0;
    const double q = (p - 1.0) / p;
    auto f = [&](double r) { return std::pow(P(r), q); };
    return integrate_split(f, P.well_low(), t, P.kinks(), tol).value;
}

inline double constant_sigma_p(double p, const DoubleWell& W, double tol = 1e-10) {
    return constant_c_p(p) * std::abs(antiderivative_W(W, p, W.well_high(), tol) -
                                      antiderivative_W(W, p, W.well_low(), tol));
}

// Tabulated 𝒲 for bulk evaluation: cumulative adaptive integrals on a node grid
// that contains the wells and the hump, plus an 8-point Gauss-Legendre remainder.
class AntiderivativeTable {
public:
    AntiderivativeTable() = default;
    AntiderivativeTable(const DoubleWell& P, double p, double lo, double hi, int n = 4096)
        : P_(P), q_((p - 1.0) / p), p_(p) {
        for (int i = 0; i <= n; ++i) t_.push_back(lo + (hi - lo) * i / n);
        for (double k : P.kinks())
            if (k > lo && k < hi) t_.push_back(k);
        std::sort(t_.begin(), t_.end());
        t_.erase(std::unique(t_.begin(), t_.end()), t_.end());
        kink_.assign(t_.size(), 0);
        for (std::size_t i = 0; i < t_.size(); ++i)
            for (double k : P.kinks())
                if (t_[i] == k) kink_[i] = 1;
        const double base = antiderivative_W(P, p, lo);
        c_.assign(t_.size(), base);
        auto f = [this](double r) { return std::pow(P_(r), q_); };
        for (std::size_t i = 1; i < t_.size(); ++i) {
            const double step = P_.form() == WellForm::zero
                                    ? 0.0
                                    : integrate(f, t_[i - 1], t_[i], 1e-13).value;
            c_[i] = c_[i - 1] + step;
        }
        gauss_legendre(8, gx_, gw_);
    }

    double operator()(double t) const {
        if (t < t_.front() || t > t_.back()) return antiderivative_W(P_, p_, t);
        std::size_t i = std::upper_bound(t_.begin(), t_.end(), t) - t_.begin();
        if (i > 0) --i;
        if (i + 1 == t_.size()) return c_.back();
        const double a = t_[i];
        if (t == a) return c_[i];
        if (kink_[i] || kink_[i + 1]) {
            auto f = [this](double r) { return std::pow(P_(r), q_); };
            return c_[i] + integrate(f, a, t, 1e-14, 40).value;
        }
        const double h = 0.5 * (t - a), m = 0.5 * (t + a);
        double s = 0.0;
        for (int j = 0; j < 8; ++j) s += gw_[j] * std::pow(P_(m + h * gx_[j]), q_);
        return c_[i] + h * s;
    }

    // d𝒲/dt = W^{(p-1)/p}.
    double slope(double t) const { return std::pow(P_(t), q_); }

private:
    DoubleWell P_;
    double q_ = 0.5, p_ = 2.0;
    std::vector<double> t_, c_, gx_, gw_;
    std::vector<char> kink_;
};

}  // namespace glab

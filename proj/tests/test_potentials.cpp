#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "potentials.hpp"

using namespace glab;

namespace {

// ∫_{-1}^{1} (1-r²)^{2q} dr = B(1/2, 2q+1)
double beta_oracle(double p) {
    const double a = 2.0 * (p - 1.0) / p + 1.0;
    return std::tgamma(0.5) * std::tgamma(a) / std::tgamma(a + 0.5);
}

}  // namespace

TEST(DoubleWell, Values) {
    const DoubleWell W(-1, 1);
    EXPECT_EQ(W(1.0), 0.0);
    EXPECT_EQ(W(-1.0), 0.0);
    EXPECT_EQ(W(0.0), 1.0);
    EXPECT_EQ(DoubleWell(0, 2, 0.5)(1.0), 0.5);
    EXPECT_EQ(DoubleWell(-1, 1, 1, WellForm::double_parabola)(0.0), 1.0);
    EXPECT_EQ(DoubleWell(-1, 1, 1, WellForm::zero)(0.3), 0.0);
}

TEST(DoubleWell, Rejects) {
    EXPECT_THROW(DoubleWell(1, -1), ConfigError);
    EXPECT_THROW(DoubleWell(-1, 1, 0.0), ConfigError);
    EXPECT_THROW(form_from_name("sextic"), ConfigError);
    EXPECT_EQ(form_from_name("double_parabola"), WellForm::double_parabola);
}

TEST(DoubleWell, PositiveOffWellsAndLinearGrowth) {
    for (WellForm f : {WellForm::quartic, WellForm::double_parabola}) {
        const DoubleWell W(-1, 1.5, 2.0, f);
        for (int i = -400; i <= 400; ++i) {
            const double t = i / 50.0;
            if (t == -1.0 || t == 1.5) continue;
            EXPECT_GT(W(t), 0.0) << t;
            if (std::abs(t) >= 2.0) {
                EXPECT_GE(W(t), 0.1 * (std::abs(t) - 2.0)) << t;
            }
        }
    }
}

TEST(DoubleWell, ConvexNearWells) {
    const DoubleWell V(-1, 1);
    const double h = 1e-3;
    for (double w : {-1.0, 1.0})
        for (int i = -50; i <= 50; ++i) {
            const double t = w + i * 2e-3;
            EXPECT_GE(V(t - h) - 2 * V(t) + V(t + h), -1e-15) << t;
        }
}

TEST(DoubleWell, DerivativeMatchesDifferences) {
    const DoubleWell W(-0.5, 2.0, 1.7);
    for (double t : {-2.0, -0.3, 0.4, 1.1, 3.0}) {
        const double fd = (W(t + 1e-6) - W(t - 1e-6)) / 2e-6;
        EXPECT_NEAR(W.derivative(t), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST(DoubleWell, MaxOnIntervalAgainstDenseScan) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-2.5, 2.5);
    for (WellForm f : {WellForm::quartic, WellForm::double_parabola}) {
        const DoubleWell W(-1, 1, 1, f);
        for (int k = 0; k < 200; ++k) {
            const double a = U(rng), b = U(rng);
            double scan = 0.0;
            for (int i = 0; i <= 2000; ++i) scan = std::max(scan, W(a + (b - a) * i / 2000.0));
            if ((0.0 - a) * (0.0 - b) <= 0.0) scan = std::max(scan, W(0.0));  // the kink of the parabola form
            const IntervalMax m = W.max_on(a, b);
            EXPECT_GE(m.value, scan - 1e-12);
            EXPECT_LE(m.value, scan + 1e-5);
            EXPECT_EQ(m.value, W(m.at));
        }
    }
}

TEST(PExponent, Range) {
    EXPECT_NO_THROW(PExponent(2.5));
    EXPECT_THROW(PExponent(3.1), ConfigError);
    EXPECT_THROW(PExponent(3.0), ConfigError);
    EXPECT_THROW(PExponent(2.0), ConfigError);
    EXPECT_NO_THROW(PExponent(2.0, true));
    EXPECT_DOUBLE_EQ(PExponent(2.5).k(), 1.0 / 3.0);
}

TEST(Truncation, DefaultAndChecks) {
    const DoubleWell W(-1, 1), V(-0.5, 2);
    EXPECT_EQ(make_truncation(W, V).m, 2.0);
    EXPECT_EQ(make_truncation(W, V, 3.0).m, 3.0);
    EXPECT_THROW(make_truncation(W, V, 1.5), ConfigError);
}

TEST(Constants, CpClosedForms) {
    EXPECT_EQ(constant_c_p(2.0), 2.0);
    EXPECT_NEAR(constant_c_p(2.5), 1.9601, 5e-5);
    EXPECT_NEAR(constant_c_p(2.5), 2.5 / std::pow(1.5, 0.6), 1e-15);
    EXPECT_NEAR(constant_c_p(3.0), 1.8899, 5e-5);
}

TEST(Constants, AntiderivativeOracles) {
    const DoubleWell W(-1, 1);
    EXPECT_EQ(antiderivative_W(W, 2.0, -1.0), 0.0);
    EXPECT_NEAR(antiderivative_W(W, 2.0, 1.0), 4.0 / 3.0, 1e-12);
    for (double p : {2.25, 2.5, 2.75}) EXPECT_NEAR(antiderivative_W(W, p, 1.0), beta_oracle(p), 1e-10) << p;
    // 𝒲(t) for p = 2 is t - t³/3 + 2/3
    for (double t : {-0.7, 0.0, 0.3, 0.95}) EXPECT_NEAR(antiderivative_W(W, 2.0, t), t - t * t * t / 3 + 2.0 / 3, 1e-12);
}

TEST(Constants, SigmaP) {
    const DoubleWell W(-1, 1);
    EXPECT_NEAR(constant_sigma_p(2.0, W), 8.0 / 3.0, 1e-10);
    EXPECT_NEAR(constant_sigma_p(2.5, W), constant_c_p(2.5) * beta_oracle(2.5), 1e-10);
    EXPECT_NEAR(constant_sigma_p(2.5, W), 2.478128214696, 1e-9);
    EXPECT_EQ(constant_sigma_p(2.5, DoubleWell(0.3, 0.3)), 0.0);
}

TEST(Constants, SigmaScalesWithWells) {
    // wells a < b, amplitude A: σ_p = c_p A^{(p-1)/p} ((b-a)/2)^{4(p-1)/p + 1} B(1/2, 2q+1)
    const double p = 2.5, a = 0.5, b = 3.0, A = 2.0, q = (p - 1) / p;
    const double expect = constant_c_p(p) * std::pow(A, q) * std::pow(0.5 * (b - a), 4 * q + 1) * beta_oracle(p);
    EXPECT_NEAR(constant_sigma_p(p, DoubleWell(a, b, A)), expect, 1e-9 * expect);
}

TEST(AntiderivativeTable, MatchesDirect) {
    for (WellForm f : {WellForm::quartic, WellForm::double_parabola}) {
        const DoubleWell W(-1, 1, 1, f);
        const AntiderivativeTable T(W, 2.5, -3, 3);
        for (double t : {-3.0, -2.1, -1.0, -0.999, -0.4, 0.0, 0.77, 1.0, 1.3, 3.0})
            EXPECT_NEAR(T(t), antiderivative_W(W, 2.5, t, 1e-12), 1e-10) << t;
        EXPECT_NEAR(T(5.0), antiderivative_W(W, 2.5, 5.0), 1e-10);
    }
}

TEST(AntiderivativeTable, Monotone) {
    const AntiderivativeTable T(DoubleWell(-1, 1), 2.5, -2, 2);
    double prev = T(-2.0);
    for (int i = 1; i <= 4000; ++i) {
        const double v = T(-2.0 + i * 1e-3);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

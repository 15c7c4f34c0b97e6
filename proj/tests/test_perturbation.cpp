#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "maglocal/perturbation.hpp"

using namespace maglocal;

namespace {
const RadialGrid grid(40, 4.0);
const double pi = std::numbers::pi;
RadialProfile exp_profile() { return {RadialProfile::Kind::exp, 0.0, 1.0, 1.0}; }
} // namespace

TEST(Fourier, CosineMode) {
    auto t = fourier_coefficients([](double r, double th) { return std::exp(-r) * std::cos(th); }, grid, 6, 32);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = grid.node(i);
        for (int m = -6; m <= 6; ++m) {
            const double expect = std::abs(m) == 1 ? std::sqrt(pi / 2) * std::exp(-r) : 0.0;
            EXPECT_NEAR(t.at(i, m).real(), expect, 1e-15);
            EXPECT_NEAR(t.at(i, m).imag(), 0.0, 1e-15);
        }
    }
}

TEST(Fourier, RadialAndZero) {
    auto t = fourier_coefficients([](double r, double) { return 1.0 / (1 + r); }, grid, 3, 16);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(t.at(i, 0).real(), std::sqrt(2 * pi) / (1 + grid.node(i)), 1e-14);
        for (int m : {-3, -1, 2}) EXPECT_NEAR(std::abs(t.at(i, m)), 0.0, 1e-15);
    }
    EXPECT_TRUE(fourier_coefficients([](double, double) { return 0.0; }, grid, 4, 16).is_zero());
}

TEST(Fourier, AliasingGuard) {
    EXPECT_THROW(fourier_coefficients([](double, double) { return 1.0; }, grid, 8, 31), aliasing_error);
    EXPECT_NO_THROW(fourier_coefficients([](double, double) { return 1.0; }, grid, 8, 32));
}

TEST(Fourier, QuadratureAgreesWithAnalyticCoefficients) {
    // two independent routes to the same table
    for (double zeta : {1.0, 0.7}) {
        const auto w = gevrey_potential(0.8, exp_profile(), 1.5, zeta);
        const int m_max = 10;
        const int n_theta = 2 * (w.natural_m_max + m_max) + 2;
        const auto quad = fourier_coefficients(std::get<ClosedForm>(w.source), grid, m_max, std::max(n_theta, 4 * m_max));
        const auto exact = coefficient_table(w, grid, m_max);
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (int m = -m_max; m <= m_max; ++m) EXPECT_NEAR(std::abs(quad.at(i, m) - exact.at(i, m)), 0.0, 1e-13);
    }
}

TEST(Fourier, HermitianSymmetryAndParseval) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> ca(6), sa(6);
        for (int k = 0; k < 6; ++k) ca[k] = u(rng), sa[k] = u(rng);
        auto w = [&](double r, double th) {
            double s = 0;
            for (int k = 0; k < 6; ++k) s += (ca[k] * std::cos(k * th) + sa[k] * std::sin(k * th)) / (1 + r * k);
            return s;
        };
        const int n_theta = 64;
        auto t = fourier_coefficients(w, grid, 12, n_theta);
        EXPECT_LT(t.hermitian_defect(), 1e-14);
        for (std::size_t i = 0; i < grid.size(); i += 7) {
            const double r = grid.node(i);
            double lhs = 0, rhs = 0;
            for (int m = -12; m <= 12; ++m) lhs += std::norm(t.at(i, m));
            for (int k = 0; k < n_theta; ++k) rhs += std::pow(w(r, 2 * pi * k / n_theta), 2) * 2 * pi / n_theta;
            EXPECT_NEAR(lhs, rhs, 1e-10);
        }
    }
}

TEST(Gevrey, ValidateCases) {
    auto t = fourier_coefficients([](double r, double th) { return std::exp(-r) * std::cos(th); }, grid, 4, 16);
    // |W^(r, 1)| = sqrt(pi/2) e^{-r} ~ 1.2533 e^{-r}, while 3 e^{-r} e^{-1} ~ 1.1036 e^{-r}: the
    // envelope (a = 1, b = 3 e^{-r}) is too tight at |m| = 1; the largest admissible a is ln(3 / sqrt(pi/2))
    GevreyEnvelope tight{1.0, 1.0, [](double r) { return 3 * std::exp(-r); }};
    auto rep = gevrey_validate(t, tight);
    EXPECT_FALSE(rep.pass());
    EXPECT_NEAR(rep.tightest_a, std::log(3 / std::sqrt(pi / 2)), 1e-12);

    GevreyEnvelope loose{0.8, 1.0, [](double r) { return 3 * std::exp(-r); }};
    EXPECT_TRUE(gevrey_validate(t, loose).pass());

    GevreyEnvelope steep{10.0, 1.0, [](double r) { return std::exp(-r); }};
    auto bad = gevrey_validate(t, steep);
    EXPECT_FALSE(bad.pass());
    ASSERT_TRUE(bad.first_violation);
    EXPECT_EQ(std::abs(bad.first_violation->second), 1);

    EXPECT_TRUE(gevrey_validate(CoefficientTable(grid, 5), steep).pass());
}

TEST(Gevrey, CatalogueEnvelopesHold) {
    for (double zeta : {1.0, 0.5}) {
        const auto w = gevrey_potential(2.0, {RadialProfile::Kind::power, 4.0}, 1.0, zeta);
        EXPECT_TRUE(gevrey_validate(coefficient_table(w, grid, 30), w.envelope).pass());
    }
    const auto c = cos_potential(1.5, exp_profile(), 2, 0.7);
    EXPECT_TRUE(gevrey_validate(coefficient_table(c, grid, 6), c.envelope).pass());
}

TEST(Gevrey, DefaultTruncation) {
    GevreyEnvelope env{1.0, 1.0, [](double) { return 1.0; }};
    const int m = default_m_max(env, grid);
    EXPECT_LT(std::exp(-1.0 * m), 1e-12);
    EXPECT_GE(std::exp(-1.0 * (m - 1)), 1e-12);
}

TEST(SymmetricSplit, Cases) {
    auto t = fourier_coefficients([](double, double th) { return 1 + std::cos(th); }, grid, 3, 16);
    auto s = symmetric_split(t);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(s.w_s[i], 1.0, 1e-14);
        EXPECT_EQ(s.w_ns.at(i, 0), cplx{});
        EXPECT_NEAR(s.w_ns.at(i, 1).real(), std::sqrt(pi / 2), 1e-14);
    }
    auto radial = symmetric_split(fourier_coefficients([](double r, double) { return r; }, grid, 3, 16));
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (int m = -3; m <= 3; ++m) EXPECT_NEAR(std::abs(radial.w_ns.at(i, m)), 0.0, 1e-14);
    auto cosine = symmetric_split(fourier_coefficients([](double, double th) { return std::cos(th); }, grid, 3, 16));
    for (double v : cosine.w_s) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Xi, GeometricClosedForm) {
    const double q = std::exp(-1.0);
    const double closed = (1 + q) / (1 - q);
    EXPECT_NEAR(closed, 2.163953, 1e-6);
    EXPECT_NEAR(xi_constant(2.0, 1.0, 1e-14), closed, 1e-12);
    EXPECT_NEAR(xi_constant(200.0, 1.0), 1.0, 1e-40 + 1e-15);
    EXPECT_DOUBLE_EQ(xi_constant(std::numeric_limits<double>::infinity(), 1.0), 1.0);
}

TEST(Xi, StretchedAgainstBruteForce) {
    for (double zeta : {0.5, 0.8}) {
        long double s = 1;
        for (long long m = 1; m < 200000; ++m) s += 2 * std::exp(-1.0L * std::pow(static_cast<long double>(m), zeta));
        EXPECT_NEAR(xi_constant(2.0, zeta, 1e-12), static_cast<double>(s), 1e-10) << "zeta=" << zeta;
    }
}

TEST(Xi, TailBoundDominatesTail) {
    for (double zeta : {0.5, 1.0}) {
        const double bound = xi_tail_bound(2.0, zeta, 20);
        double tail = 0;
        for (int m = 21; m < 200000; ++m) tail += 2 * std::exp(-std::pow(m, zeta));
        EXPECT_GE(bound, tail);
    }
}

TEST(Xi, TriangleInequalityRandomTriples) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<long long> jk(-100000, 100000);
    std::uniform_real_distribution<double> z(1e-3, 1.0);
    int violations = 0;
    for (int n = 0; n < 10000; ++n)
        if (!gevrey_triangle_holds(jk(rng), jk(rng), z(rng))) ++violations;
    EXPECT_EQ(violations, 0);
}

TEST(CoefficientTableCsv, RoundTrip) {
    const auto w = gevrey_potential(0.5, exp_profile(), 1.0, 1.0);
    const auto t = coefficient_table(w, grid, 5);
    const auto path = std::filesystem::temp_directory_path() / "maglocal_table_roundtrip.csv";
    io::atomic_write(path, coefficient_table_csv(t));
    const auto back = read_coefficient_table(path, grid);
    ASSERT_EQ(back.m_max(), 5);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (int m = -5; m <= 5; ++m) EXPECT_EQ(back.at(i, m), t.at(i, m));
    std::filesystem::remove(path);
}

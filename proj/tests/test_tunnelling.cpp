#include <gtest/gtest.h>

#include "maglocal/tunnelling.hpp"

using namespace maglocal;

namespace {

SpectralProjection free_projection(const FluxProfile& p, const RadialGrid& g, int j_max, double E0) {
    const auto h = assemble_hamiltonian(p, zero_potential(), g, j_max);
    return compute_window(h, zero_potential(), E0, std::nullopt).projection;
}

// independent route for W = 0: per-channel tridiagonal eigenvectors, masked, SVD
double channel_route_norm(const FluxProfile& p, const RadialGrid& g, int j, double e0, double E0, double lo, double hi) {
    const auto op = build_channel_operator(p, j, g);
    const auto es = channel_eigen(op, lapack::Range::values(e0 - 1e-12, E0), true);
    const std::size_t n = g.size(), k = es.values.size();
    if (k == 0) return 0.0;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
        if (g.node(i) >= lo && g.node(i) <= hi) rows.push_back(i);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k));
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t q = 0; q < rows.size(); ++q)
            m(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(c)) = es.vectors[c * n + rows[q]];
    if (m.rows() == 0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

} // namespace

TEST(DecayFit, ExactExponential) {
    std::vector<double> x, y;
    for (int j = 1; j <= 8; ++j) {
        x.push_back(j);
        y.push_back(3.0 * std::exp(-0.5 * j));
    }
    const auto f = decay_rate_fit(x, y);
    EXPECT_NEAR(f.slope, -0.5, 1e-14);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-14);
    EXPECT_NEAR(f.r2, 1.0, 1e-14);
}

TEST(DecayFit, ConstantAndErrors) {
    const auto f = decay_rate_fit({1, 2, 3, 4, 5}, {2, 2, 2, 2, 2});
    EXPECT_EQ(f.slope, 0.0);
    EXPECT_EQ(f.r2, 1.0);
    EXPECT_THROW(decay_rate_fit({1, 2, 3, 4}, {1, 0.5, 0.0, 0.1}), domain_error);
    EXPECT_THROW(decay_rate_fit({1, 2, 3}, {1, 0.5, 0.2}), domain_error);
}

TEST(TunnellingSum, EmptyProjectionGivesZeros) {
    const auto p = FluxProfile::power_law(1, 1.5);
    const RadialGrid g(100, 10.0);
    const auto h = assemble_hamiltonian(p, zero_potential(), g, 4);
    const auto proj = compute_window(h, zero_potential(), 0.01, std::nullopt).projection;
    ASSERT_TRUE(proj.empty());
    for (const auto& s : {tunnelling_interior_sum(proj, 0.3, 0.2, 1.5, 1.0, 4),
                          tunnelling_exterior_sum(proj, 1.0, 0.1, 1.5, 1.0, 4)}) {
        EXPECT_EQ(s.sum, 0.0);
        for (double t : s.term) EXPECT_EQ(t, 0.0);
        EXPECT_FALSE(s.tail_ratio);
    }
}

TEST(TunnellingSum, InteriorLinearFluxMatchesChannelRoute) {
    // below the inner turning point j/(1 + sqrt(E0)) the terms decay in |j|
    const auto p = FluxProfile::linear(1.0);
    const RadialGrid g(300, 30.0);
    const int jm = 8;
    const double E0 = 0.8, c = 0.3;
    const auto proj = free_projection(p, g, jm, E0);
    const auto s = tunnelling_interior_sum(proj, c, 0.0, 1.0, 1.0, jm);
    for (int j = 1; j <= jm; ++j) {
        const double lo = 0.0, hi = c * j;
        ASSERT_LT(hi, j / (1 + std::sqrt(E0)));
        const double ref = std::max(channel_route_norm(p, g, j, proj.window.e0, E0, lo, hi),
                                    channel_route_norm(p, g, -j, proj.window.e0, E0, lo, hi));
        EXPECT_NEAR(s.norm[static_cast<std::size_t>(j)], ref, 1e-12 + 1e-8 * ref) << "j=" << j;
        if (j > 1) EXPECT_LT(s.norm[static_cast<std::size_t>(j)], s.norm[static_cast<std::size_t>(j - 1)]);
    }
    ASSERT_TRUE(s.norm_fit);
    EXPECT_LT(s.norm_fit->slope, 0.0);
}

TEST(TunnellingSum, RunningSumAndStabilityUnderMoreChannels) {
    const auto p = FluxProfile::power_law(1, 1.5);
    const RadialGrid g(160, 16.0);
    const auto a = tunnelling_interior_sum(free_projection(p, g, 12, 1.0), 0.25, 0.25, 1.5, 1.0, 12);
    const auto b = tunnelling_interior_sum(free_projection(p, g, 16, 1.0), 0.25, 0.25, 1.5, 1.0, 16);
    for (std::size_t k = 1; k < a.running.size(); ++k) EXPECT_GE(a.running[k], a.running[k - 1]);
    EXPECT_EQ(a.sum, a.running.back());
    EXPECT_GT(a.sum, 0.0);
    EXPECT_NEAR(b.sum, a.sum, 0.01 * a.sum);
    ASSERT_TRUE(a.tail_ratio);
    EXPECT_LT(*a.tail_ratio, 1.0);
}

TEST(TunnellingSum, ExteriorWithoutWeightIsAContraction) {
    const auto p = FluxProfile::power_law(1, 1.5);
    const RadialGrid g(200, 24.0);
    const auto proj = free_projection(p, g, 10, 1.0);
    const auto s = tunnelling_exterior_sum(proj, 2.0, 0.0, 1.5, 1.0, 10);
    for (std::size_t k = 0; k < s.term.size(); ++k) {
        EXPECT_LE(s.term[k], 1.0 + 1e-12);
        EXPECT_NEAR(s.term[k], s.norm[k] * s.norm[k], 1e-15);
    }
}

TEST(TunnellingSum, ExteriorPowerLawFreeDecays) {
    const auto p = FluxProfile::power_law(1, 1.5);
    const RadialGrid g(200, 24.0);
    const auto proj = free_projection(p, g, 10, 1.0);
    const auto s = tunnelling_exterior_sum(proj, 2.0, 0.1, 1.5, 1.0, 10);
    EXPECT_TRUE(std::isfinite(s.sum));
    ASSERT_TRUE(s.tail_ratio);
    EXPECT_LT(*s.tail_ratio, 1.0);
}

TEST(TunnellingSum, CsvHasOneRowPerChannel) {
    const auto p = FluxProfile::power_law(1, 1.5);
    const auto s = tunnelling_interior_sum(free_projection(p, RadialGrid(100, 10.0), 5, 1.0), 0.3, 0.1, 1.5, 1.0, 5);
    const std::string csv = s.csv();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_EQ(csv.rfind("j,r_lo,r_hi,norm,weighted_term,running_sum\n", 0), 0u);
}

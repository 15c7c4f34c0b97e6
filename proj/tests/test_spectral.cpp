#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "maglocal/spectral.hpp"

using namespace maglocal;

namespace {

RadialProfile constant() { return {}; }
RadialProfile exp_profile() { return {RadialProfile::Kind::exp, 0.0, 1.0, 1.0}; }

MatrixC dense_matrix(const BlockHamiltonian& h) {
    const auto a = h.dense();
    return Eigen::Map<const MatrixC>(a.data(), static_cast<Eigen::Index>(h.dim()), static_cast<Eigen::Index>(h.dim()));
}

// || V1 V1^* - V2 V2^* || for two orthonormal bases of equal rank
double projector_distance(const MatrixC& v1, const MatrixC& v2) {
    // || (1 - P2) V1 || is the sine of the largest principal angle
    const MatrixC r = v1 - v2 * (v2.adjoint() * v1);
    Eigen::JacobiSVD<MatrixC> svd(r);
    return svd.singularValues()(0);
}

} // namespace

TEST(Assemble, ZeroPotentialIsBlockDiagonal) {
    const RadialGrid g(30, 5.0);
    const auto p = FluxProfile::power_law(1, 1.5);
    const auto h = assemble_hamiltonian(p, zero_potential(), g, 2);
    EXPECT_TRUE(h.block_diagonal());
    const MatrixC d = dense_matrix(h);
    for (int j = -2; j <= 2; ++j) {
        const auto op = build_channel_operator(p, j, g);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto a = static_cast<Eigen::Index>(h.index(j, i));
            EXPECT_EQ(d(a, a).real(), op.diagonal[i]);
            if (i + 1 < g.size()) EXPECT_EQ(d(a, a + 1).real(), op.off_diagonal[i]);
        }
    }
    // nothing between channels
    for (Eigen::Index r = 0; r < d.rows(); ++r)
        for (Eigen::Index c = 0; c < d.cols(); ++c)
            if (h.channel_of(static_cast<std::size_t>(r)) != h.channel_of(static_cast<std::size_t>(c))) EXPECT_EQ(d(r, c), cplx{});
}

TEST(Assemble, RadialPotentialShiftsDiagonal) {
    const RadialGrid g(30, 5.0);
    const auto p = FluxProfile::linear(1);
    const auto h0 = assemble_hamiltonian(p, zero_potential(), g, 2);
    const auto h = assemble_hamiltonian(p, radial_potential(0.7, exp_profile()), g, 2);
    EXPECT_TRUE(h.block_diagonal());
    EXPECT_TRUE(h.symmetric_part_included());
    for (int j = -2; j <= 2; ++j)
        for (std::size_t i = 0; i < g.size(); ++i)
            EXPECT_NEAR(h.diagonal(j, i) - h0.diagonal(j, i), 0.7 * std::exp(-g.node(i)), 1e-12);
}

TEST(Assemble, CosineCouplesNeighboursByOneHalf) {
    const RadialGrid g(20, 4.0);
    const auto h = assemble_hamiltonian(FluxProfile::uniform_field(1), cos_potential(1.0, constant(), 1), g, 3);
    EXPECT_FALSE(h.block_diagonal());
    const MatrixC d = dense_matrix(h);
    for (int j = -3; j <= 3; ++j)
        for (int k = -3; k <= 3; ++k) {
            if (j == k) continue;
            for (std::size_t i = 0; i < g.size(); ++i)
                for (std::size_t i2 = 0; i2 < g.size(); ++i2) {
                    const cplx v = d(static_cast<Eigen::Index>(h.index(j, i)), static_cast<Eigen::Index>(h.index(k, i2)));
                    const double expect = (std::abs(j - k) == 1 && i == i2) ? 0.5 : 0.0;
                    EXPECT_NEAR(std::abs(v - expect), 0.0, 1e-15);
                }
        }
    // exact Hermiticity
    EXPECT_EQ((d - d.adjoint()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Assemble, MismatchedTableGridIsRejected) {
    const RadialGrid g(20, 4.0), other(21, 4.0);
    const auto w = table_potential(CoefficientTable(other, 2), {}, NoDecay{});
    auto bad = w;
    std::get<CoefficientTable>(bad.source).at(0, 1) = 1.0;
    bad.zero = false;
    EXPECT_THROW(assemble_hamiltonian(FluxProfile::linear(1), bad, g, 2), construction_error);
}

TEST(Assemble, TruncationBeyondTwiceJmaxIsLogged) {
    const RadialGrid g(20, 4.0);
    const auto h = assemble_hamiltonian(FluxProfile::linear(1), gevrey_potential(1.0, constant(), 0.5, 1.0), g, 2);
    EXPECT_EQ(h.m_max(), 4);
    EXPECT_GT(h.dropped_coupling_bound(), 0.0);
    EXPECT_FALSE(h.warnings().empty());
}

TEST(Diagonalize, LandauMultiplicity) {
    const RadialGrid g(600, 10.0);
    const auto h = assemble_hamiltonian(FluxProfile::uniform_field(2), zero_potential(), g, 3);
    DiagonalizeOptions opt;
    opt.upper = 3.0;
    const auto es = diagonalize(h, opt);
    int near2 = 0;
    for (double v : es.values)
        if (std::abs(v - 2.0) < 1e-2) ++near2;
    EXPECT_GE(near2, 4);
    EXPECT_EQ(es.route, "channel_tridiagonal");
}

TEST(Diagonalize, SingleEntry) {
    auto r = lapack::heevr(1, {cplx(3.25, 0)}, lapack::Range::all(), true);
    ASSERT_EQ(r.values.size(), 1u);
    EXPECT_EQ(r.values[0], 3.25);
    auto t = lapack::stevr({-1.5}, {}, lapack::Range::all(), true);
    EXPECT_EQ(t.values.at(0), -1.5);
}

TEST(Diagonalize, OrthonormalAndSmallResiduals) {
    const RadialGrid g(40, 6.0);
    const auto h = assemble_hamiltonian(FluxProfile::power_law(1, 1.5), gevrey_potential(0.5, exp_profile(), 1.0, 1.0), g, 4);
    const auto es = diagonalize(h);
    EXPECT_EQ(es.route, "dense");
    EXPECT_EQ(es.size(), h.dim());
    const MatrixC gram = es.vectors.adjoint() * es.vectors;
    EXPECT_LT((gram - MatrixC::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(max_residual(h, es), 1e-9 * h.norm_bound());
    for (std::size_t k = 1; k < es.size(); ++k) EXPECT_LE(es.values[k - 1], es.values[k]);
}

TEST(Diagonalize, SlicedRouteMatchesDense) {
    const RadialGrid g(60, 7.0);
    const auto p = FluxProfile::power_law(1, 1.5);
    const auto h = assemble_hamiltonian(p, gevrey_potential(2.0, exp_profile(), 1.0, 1.0), g, 5);
    DiagonalizeOptions opt;
    opt.upper = 6.0;
    const auto dense = diagonalize(h, opt);
    opt.dense_limit = 0;
    opt.slice_target = 7;   // force several slices
    const auto sliced = diagonalize(h, opt);
    EXPECT_EQ(sliced.route, "sliced_lanczos");
    ASSERT_EQ(dense.size(), sliced.size());
    ASSERT_GT(dense.size(), 20u);
    for (std::size_t k = 0; k < dense.size(); ++k) EXPECT_NEAR(dense.values[k], sliced.values[k], 1e-9);
    EXPECT_LT(projector_distance(dense.vectors, sliced.vectors), 1e-8);
    EXPECT_LE(max_residual(h, sliced), 1e-9 * h.norm_bound());
    // the lowest eigenvalue by inertia bisection agrees too
    EXPECT_NEAR(lowest_eigenvalue(h, 0), dense.values.front(), 1e-10);
}

TEST(Diagonalize, SlicedRouteHandlesDegenerateClusters) {
    // W = 0 Landau model is massively degenerate; sliced route must still find every copy
    const RadialGrid g(80, 8.0);
    const auto h = assemble_hamiltonian(FluxProfile::uniform_field(2), zero_potential(), g, 4);
    DiagonalizeOptions opt;
    opt.upper = 7.0;
    const auto direct = diagonalize(h, opt);
    const auto t = h.block_tridiagonal();
    EXPECT_EQ(count_below(t, 7.0, t.gershgorin().second), direct.size());
    auto h2 = assemble_hamiltonian(FluxProfile::uniform_field(2), cos_potential(1e-9, exp_profile(), 1), g, 4);
    opt.dense_limit = 0;
    const auto sliced = diagonalize(h2, opt);
    ASSERT_EQ(sliced.size(), direct.size());
    for (std::size_t k = 0; k < direct.size(); ++k) EXPECT_NEAR(direct.values[k], sliced.values[k], 1e-8);
}

TEST(Projection, WindowCases) {
    const RadialGrid g(20, 4.0);
    const auto h = assemble_hamiltonian(FluxProfile::power_law(1, 1.5), gevrey_potential(0.5, exp_profile(), 1.0, 1.0), g, 2);
    const auto es = diagonalize(h);
    // everything
    auto all = spectral_projection(h, es, make_window(es.values.front(), es.values.back(), 1.0, 0.0));
    ASSERT_EQ(all.rank(), h.dim());
    const MatrixC id = all.vectors * all.vectors.adjoint();
    EXPECT_LT((id - MatrixC::Identity(id.rows(), id.cols())).cwiseAbs().maxCoeff(), 1e-10);
    // below the floor
    auto none = spectral_projection(h, es, make_window(es.values.front() - 2, es.values.front() - 1, 0.1, 0.0));
    EXPECT_TRUE(none.empty());
    EXPECT_EQ(channel_projection_norm(none, 0, 0, g.r_max()), 0.0);
    // ties at both edges are kept
    auto tie = spectral_projection(h, es, make_window(es.values[3], es.values[7], 0.1, 0.0));
    EXPECT_EQ(tie.rank(), 5u);
}

TEST(Projection, IdempotentAndRankMatchesCount) {
    const RadialGrid g(60, 7.0);
    const auto h = assemble_hamiltonian(FluxProfile::power_law(1, 1.5), gevrey_potential(2.0, exp_profile(), 1.0, 1.0), g, 5);
    const auto ws = compute_window(h, gevrey_potential(2.0, exp_profile(), 1.0, 1.0), 4.0, std::nullopt);
    const auto err = projector_errors(ws.projection);
    EXPECT_LE(err.idempotency, 1e-10);
    EXPECT_LE(err.self_adjointness, 1e-10);
    const auto all = diagonalize(h);
    std::size_t count = 0;
    for (double v : all.values)
        if (v >= ws.projection.window.e0 && v <= 4.0) ++count;
    EXPECT_EQ(ws.projection.rank(), count);
    EXPECT_NEAR(ws.projection.window.e0, all.values.front(), 1e-10);
    EXPECT_NEAR(ws.projection.window.delta0, 0.1 * (4.0 - all.values.front()), 1e-10);
}

TEST(Projection, CommutesWithChannelsWithoutCoupling) {
    const RadialGrid g(100, 12.0);
    const auto h = assemble_hamiltonian(FluxProfile::power_law(1, 1.5), zero_potential(), g, 6);
    const auto ws = compute_window(h, zero_potential(), 3.0, std::nullopt);
    ASSERT_GT(ws.projection.rank(), 0u);
    for (int j = -6; j <= 6; ++j) EXPECT_EQ(channel_commutator_norm(ws.projection, j), 0.0);

    const auto w = gevrey_potential(1.0, exp_profile(), 1.0, 1.0);
    const auto hc = assemble_hamiltonian(FluxProfile::power_law(1, 1.5), w, g, 6);
    const auto wc = compute_window(hc, w, 3.0, std::nullopt);
    EXPECT_GT(channel_commutator_norm(wc.projection, 1), 1e-6);
}

TEST(Projection, MaskedNorms) {
    const RadialGrid g(150, 15.0);
    const auto p = FluxProfile::power_law(1, 1.5);
    const auto h = assemble_hamiltonian(p, zero_potential(), g, 12);
    const auto ws = compute_window(h, zero_potential(), 1.0, std::nullopt);
    // a retained channel, full mask
    bool found = false;
    for (int j = -12; j <= 12; ++j) {
        double w = 0;
        for (std::size_t i = 0; i < g.size(); ++i)
            w += ws.projection.vectors.row(static_cast<Eigen::Index>(h.index(j, i))).squaredNorm();
        if (w > 0.5) {
            EXPECT_NEAR(channel_projection_norm(ws.projection, j, 0, g.r_max()), 1.0, 1e-12);
            found = true;
        }
    }
    EXPECT_TRUE(found);
    const double c = 0.3 * std::pow(12.0, 1 / 1.5);
    const double n12 = channel_projection_norm(ws.projection, 12, 0, c);
    const double n8 = channel_projection_norm(ws.projection, 8, 0, 0.3 * std::pow(8.0, 1 / 1.5));
    EXPECT_GT(n12, 0.0);
    EXPECT_LT(n12, n8);
    EXPECT_THROW(channel_projection_norm(ws.projection, 12, 0, 2 * g.r_max()), domain_error);
}

TEST(C0, Cases) {
    const RadialGrid g(400, 40.0);
    EXPECT_EQ(estimate_c0([](double) { return 0.0; }, 2.0, 1.0, g), 0.0);
    // constant v: shift identity up to the (tiny) bottom of the kinetic form
    const double xi = xi_constant(2.0, 1.0);
    const auto k = kinetic_operator(g, true);
    const double kmin = lapack::stevr(k.diagonal, k.off_diagonal, lapack::Range::indices(0, 0), false).values[0];
    EXPECT_GE(kmin, 0.0);
    EXPECT_NEAR(estimate_c0([](double) { return 0.3; }, 2.0, 1.0, g), xi * 0.3 - kmin, 1e-12);
    EXPECT_LT(kmin, 0.01);

    // e^{-r}: compare against an independent dense solve of the same comparison operator
    const RadialGrid gs(200, 20.0);
    const double c0 = estimate_c0([](double r) { return std::exp(-r); }, 2.0, 1.0, gs);
    const auto ks = kinetic_operator(gs, true);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(200, 200);
    for (int i = 0; i < 200; ++i) {
        m(i, i) = ks.diagonal[static_cast<std::size_t>(i)] - xi * std::exp(-gs.node(static_cast<std::size_t>(i)));
        if (i + 1 < 200) m(i, i + 1) = m(i + 1, i) = ks.off_diagonal[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    EXPECT_NEAR(c0, std::max(0.0, -es.eigenvalues()(0)), 1e-10);
    EXPECT_GT(c0, 0.0);
}

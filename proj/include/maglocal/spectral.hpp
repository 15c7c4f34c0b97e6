#pragma once
//
// maglocal : energy window, spectral projection E_I(H) and channel-resolved norms
//

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "eigensolver.hpp"
#include "errors.hpp"
#include "hamiltonian.hpp"
#include "perturbation.hpp"
#include "radial.hpp"

namespace maglocal {

struct SpectralWindow {
    double e0 = 0.0;        // bottom of the computed spectrum
    double E0 = 0.0;        // upper edge of I = [e0, E0]
    double delta0 = 0.0;
    double c0 = 0.0;
    double E_tilde = 0.0;   // E0 + c0 + delta0
};

// delta0 defaults to 0.1 (E0 - e0); e0 > E0 is allowed (empty window)
inline SpectralWindow make_window(double e0, double E0, std::optional<double> delta0, double c0) {
    SpectralWindow w;
    w.e0 = e0;
    w.E0 = E0;
    w.c0 = c0;
    w.delta0 = delta0 ? *delta0 : 0.1 * (E0 - e0);
    if (!(w.delta0 > 0.0))
        throw construction_error("window needs delta0 > 0 (E0 = " + io::fmt(E0) + ", e0 = " + io::fmt(e0) + ")");
    if (!(c0 >= 0.0)) throw construction_error("window needs c0 >= 0");
    w.E_tilde = E0 + c0 + w.delta0;
    return w;
}

//
// c0 = max(0, -lambda_min(K - xi(a, zeta) v)); K is the smallest channel kinetic form
//
inline double estimate_c0(const std::function<double(double)>& v, double a, double zeta, const RadialGrid& grid) {
    const std::size_t n = grid.size();
    std::vector<double> vv(n);
    bool zero = true;
    for (std::size_t i = 0; i < n; ++i) {
        vv[i] = v(grid.node(i));
        if (vv[i] < 0.0) throw domain_error("estimate_c0 needs v >= 0 on the grid");
        zero = zero && vv[i] == 0.0;
    }
    if (zero) return 0.0;
    const double xi = std::isinf(a) ? 1.0 : xi_constant(a, zeta);
    ChannelOperator k = kinetic_operator(grid, true);
    for (std::size_t i = 0; i < n; ++i) k.diagonal[i] -= xi * vv[i];
    const double lmin = channel_eigen(k, lapack::Range::indices(0, 0), false).values.at(0);
    return std::max(0.0, -lmin);
}

// c0 for a potential: v = b / sqrt(2 pi) so that sum_m |coupling| <= xi v
inline double estimate_c0(const AngularPotential& w, const RadialGrid& grid) {
    if (w.zero) return 0.0;
    const auto b = w.envelope.b;
    return estimate_c0([b](double r) { return b(r) / sqrt_2pi; }, w.envelope.a, w.envelope.zeta, grid);
}

//
// lowest eigenvalue of H (all routes)
//
inline double lowest_eigenvalue(const BlockHamiltonian& h, std::size_t dense_limit = 4000) {
    if (h.block_diagonal()) {
        double lo = std::numeric_limits<double>::infinity();
        for (int j = -h.j_max(); j <= h.j_max(); ++j) {
            std::vector<double> d(h.n_r());
            for (std::size_t i = 0; i < h.n_r(); ++i) d[i] = h.diagonal(j, i);
            lo = std::min(lo, lapack::stevr(d, h.channel(j).off_diagonal, lapack::Range::indices(0, 0), false).values.at(0));
        }
        return lo;
    }
    if (h.dim() <= dense_limit)
        return lapack::heevr(h.dim(), h.dense(), lapack::Range::indices(0, 0), false).values.at(0);
    // bisection on exact inertia counts
    const auto t = h.block_tridiagonal();
    auto [lo, norm] = t.gershgorin();
    double hi = lo + 1.0;
    while (count_below(t, hi, norm) == 0) hi = lo + 2.0 * (hi - lo);
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (count_below(t, mid, norm) == 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct SpectralProjection {
    SpectralWindow window;
    std::vector<double> eigenvalues;   // selected, ascending
    MatrixC vectors;                   // dim x rank, Euclidean-orthonormal (flat layout)
    std::vector<std::size_t> selector; // indices into the source eigensystem
    RadialGrid grid;
    int j_max = 0;
    std::string route;
    double max_residual = 0.0;

    std::size_t rank() const noexcept { return eigenvalues.size(); }
    bool empty() const noexcept { return rank() == 0; }
    std::size_t n_r() const noexcept { return grid.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(2 * j_max + 1) * grid.size(); }
};

// closed window [e0, E0]; ties at the edges are kept
inline SpectralProjection spectral_projection(const BlockHamiltonian& h, const EigenSystem& es,
                                              const SpectralWindow& window) {
    if (es.upper && *es.upper < window.E0)
        throw numerical_error("eigensystem only covers energies <= " + io::fmt(*es.upper) + " < E0");
    SpectralProjection p;
    p.window = window;
    p.grid = h.grid();
    p.j_max = h.j_max();
    p.route = es.route;
    p.max_residual = es.max_residual;
    for (std::size_t k = 0; k < es.values.size(); ++k)
        if (es.values[k] >= window.e0 && es.values[k] <= window.E0) p.selector.push_back(k);
    p.vectors = MatrixC(static_cast<Eigen::Index>(h.dim()), static_cast<Eigen::Index>(p.selector.size()));
    for (std::size_t c = 0; c < p.selector.size(); ++c) {
        p.eigenvalues.push_back(es.values[p.selector[c]]);
        if (es.vectors.cols() > 0)
            p.vectors.col(static_cast<Eigen::Index>(c)) = es.vectors.col(static_cast<Eigen::Index>(p.selector[c]));
    }
    return p;
}

// everything in one call: eigenpairs up to E0, e0 from the computed spectrum, c0, window
struct WindowedSpectrum {
    EigenSystem system;
    SpectralProjection projection;
};

inline WindowedSpectrum compute_window(const BlockHamiltonian& h, const AngularPotential& w, double E0,
                                       std::optional<double> delta0, DiagonalizeOptions opt = {}) {
    opt.upper = E0;
    opt.vectors = true;
    WindowedSpectrum out;
    out.system = diagonalize(h, opt);
    const double e0 = out.system.values.empty() ? lowest_eigenvalue(h, opt.dense_limit) : out.system.values.front();
    const double c0 = estimate_c0(w, h.grid());
    // a window below the spectrum floor is legal and yields a rank-0 projection
    if (!delta0 && !(E0 > e0)) delta0 = E0 < e0 ? 0.1 * (e0 - E0) : 0.1;
    const auto win = make_window(e0, E0, delta0, c0);
    out.projection = spectral_projection(h, out.system, win);
    return out;
}

//
// projector checks
//
struct ProjectorErrors {
    double idempotency = 0.0;      // ||P^2 - P||
    double self_adjointness = 0.0; // ||G - G^*|| on the retained basis
    double orthonormality = 0.0;   // ||V^* V - I||
};

inline ProjectorErrors projector_errors(const SpectralProjection& p) {
    ProjectorErrors e;
    if (p.empty()) return e;
    const MatrixC g = p.vectors.adjoint() * p.vectors;
    e.self_adjointness = (g - g.adjoint()).cwiseAbs().maxCoeff();
    const MatrixC gh = 0.5 * (g + g.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixC> es(gh, Eigen::EigenvaluesOnly);
    // nonzero spectrum of P = V V^* is that of G, so ||P^2 - P|| = max |mu^2 - mu|
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        const double mu = es.eigenvalues()(k);
        e.idempotency = std::max(e.idempotency, std::abs(mu * mu - mu));
        e.orthonormality = std::max(e.orthonormality, std::abs(mu - 1.0));
    }
    return e;
}

// rows of V belonging to channel j with r in [r_lo, r_hi], optionally scaled by weight(r)
inline MatrixC masked_rows(const SpectralProjection& p, int j, double r_lo, double r_hi,
                           const std::function<double(double)>* weight = nullptr) {
    std::vector<std::size_t> nodes;
    for (std::size_t i = 0; i < p.n_r(); ++i) {
        const double r = p.grid.node(i);
        if (r >= r_lo && r <= r_hi) nodes.push_back(i);
    }
    MatrixC m(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(p.rank()));
    if (std::abs(j) > p.j_max) return MatrixC(0, static_cast<Eigen::Index>(p.rank()));
    const std::size_t base = static_cast<std::size_t>(j + p.j_max) * p.n_r();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const double s = weight ? (*weight)(p.grid.node(nodes[k])) : 1.0;
        m.row(static_cast<Eigen::Index>(k)) = s * p.vectors.row(static_cast<Eigen::Index>(base + nodes[k]));
    }
    return m;
}

inline double largest_singular_value(const MatrixC& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    Eigen::JacobiSVD<MatrixC> svd(m);
    return svd.singularValues()(0);
}

// || 1_[r_lo, r_hi](r) w(r) P_j E_I ||: largest singular value of the masked eigenvector rows
inline double channel_projection_norm(const SpectralProjection& p, int j, double r_lo, double r_hi,
                                      const std::function<double(double)>* weight = nullptr) {
    if (p.empty()) return 0.0;
    if (r_lo < 0.0 || r_hi > p.grid.r_max() + 1e-12 || r_lo > r_hi)
        throw domain_error("channel_projection_norm: region must lie inside [0, r_max]");
    return largest_singular_value(masked_rows(p, j, r_lo, r_hi, weight));
}

// several channels masked together (rows stacked), e.g. the pair {j, -j}
inline double channels_projection_norm(const SpectralProjection& p, const std::vector<int>& js, double r_lo,
                                       double r_hi, const std::function<double(double)>* weight = nullptr) {
    if (p.empty()) return 0.0;
    std::vector<MatrixC> parts;
    Eigen::Index rows = 0;
    for (int j : js) {
        parts.push_back(masked_rows(p, j, r_lo, r_hi, weight));
        rows += parts.back().rows();
    }
    MatrixC m(rows, static_cast<Eigen::Index>(p.rank()));
    Eigen::Index o = 0;
    for (const auto& part : parts) {
        m.middleRows(o, part.rows()) = part;
        o += part.rows();
    }
    return largest_singular_value(m);
}

// || P_j E_I - E_I P_j || = || P_j E_I (1 - P_j) ||; with A = P_j V and B = (1 - P_j) V its
// square is the top eigenvalue of (B^* B)(A^* A). Exactly zero when every vector lives in
// one channel.
inline double channel_commutator_norm(const SpectralProjection& p, int j) {
    if (p.empty()) return 0.0;
    const Eigen::Index k = static_cast<Eigen::Index>(p.rank());
    const auto base = static_cast<Eigen::Index>(static_cast<std::size_t>(j + p.j_max) * p.n_r());
    const auto n = static_cast<Eigen::Index>(p.n_r());
    const MatrixC a = p.vectors.middleRows(base, n);
    MatrixC b = p.vectors;
    b.middleRows(base, n).setZero();
    const MatrixC c = (b.adjoint() * b) * (a.adjoint() * a);
    if (c.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    Eigen::ComplexEigenSolver<MatrixC> es(c, false);
    double mx = 0.0;
    for (Eigen::Index q = 0; q < k; ++q) mx = std::max(mx, es.eigenvalues()(q).real());
    return std::sqrt(std::max(0.0, mx));
}

} // namespace maglocal

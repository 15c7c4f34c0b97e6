#pragma once
//
// maglocal : symmetric tridiagonal discretization of one angular-momentum channel
//
// We work with u = sqrt(r) phi, which maps L^2(r dr) onto L^2(dr). The radial form
//   int |phi'|^2 r dr + int V_j |phi|^2 r dr
// is discretized in flux-conservative form with half-node radii r_{i +- 1/2}:
//   diag_i = (r_{i-1/2} + r_{i+1/2}) / (h^2 r_i) + V_j(r_i)
//   off_i  = -r_{i+1/2} / (h^2 sqrt(r_i r_{i+1}))
// which is the symmetric form of -u'' - u/(4r^2) + V_j u. For j = 0 the wave function
// is regular and nonzero at the origin, so the r_{1/2} flux is dropped (natural
// boundary); every other channel vanishes at 0 and gets Dirichlet.
//

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "flux.hpp"
#include "grid.hpp"
#include "lapack.hpp"

namespace maglocal {

struct ChannelOperator {
    int j = 0;
    RadialGrid grid;
    std::vector<double> diagonal;
    std::vector<double> off_diagonal;

    std::size_t size() const noexcept { return diagonal.size(); }
};

// kinetic part alone; natural_origin selects the j = 0 boundary treatment
inline ChannelOperator kinetic_operator(const RadialGrid& grid, bool natural_origin) {
    const std::size_t n = grid.size();
    const double h = grid.h();
    const double h2 = h * h;
    ChannelOperator op;
    op.grid = grid;
    op.diagonal.resize(n);
    op.off_diagonal.resize(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = grid.node(i);
        const double rm = (i == 0 && natural_origin) ? 0.0 : r - 0.5 * h;
        op.diagonal[i] = (rm + r + 0.5 * h) / (h2 * r);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double r = grid.node(i), rn = grid.node(i + 1);
        op.off_diagonal[i] = -(r + 0.5 * h) / (h2 * std::sqrt(r * rn));
    }
    return op;
}

inline ChannelOperator build_channel_operator(const FluxProfile& profile, int j, const RadialGrid& grid) {
    ChannelOperator op = kinetic_operator(grid, j == 0);
    op.j = j;
    for (std::size_t i = 0; i < grid.size(); ++i) op.diagonal[i] += effective_potential(profile, j, grid.node(i));
    return op;
}

inline lapack::EigenResult<double> channel_eigen(const ChannelOperator& op, const lapack::Range& range, bool vectors) {
    return lapack::stevr(op.diagonal, op.off_diagonal, range, vectors);
}

// flat u <-> weighted phi = u / sqrt(r)
template <class T>
std::vector<T> to_weighted(const std::vector<T>& u, const RadialGrid& grid) {
    std::vector<T> phi(u.size());
    const std::size_t n = grid.size();
    for (std::size_t k = 0; k < u.size(); ++k) phi[k] = u[k] / std::sqrt(grid.node(k % n));
    return phi;
}

template <class T>
std::vector<T> to_flat(const std::vector<T>& phi, const RadialGrid& grid) {
    std::vector<T> u(phi.size());
    const std::size_t n = grid.size();
    for (std::size_t k = 0; k < phi.size(); ++k) u[k] = phi[k] * std::sqrt(grid.node(k % n));
    return u;
}

// Box-size guidance: r_max should be >= 1.5 x the outermost turning point among |j| <= J_max
// at energy E0. Returns a warning text when it is not (or when a region touches the box edge).
inline std::optional<std::string> truncation_warning(const FluxProfile& profile, const RadialGrid& grid, int j_max,
                                                     double e0_upper) {
    if (e0_upper < 0.0) return std::nullopt;
    double outer = 0.0;
    bool touches = false;
    for (int j = -j_max; j <= j_max; ++j) {
        const auto reg = classical_region(profile, j, e0_upper, grid);
        if (!reg.interval) continue;
        outer = std::max(outer, reg.interval->second);
        if (!reg.closed_form && reg.interval->second >= grid.node(grid.size() - 1)) touches = true;
    }
    if (touches)
        return "classical region reaches the box edge at E0 = " + std::to_string(e0_upper) + "; increase grid.r_max";
    if (outer > 0.0 && grid.r_max() < 1.5 * outer)
        return "r_max = " + std::to_string(grid.r_max()) + " is below 1.5 x the outer turning point " +
               std::to_string(outer) + " at E0 = " + std::to_string(e0_upper);
    return std::nullopt;
}

} // namespace maglocal

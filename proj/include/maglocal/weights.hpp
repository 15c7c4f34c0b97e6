#pragma once
//
// maglocal : channel weights F_j(r), their hypotheses on the grid, and the twisted gap
//
//   interior  F_j(r) = |j|^{zeta (1 - 1/s+)} (eps |j|^{zeta/s+} - r)_+     for |j| >= j0 + 1
//   exterior  G_j(r) = c [r^{zeta s-} - eta^{zeta s-} (1 + |j|)^zeta]_+
//   mobility  H_j(r) = delta1 (r - eta1 |j|)_+
//
// Hypotheses checked node by node:
//   (F')  (F_j')^2 <= V_j - E~ chi_j^perp      chi_j = 1{V_j <= E~} exactly on the nodes
//   bounded: max e^{F_j} over the classical nodes
//   efw:  |F_j - F_k| <= (a/2) |j - k|^zeta
//

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "eigensolver.hpp"
#include "errors.hpp"
#include "flux.hpp"
#include "hamiltonian.hpp"
#include "spectral.hpp"

namespace maglocal {

struct WeightSequence {
    enum class Kind { zero, interior, exterior, mobility } kind = Kind::zero;
    // interior
    double eps = 0.0;
    int j0 = 0;
    double sigma_plus = 1.0;
    // exterior
    double c = 0.0;
    double eta = 1.0;
    double sigma_minus = 1.0;
    // mobility
    double delta1 = 0.0;
    double eta1 = 0.0;
    double zeta = 1.0;

    // tunnelling constants implied by the construction
    double c_plus = 0.0, delta_plus = 0.0;
    double c_minus = 0.0, delta_minus = 0.0;

    std::string name() const {
        switch (kind) {
        case Kind::interior: return "interior";
        case Kind::exterior: return "exterior";
        case Kind::mobility: return "mobility";
        default: return "zero";
        }
    }

    double value(int j, double r) const {
        const double aj = std::abs(j);
        switch (kind) {
        case Kind::interior:
            if (std::abs(j) < j0 + 1) return 0.0;
            return std::pow(aj, zeta * (1.0 - 1.0 / sigma_plus)) * std::max(0.0, eps * std::pow(aj, zeta / sigma_plus) - r);
        case Kind::exterior:
            return c * std::max(0.0, std::pow(r, zeta * sigma_minus) - std::pow(eta, zeta * sigma_minus) * std::pow(1.0 + aj, zeta));
        case Kind::mobility: return delta1 * std::max(0.0, r - eta1 * aj);
        default: return 0.0;
        }
    }

    // |F_j'(r)|; at a kink the larger one-sided value is returned
    double slope(int j, double r) const {
        const double aj = std::abs(j);
        switch (kind) {
        case Kind::interior:
            if (std::abs(j) < j0 + 1) return 0.0;
            return r <= eps * std::pow(aj, zeta / sigma_plus) ? std::pow(aj, zeta * (1.0 - 1.0 / sigma_plus)) : 0.0;
        case Kind::exterior: {
            const double s = zeta * sigma_minus;
            return r >= eta * std::pow(1.0 + aj, 1.0 / sigma_minus) ? c * s * std::pow(r, s - 1.0) : 0.0;
        }
        case Kind::mobility: return r >= eta1 * aj ? delta1 : 0.0;
        default: return 0.0;
        }
    }
};

inline WeightSequence zero_weight() { return {}; }

inline WeightSequence interior_weight(double eps, int j0, double sigma_plus, double zeta) {
    WeightSequence w;
    w.kind = WeightSequence::Kind::interior;
    w.eps = eps;
    w.j0 = j0;
    w.sigma_plus = sigma_plus;
    w.zeta = zeta;
    // F_j >= (eps/2)|j|^zeta on [0, (eps/2)|j|^{zeta/s+}]
    w.c_plus = 0.5 * eps;
    w.delta_plus = 0.5 * eps;
    return w;
}

inline WeightSequence exterior_weight(double c, double eta, double sigma_minus, double zeta) {
    WeightSequence w;
    w.kind = WeightSequence::Kind::exterior;
    w.c = c;
    w.eta = eta;
    w.sigma_minus = sigma_minus;
    w.zeta = zeta;
    // G_j >= (c/2) r^{zeta s-} once r^{zeta s-} >= 2 eta^{zeta s-} (1+|j|)^zeta, which holds
    // for r >= eta 4^{1/s-} |j|^{1/s-} when |j| >= 1
    w.c_minus = eta * std::pow(4.0, 1.0 / sigma_minus);
    w.delta_minus = 0.5 * c;
    return w;
}

inline WeightSequence mobility_weight(double delta1, double eta1) {
    WeightSequence w;
    w.kind = WeightSequence::Kind::mobility;
    w.delta1 = delta1;
    w.eta1 = eta1;
    return w;
}

// right-hand side of (F'): V_j - E~ on forbidden nodes, V_j on allowed ones
inline double slope_budget(const FluxProfile& p, int j, double r, double e_tilde) {
    const double v = effective_potential(p, j, r);
    return v <= e_tilde ? v : v - e_tilde;
}

//
// parameter extraction (scan the grid for the largest admissible constants)
//
struct WeightBuildParams {
    double a = std::numeric_limits<double>::infinity();   // Gevrey rate of W (inf when W = 0)
    double zeta = 1.0;
    int j_max = 0;
};

inline WeightSequence build_interior_weight(const FluxProfile& p, const SpectralWindow& win, const RadialGrid& grid,
                                            const WeightBuildParams& bp) {
    const auto& g = p.growth();
    const double s = g.sigma_plus, z = bp.zeta;
    if (!validate_growth_conditions(p, grid).upper_pass)
        throw construction_error("interior weight: upper growth condition fails on this grid");
    // r_fail(j): first node where a slope of |j|^{z(1 - 1/s)} violates (F')
    std::vector<double> limit(static_cast<std::size_t>(bp.j_max) + 1, std::numeric_limits<double>::infinity());
    for (int aj = 1; aj <= bp.j_max; ++aj) {
        const double slope2 = std::pow(aj, 2.0 * z * (1.0 - 1.0 / s));
        double r_fail = std::numeric_limits<double>::infinity();
        for (int sign : {1, -1})
            for (std::size_t i = 0; i < grid.size(); ++i)
                if (slope2 > slope_budget(p, sign * aj, grid.node(i), win.E_tilde)) {
                    r_fail = std::min(r_fail, grid.node(i));
                    break;
                }
        limit[static_cast<std::size_t>(aj)] = r_fail / std::pow(aj, z / s);
    }
    double best_eps = 0.0;
    int best_j0 = -1;
    std::string why = "no channel admits a positive support";
    for (int j0 = 0; j0 < bp.j_max; ++j0) {
        double eps = std::isinf(bp.a) ? std::numeric_limits<double>::infinity() : bp.a / (2.0 * std::pow(j0 + 1.0, z));
        for (int aj = j0 + 1; aj <= bp.j_max; ++aj) eps = std::min(eps, 0.999 * limit[static_cast<std::size_t>(aj)]);
        if (std::isinf(eps)) eps = 0.999 * grid.r_max();   // nothing binds: cap at the box
        if (eps > best_eps) {
            best_eps = eps;
            best_j0 = j0;
        }
    }
    if (best_j0 < 0 || !(best_eps > 0.0))
        throw construction_error("interior weight: " + why + " (F' budget V_j - E~ too small near the origin)");
    return interior_weight(best_eps, best_j0, s, z);
}

inline WeightSequence build_exterior_weight(const FluxProfile& p, const SpectralWindow& win, const RadialGrid& grid,
                                            const WeightBuildParams& bp) {
    const auto& g = p.growth();
    const double sm = g.sigma_minus, z = bp.zeta, s = z * sm;
    if (!validate_growth_conditions(p, grid).lower_pass)
        throw construction_error("exterior weight: lower growth condition fails on this grid");
    const double eta_lo = std::max(g.r0, 1.0 + 1e-9);
    if (!(grid.r_max() > eta_lo)) throw construction_error("exterior weight: r_max must exceed max(r0, 1)");
    double best_c = 0.0, best_eta = eta_lo;
    const int steps = 200;
    const double ratio = std::pow(grid.r_max() / eta_lo, 1.0 / steps);
    double eta = eta_lo;
    for (int k = 0; k < steps; ++k, eta *= ratio) {
        double c_v = std::numeric_limits<double>::infinity();
        bool any = false;
        for (int j = -bp.j_max; j <= bp.j_max; ++j) {
            const double t = eta * std::pow(1.0 + std::abs(j), 1.0 / sm);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double r = grid.node(i);
                if (r < t) continue;
                any = true;
                const double budget = slope_budget(p, j, r, win.E_tilde);
                c_v = std::min(c_v, std::sqrt(std::max(0.0, budget)) / (s * std::pow(r, s - 1.0)));
            }
        }
        if (!any) break;   // support left the box
        double c = 0.999 * c_v;
        if (!std::isinf(bp.a)) c = std::min(c, bp.a / (2.0 * std::pow(eta, s)));
        if (c > best_c) {
            best_c = c;
            best_eta = eta;
        }
    }
    if (!(best_c > 0.0))
        throw construction_error("exterior weight: no (eta, c) satisfies (F') on this grid");
    return exterior_weight(best_c, best_eta, sm, z);
}

// linear flux lambda r, E~ < lambda^2: 2 lambda / eta1 <= (lambda^2 - E~)/2 and delta1^2 <= (lambda^2 - E~)/2
inline WeightSequence build_mobility_weight(const FluxProfile& p, const SpectralWindow& win, const WeightBuildParams& bp) {
    const auto lambda = p.linear_lambda();
    if (!lambda) throw construction_error("mobility weight needs a linear flux profile");
    const double gap = (*lambda) * (*lambda) - win.E_tilde;
    if (!(gap > 0.0))
        throw construction_error("mobility weight needs E~ < lambda^2 (E~ = " + io::fmt(win.E_tilde) + ")");
    const double eta1 = std::max(4.0 * (*lambda) / gap, 1.0001 / gap);
    double delta1 = std::sqrt(0.5 * gap);
    if (!std::isinf(bp.a)) delta1 = std::min(delta1, bp.a / (2.0 * eta1));
    return mobility_weight(0.99 * delta1, eta1);
}

inline WeightSequence build_weight(WeightSequence::Kind kind, const FluxProfile& p, const SpectralWindow& win,
                                   const RadialGrid& grid, const WeightBuildParams& bp) {
    switch (kind) {
    case WeightSequence::Kind::interior: return build_interior_weight(p, win, grid, bp);
    case WeightSequence::Kind::exterior: return build_exterior_weight(p, win, grid, bp);
    case WeightSequence::Kind::mobility: return build_mobility_weight(p, win, bp);
    default: return zero_weight();
    }
}

//
// validation
//
struct WeightReport {
    // (F')
    std::size_t slope_checks = 0;
    std::size_t slope_violations = 0;
    double slope_worst_slack = std::numeric_limits<double>::infinity();
    std::optional<std::pair<int, double>> slope_first_violation;   // (j, r)
    // bounded on the classical region
    double max_exp_on_classical = 1.0;
    bool bounded = true;
    bool vanishes_on_classical = true;
    // efw
    bool efw_required = true;
    std::size_t efw_checks = 0;
    std::size_t efw_violations = 0;
    double efw_worst_ratio = 0.0;   // max |F_j - F_k| / ((a/2)|j-k|^zeta)
    std::optional<std::pair<int, int>> efw_first_violation;

    bool slope_pass() const noexcept { return slope_violations == 0; }
    bool efw_pass() const noexcept { return !efw_required || efw_violations == 0; }
    bool pass() const noexcept { return slope_pass() && bounded && efw_pass(); }
};

inline WeightReport weight_validate(const WeightSequence& f, const FluxProfile& p, const SpectralWindow& win, double a,
                                    double zeta, const RadialGrid& grid, int j_max) {
    WeightReport rep;
    const std::size_t n = grid.size();
    const std::size_t nc = static_cast<std::size_t>(2 * j_max + 1);
    std::vector<double> val(nc * n);
    for (int j = -j_max; j <= j_max; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const double r = grid.node(i);
            const double fv = f.value(j, r);
            val[static_cast<std::size_t>(j + j_max) * n + i] = fv;
            const double sl = f.slope(j, r);
            const double slack = slope_budget(p, j, r, win.E_tilde) - sl * sl;
            ++rep.slope_checks;
            rep.slope_worst_slack = std::min(rep.slope_worst_slack, slack);
            if (slack < 0.0) {
                ++rep.slope_violations;
                if (!rep.slope_first_violation) rep.slope_first_violation = std::make_pair(j, r);
            }
            if (effective_potential(p, j, r) <= win.E_tilde) {
                rep.max_exp_on_classical = std::max(rep.max_exp_on_classical, std::exp(fv));
                if (fv != 0.0) rep.vanishes_on_classical = false;
            }
        }
    rep.bounded = std::isfinite(rep.max_exp_on_classical);

    rep.efw_required = !std::isinf(a);
    if (rep.efw_required) {
        for (int j = -j_max; j <= j_max; ++j)
            for (int k = j + 1; k <= j_max; ++k) {
                const double allowed = 0.5 * a * std::pow(k - j, zeta);
                const double* fj = &val[static_cast<std::size_t>(j + j_max) * n];
                const double* fk = &val[static_cast<std::size_t>(k + j_max) * n];
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = std::abs(fj[i] - fk[i]);
                    ++rep.efw_checks;
                    rep.efw_worst_ratio = std::max(rep.efw_worst_ratio, d / allowed);
                    if (d > allowed * (1.0 + 1e-12) + 1e-12) {
                        ++rep.efw_violations;
                        if (!rep.efw_first_violation) rep.efw_first_violation = std::make_pair(j, k);
                    }
                }
            }
    }
    return rep;
}

//
// twisted gap: lowest eigenvalue of (1/2)(e^F H~ e^{-F} + e^{-F} H~ e^F), H~ = H + E~ chi
//
struct TwistedGapReport {
    double threshold = 0.0;     // E0 + delta0/2
    double lowest = 0.0;        // lowest eigenvalue of the symmetrized twisted matrix
    double slack = 0.0;         // lowest - threshold
    std::size_t below = 0;      // eigenvalues under the threshold (exact inertia)
    bool pass() const noexcept { return below == 0 && slack >= 0.0; }
};

inline BlockTridiagonal twisted_matrix(const BlockHamiltonian& h, const FluxProfile& p, const WeightSequence& f,
                                       const SpectralWindow& win) {
    const std::size_t n = h.n_r();
    const int jm = h.j_max();
    std::vector<double> chi(h.dim(), 0.0);
    for (int j = -jm; j <= jm; ++j)
        for (std::size_t i = 0; i < n; ++i)
            if (effective_potential(p, j, h.grid().node(i)) <= win.E_tilde) chi[h.index(j, i)] = win.E_tilde;
    BlockTridiagonal t = h.block_tridiagonal(&chi);
    auto fv = [&](int j, std::size_t i) { return f.value(j, h.grid().node(i)); };
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = -jm; j <= jm; ++j) {
            const auto a = static_cast<Eigen::Index>(j + jm);
            if (i + 1 < n) t.lower[i](a) *= std::cosh(fv(j, i) - fv(j, i + 1));
            for (int k = -jm; k <= jm; ++k)
                if (k != j && t.diag[i](a, k + jm) != cplx{}) t.diag[i](a, k + jm) *= std::cosh(fv(j, i) - fv(k, i));
        }
    }
    return t;
}

inline TwistedGapReport twisted_gap_check(const BlockHamiltonian& h, const FluxProfile& p, const WeightSequence& f,
                                          const SpectralWindow& win) {
    const BlockTridiagonal t = twisted_matrix(h, p, f, win);
    const auto [lo0, norm] = t.gershgorin();
    TwistedGapReport rep;
    rep.threshold = win.E0 + 0.5 * win.delta0;
    rep.below = count_below(t, rep.threshold, norm);
    // lowest eigenvalue by inertia bisection
    double lo = lo0, hi = rep.threshold;
    if (rep.below == 0) {
        hi = rep.threshold + 1.0;
        while (count_below(t, hi, norm) == 0) hi = rep.threshold + 2.0 * (hi - rep.threshold);
        lo = rep.threshold;
    }
    for (int it = 0; it < 100 && hi - lo > 1e-11 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (count_below(t, mid, norm) == 0 ? lo : hi) = mid;
    }
    rep.lowest = 0.5 * (lo + hi);
    rep.slack = rep.below == 0 ? lo - rep.threshold : rep.lowest - rep.threshold;
    return rep;
}

} // namespace maglocal

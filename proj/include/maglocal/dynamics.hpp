#pragma once
//
// maglocal : window-projected states, exact eigenbasis propagation, moment observables,
// and the dynamical checks built on them
//
// Normalization: flat amplitudes u_{j,i} = sqrt(r_i) phi_{j,i} with ||phi||^2 = sum |u|^2 h.
// The eigenvectors v are Euclidean-orthonormal, so the Euclidean vector x = u sqrt(h)
// carries the same norm.
//

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "flux.hpp"
#include "io.hpp"
#include "perturbation.hpp"
#include "radial.hpp"
#include "spectral.hpp"
#include "tunnelling.hpp"

namespace maglocal {

struct WaveState {
    enum class Representation { flat, weighted };

    RadialGrid grid;
    int j_max = 0;
    VectorC amplitudes;   // channel-major (j + J) n_r + i
    double time = 0.0;
    Representation representation = Representation::flat;

    std::size_t n_r() const noexcept { return grid.size(); }

    // Euclidean vector x = sqrt(h) u
    VectorC euclidean() const {
        VectorC x = to_flat().amplitudes;
        x *= std::sqrt(grid.h());
        return x;
    }

    WaveState to_flat() const {
        if (representation == Representation::flat) return *this;
        WaveState s = *this;
        for (Eigen::Index k = 0; k < s.amplitudes.size(); ++k)
            s.amplitudes[k] *= std::sqrt(grid.node(static_cast<std::size_t>(k) % n_r()));
        s.representation = Representation::flat;
        return s;
    }

    WaveState to_weighted() const {
        if (representation == Representation::weighted) return *this;
        WaveState s = *this;
        for (Eigen::Index k = 0; k < s.amplitudes.size(); ++k)
            s.amplitudes[k] /= std::sqrt(grid.node(static_cast<std::size_t>(k) % n_r()));
        s.representation = Representation::weighted;
        return s;
    }

    double norm2() const { return euclidean().squaredNorm(); }

    double channel_norm2(int j) const {
        if (std::abs(j) > j_max) return 0.0;
        const auto f = to_flat();
        const auto base = static_cast<Eigen::Index>(static_cast<std::size_t>(j + j_max) * n_r());
        return f.amplitudes.segment(base, static_cast<Eigen::Index>(n_r())).squaredNorm() * grid.h();
    }

    static WaveState from_euclidean(const RadialGrid& g, int j_max, const VectorC& x, double t) {
        WaveState s;
        s.grid = g;
        s.j_max = j_max;
        s.amplitudes = x / std::sqrt(g.h());
        s.time = t;
        return s;
    }
};

//
// moments
//
// <|x|^nu> = sum r_i^nu |phi_{j,i}|^2 r_i h
inline double moment_x(const WaveState& s, double nu) {
    if (nu < 0.0) throw domain_error("moment_x needs nu >= 0");
    const auto w = s.to_weighted();
    const double h = s.grid.h();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < w.amplitudes.size(); ++k) {
        const double r = s.grid.node(static_cast<std::size_t>(k) % s.n_r());
        acc += std::pow(r, nu) * std::norm(w.amplitudes[k]) * r * h;
    }
    return acc;
}

// <|J|^beta> = sum_j |j|^beta ||P_j phi||^2   (0^0 = 1)
inline double moment_j(const WaveState& s, double beta) {
    if (beta < 0.0) throw domain_error("moment_j needs beta >= 0");
    double acc = 0.0;
    for (int j = -s.j_max; j <= s.j_max; ++j) acc += std::pow(std::abs(j), beta) * s.channel_norm2(j);
    return acc;
}

//
// seeds and window projection
//
struct EigenvectorSeed {
    std::size_t k = 0;
};
// exp(-(j - jc)^2 / (2 sj^2) - (r - rc)^2 / (2 sr^2)) e^{-i j theta}, in phi
struct GaussianSeed {
    double j_center = 0.0, r_center = 1.0, sigma_j = 1.0, sigma_r = 1.0, theta = 0.0;
};
struct ChannelBumpSeed {
    int j = 0;
    double r_center = 1.0, sigma_r = 1.0;
};
struct ExplicitSeed {
    WaveState state;
};
using SeedSpec = std::variant<EigenvectorSeed, GaussianSeed, ChannelBumpSeed, ExplicitSeed>;

inline WaveState seed_state(const SpectralProjection& p, const SeedSpec& seed) {
    WaveState s;
    s.grid = p.grid;
    s.j_max = p.j_max;
    s.representation = WaveState::Representation::weighted;
    s.amplitudes = VectorC::Zero(static_cast<Eigen::Index>(p.dim()));
    auto fill = [&](auto&& phi) {
        for (int j = -p.j_max; j <= p.j_max; ++j)
            for (std::size_t i = 0; i < p.n_r(); ++i)
                s.amplitudes[static_cast<Eigen::Index>(static_cast<std::size_t>(j + p.j_max) * p.n_r() + i)] =
                    phi(j, p.grid.node(i));
    };
    if (const auto* e = std::get_if<EigenvectorSeed>(&seed)) {
        if (e->k >= p.rank()) throw domain_error("eigenvector seed index " + std::to_string(e->k) + " >= window rank");
        return WaveState::from_euclidean(p.grid, p.j_max, p.vectors.col(static_cast<Eigen::Index>(e->k)), 0.0);
    } else if (const auto* g = std::get_if<GaussianSeed>(&seed)) {
        fill([&](int j, double r) {
            const double a = std::exp(-0.5 * std::pow((j - g->j_center) / g->sigma_j, 2) -
                                      0.5 * std::pow((r - g->r_center) / g->sigma_r, 2));
            return a * std::polar(1.0, -j * g->theta);
        });
    } else if (const auto* c = std::get_if<ChannelBumpSeed>(&seed)) {
        if (std::abs(c->j) > p.j_max) throw domain_error("channel bump outside the retained channels");
        fill([&](int j, double r) {
            return j == c->j ? cplx(std::exp(-0.5 * std::pow((r - c->r_center) / c->sigma_r, 2))) : cplx{};
        });
    } else {
        const auto& st = std::get<ExplicitSeed>(seed).state;
        if (!(st.grid == p.grid) || st.j_max != p.j_max) throw domain_error("explicit seed lives on another grid");
        return st;
    }
    return s;
}

// E_I seed, normalized
inline WaveState prepare_state(const SpectralProjection& p, const SeedSpec& seed) {
    if (p.empty()) throw domain_error("prepare_state needs a projection of nonzero rank");
    if (const auto* e = std::get_if<EigenvectorSeed>(&seed)) return seed_state(p, *e);
    const VectorC x = seed_state(p, seed).euclidean();
    const double nx = x.norm();
    if (!(nx > 0.0)) throw domain_error("seed is identically zero");
    const VectorC c = p.vectors.adjoint() * (x / nx);
    if (c.norm() < 1e-12)
        throw domain_error("projected seed has norm " + io::fmt(c.norm()) + " < 1e-12 (orthogonal to the window)");
    const VectorC y = p.vectors * (c / c.norm());
    return WaveState::from_euclidean(p.grid, p.j_max, y, 0.0);
}

// || E_I phi - phi ||
inline double window_defect(const SpectralProjection& p, const WaveState& s) {
    const VectorC x = s.euclidean();
    return (p.vectors * (p.vectors.adjoint() * x) - x).norm();
}

//
// propagation: phi(t) = sum_k e^{-i lambda_k t} <v_k, phi0> v_k
//
class Propagator {
public:
    Propagator(const SpectralProjection& p, const WaveState& phi0) : p_(&p), t0_(phi0.time) {
        const VectorC x = phi0.euclidean();
        c_ = p.vectors.adjoint() * x;
        const double outside = (p.vectors * c_ - x).norm();
        if (outside > 1e-10 * std::max(1.0, x.norm()))
            throw domain_error("state is not in the window subspace (defect " + io::fmt(outside) + ")");
    }

    const VectorC& coefficients() const noexcept { return c_; }

    WaveState at(double t) const {
        VectorC c = c_;
        for (Eigen::Index k = 0; k < c.size(); ++k)
            c[k] *= std::polar(1.0, -p_->eigenvalues[static_cast<std::size_t>(k)] * (t - t0_));
        return WaveState::from_euclidean(p_->grid, p_->j_max, p_->vectors * c, t);
    }

private:
    const SpectralProjection* p_;
    VectorC c_;
    double t0_ = 0.0;
};

inline std::vector<WaveState> propagate(const SpectralProjection& p, const WaveState& phi0,
                                        const std::vector<double>& times) {
    const Propagator u(p, phi0);
    std::vector<WaveState> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(t == phi0.time ? phi0 : u.at(t));
    return out;
}

//
// time grids
//
inline std::vector<double> geometric_times(double t0, double t1, std::size_t n) {
    if (!(t0 > 0.0 && t1 > t0) || n < 2) throw domain_error("geometric time grid needs 0 < t0 < t1 and n >= 2");
    std::vector<double> t(n);
    const double rho = std::pow(t1 / t0, 1.0 / static_cast<double>(n - 1));
    for (std::size_t k = 0; k < n; ++k) t[k] = t0 * std::pow(rho, static_cast<double>(k));
    t.back() = t1;
    return t;
}

// n + 1 points 0, T/n, ..., T
inline std::vector<double> uniform_times(double T, std::size_t n) {
    if (!(T > 0.0) || n < 1) throw domain_error("uniform time grid needs T > 0 and n >= 1");
    std::vector<double> t(n + 1);
    for (std::size_t k = 0; k <= n; ++k) t[k] = T * static_cast<double>(k) / static_cast<double>(n);
    return t;
}

//
// observable series
//
struct ObservableSeries {
    std::vector<double> times;
    std::vector<double> x_moment, j_moment, norm;
    std::vector<std::vector<double>> channel_norms;   // [time][j + J]
    double nu = 1.0, beta = 1.0;
    int j_max = 0;

    std::string csv() const {
        io::Csv c({"t", "x_moment", "j_moment", "norm"});
        for (std::size_t k = 0; k < times.size(); ++k) c.row(times[k], x_moment[k], j_moment[k], norm[k]);
        return c.str();
    }
    std::string channel_csv() const {
        io::Csv c({"t", "j", "norm2"});
        for (std::size_t k = 0; k < times.size(); ++k)
            for (int j = -j_max; j <= j_max; ++j) c.row(times[k], j, channel_norms[k][static_cast<std::size_t>(j + j_max)]);
        return c.str();
    }
};

inline void append_observation(ObservableSeries& s, const WaveState& st) {
    s.times.push_back(st.time);
    s.x_moment.push_back(moment_x(st, s.nu));
    s.j_moment.push_back(moment_j(st, s.beta));
    s.norm.push_back(st.norm2());
    std::vector<double> cn;
    for (int j = -st.j_max; j <= st.j_max; ++j) cn.push_back(st.channel_norm2(j));
    s.channel_norms.push_back(std::move(cn));
}

inline ObservableSeries record_series(const SpectralProjection& p, const WaveState& phi0,
                                      const std::vector<double>& times, double nu, double beta) {
    ObservableSeries s;
    s.nu = nu;
    s.beta = beta;
    s.j_max = p.j_max;
    const Propagator u(p, phi0);
    for (double t : times) append_observation(s, t == phi0.time ? phi0 : u.at(t));
    return s;
}

// max_t | ||phi(t)||^2 - ||phi(0)||^2 |
inline double norm_drift(const ObservableSeries& s) {
    double d = 0.0;
    for (double n : s.norm) d = std::max(d, std::abs(n - s.norm.front()));
    return d;
}

// max_{t,j} | ||P_j phi(t)||^2 - ||P_j phi(0)||^2 |
inline double channel_norm_drift(const ObservableSeries& s) {
    double d = 0.0;
    for (const auto& row : s.channel_norms)
        for (std::size_t j = 0; j < row.size(); ++j) d = std::max(d, std::abs(row[j] - s.channel_norms.front()[j]));
    return d;
}

//
// Heisenberg balance  ||P_j phi(t)||^2 - ||P_j phi(0)||^2 = int_0^t i <phi(s), [W, P_j] phi(s)> ds
// with i <phi,[W,P_j]phi> = -2 Im <phi, W P_j phi>, integrated by the composite trapezoid rule
//
struct HeisenbergReport {
    double max_residual = 0.0;
    double final_residual = 0.0;   // max over j at the last time
    std::vector<std::vector<double>> residual;   // [time][j + J]
};

inline HeisenbergReport heisenberg_check(const BlockHamiltonian& h, const std::vector<WaveState>& states) {
    if (states.size() < 2) throw domain_error("heisenberg_check needs at least two states");
    const double dt = states[1].time - states[0].time;
    for (std::size_t k = 1; k < states.size(); ++k)
        if (std::abs(states[k].time - states[k - 1].time - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
            throw domain_error("heisenberg_check needs a uniform time grid");
    const int jm = h.j_max();
    const std::size_t nc = h.channels(), n = h.n_r();
    auto rate = [&](const WaveState& st) {
        const VectorC x = st.euclidean();
        const VectorC wx = h.apply_nonsymmetric(x);
        std::vector<double> g(nc);
        for (std::size_t a = 0; a < nc; ++a) {
            const auto base = static_cast<Eigen::Index>(a * n);
            // <phi, W P_j phi> = (W x)_j^* x_j
            const cplx v = wx.segment(base, static_cast<Eigen::Index>(n)).dot(x.segment(base, static_cast<Eigen::Index>(n)));
            g[a] = -2.0 * v.imag();
        }
        return g;
    };
    HeisenbergReport rep;
    std::vector<double> integral(nc, 0.0), g_prev = rate(states[0]);
    std::vector<double> n0(nc);
    for (int j = -jm; j <= jm; ++j) n0[static_cast<std::size_t>(j + jm)] = states[0].channel_norm2(j);
    rep.residual.push_back(std::vector<double>(nc, 0.0));
    for (std::size_t k = 1; k < states.size(); ++k) {
        const auto g = rate(states[k]);
        std::vector<double> res(nc);
        double mx = 0.0;
        for (std::size_t a = 0; a < nc; ++a) {
            integral[a] += 0.5 * dt * (g_prev[a] + g[a]);
            res[a] = states[k].channel_norm2(static_cast<int>(a) - jm) - n0[a] - integral[a];
            mx = std::max(mx, std::abs(res[a]));
        }
        rep.max_residual = std::max(rep.max_residual, mx);
        rep.final_residual = mx;
        rep.residual.push_back(std::move(res));
        g_prev = g;
    }
    return rep;
}

// states on the uniform grid 0..T with n steps
inline HeisenbergReport heisenberg_check(const BlockHamiltonian& h, const SpectralProjection& p,
                                         const WaveState& phi0, double T, std::size_t n) {
    return heisenberg_check(h, propagate(p, phi0, uniform_times(T, n)));
}

//
// growth checks
//
struct MannKendall {
    double s = 0.0;
    double z = 0.0;
    bool increasing = false;   // one-sided 5% level
};

inline MannKendall mann_kendall(const std::vector<double>& x) {
    MannKendall mk;
    const std::size_t n = x.size();
    if (n < 3) return mk;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = i + 1; k < n; ++k) mk.s += (x[k] > x[i]) - (x[k] < x[i]);
    const double nn = static_cast<double>(n);
    const double var = nn * (nn - 1.0) * (2.0 * nn + 5.0) / 18.0;
    mk.z = mk.s > 0 ? (mk.s - 1.0) / std::sqrt(var) : mk.s < 0 ? (mk.s + 1.0) / std::sqrt(var) : 0.0;
    mk.increasing = mk.z > 1.6448536269514722;
    return mk;
}

struct Thm1Report {
    std::vector<double> ratio;
    double sup = 0.0;
    double first_quartile_mean = 0.0, last_quartile_mean = 0.0;
    MannKendall trend;
    bool pass = false;   // finite sup, last-quartile mean <= 1.1 x first-quartile mean
};

// ratio_t = <|x|^nu> / (||phi||^2 + <|J|^{zeta nu / s-}>); the series must carry beta = zeta nu / s-
inline Thm1Report bound_check_thm1(const ObservableSeries& s, double nu, double sigma_minus, double zeta) {
    const double beta = zeta * nu / sigma_minus;
    if (std::abs(s.nu - nu) > 1e-14 || std::abs(s.beta - beta) > 1e-12)
        throw domain_error("series was recorded with nu = " + io::fmt(s.nu) + ", beta = " + io::fmt(s.beta) +
                           "; need beta = zeta nu / sigma_minus = " + io::fmt(beta));
    Thm1Report rep;
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        rep.ratio.push_back(s.x_moment[k] / (s.norm[k] + s.j_moment[k]));
        rep.sup = std::max(rep.sup, rep.ratio.back());
    }
    const std::size_t n = rep.ratio.size(), q = std::max<std::size_t>(1, n / 4);
    for (std::size_t k = 0; k < q; ++k) {
        rep.first_quartile_mean += rep.ratio[k] / static_cast<double>(q);
        rep.last_quartile_mean += rep.ratio[n - q + k] / static_cast<double>(q);
    }
    rep.trend = mann_kendall(rep.ratio);
    rep.pass = n > 0 && std::isfinite(rep.sup) && rep.last_quartile_mean <= 1.1 * rep.first_quartile_mean;
    return rep;
}

struct Thm2Params {
    double sigma_plus = 1.5;
    double zeta = 1.0;
    double beta = 1.0;
    double tolerance = 0.1;
};

struct Thm2Report {
    std::string mode;          // "power" (t^x) or "log" ((ln t)^x)
    double fitted = 0.0;
    double bound = std::numeric_limits<double>::infinity();
    double r2 = 1.0;
    std::size_t points = 0;
    bool flat = false;         // no excess above 1e-10
    bool reliable = true;      // raw excess monotone and sign-definite
    bool pass = false;
};

// bound: power decay r^{-p}: gamma beta with gamma = s+/(zeta p - s+); stretched e^{-mu r^s}:
// theta beta with theta = 1/min{zeta, zeta s/s+}
inline Thm2Report growth_fit_thm2(const ObservableSeries& s, const DecayClass& decay, const Thm2Params& prm) {
    Thm2Report rep;
    if (const auto* pd = std::get_if<PowerDecay>(&decay)) {
        rep.mode = "power";
        const double den = prm.zeta * pd->p - prm.sigma_plus;
        rep.bound = den > 0.0 ? prm.sigma_plus / den * prm.beta : std::numeric_limits<double>::infinity();
    } else if (const auto* sd = std::get_if<StretchedExpDecay>(&decay)) {
        rep.mode = "log";
        rep.bound = prm.beta / std::min(prm.zeta, prm.zeta * sd->s / prm.sigma_plus);
    } else {
        rep.mode = "power";
    }
    if (std::abs(s.beta - prm.beta) > 1e-12)
        throw domain_error("series was recorded with beta = " + io::fmt(s.beta) + ", fit asks for " + io::fmt(prm.beta));
    const double floor = 1e-10;
    double run = 0.0, prev = 0.0;
    bool pos = false, neg = false;
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        const double d = s.j_moment[k] - s.j_moment.front();
        pos = pos || d > floor;
        neg = neg || d < -floor;
        if (k > 0 && d < prev - floor) rep.reliable = false;
        prev = d;
        run = std::max(run, d);
        const double t = s.times[k];
        if (run <= floor || t < 1.0 || (rep.mode == "log" && t <= 1.0)) continue;
        xs.push_back(rep.mode == "log" ? std::log(std::log(t)) : std::log(t));
        ys.push_back(run);
    }
    if (pos && neg) rep.reliable = false;
    rep.points = xs.size();
    if (xs.size() < 4) {
        rep.flat = true;
        rep.fitted = 0.0;
    } else {
        // decay_rate_fit regresses log y on x
        const auto f = decay_rate_fit(xs, ys);
        rep.fitted = f.slope;
        rep.r2 = f.r2;
    }
    rep.pass = rep.fitted <= rep.bound + prm.tolerance;
    return rep;
}

//
// mobility edge for linear flux, W = 0
//
struct MobilityOptions {
    double low_lo = 0.1, low_hi = 0.8;        // localized band
    double high_center = 2.0, high_half_width = 0.1;
    double margin = 0.05;                      // keep clear of lambda^2
    double amplitude_floor = 1e-10;            // decay fits stop below floor * max|u|
    double low_stretch = 1.5, high_stretch = 2.0;
    double min_decay_rate = 0.05;
    double max_shift = 1e-6;
    double min_width_ratio = 1.5;
};

struct LocalizedState {
    int j = 0;
    double energy = 0.0;
    double r_hi = 0.0;          // outer edge of C_j(E)
    double decay_rate = 0.0;    // -slope of log|u| beyond r_hi
    double r2 = 0.0;
    double shift = 0.0;         // |E(r_max) - E(stretched r_max)|
    bool pass = false;
};

struct ExtendedBand {
    int j = 0;
    std::size_t states_small = 0, states_large = 0;
    double width_small = 0.0, width_large = 0.0;   // mean participation width
    double ratio = 0.0;
    bool pass = false;
};

struct MobilityReport {
    double lambda = 0.0;
    std::vector<LocalizedState> localized;
    std::vector<ExtendedBand> extended;
    bool low_empty = true, high_empty = true;
    double min_decay_rate = std::numeric_limits<double>::infinity();
    double max_shift = 0.0;
    double min_width_ratio = std::numeric_limits<double>::infinity();
    bool low_pass() const noexcept {
        return !low_empty && std::all_of(localized.begin(), localized.end(), [](const auto& s) { return s.pass; });
    }
    bool high_pass() const noexcept {
        return !high_empty && std::all_of(extended.begin(), extended.end(), [](const auto& b) { return b.pass; });
    }
};

// (sum |u|^2 h)^2 / (sum |u|^4 h): the length over which the state is spread
inline double participation_width(const std::vector<double>& u, double h) {
    double s2 = 0.0, s4 = 0.0;
    for (double v : u) {
        s2 += v * v * h;
        s4 += v * v * v * v * h;
    }
    return s4 > 0.0 ? s2 * s2 / s4 : 0.0;
}

inline MobilityReport mobility_edge_scan(double lambda, const RadialGrid& grid, int j_max, const MobilityOptions& o = {}) {
    const auto p = FluxProfile::linear(lambda);
    const double l2 = lambda * lambda;
    const double low_top = std::min(o.low_hi, l2 * (1.0 - o.margin));
    const double high_lo = std::max(o.high_center - o.high_half_width, l2 * (1.0 + o.margin));
    const double high_hi = o.high_center + o.high_half_width;
    MobilityReport rep;
    rep.lambda = lambda;
    const RadialGrid g_low = grid.stretched(o.low_stretch), g_high = grid.stretched(o.high_stretch);
    const std::size_t n = grid.size();
    for (int j = -j_max; j <= j_max; ++j) {
        const auto op = build_channel_operator(p, j, grid);
        // localized band
        if (o.low_lo <= low_top) {
            const auto es = channel_eigen(op, lapack::Range::values(o.low_lo, low_top), true);
            std::vector<double> big;
            if (!es.values.empty())
                big = channel_eigen(build_channel_operator(p, j, g_low),
                                    lapack::Range::values(o.low_lo - 0.1, low_top + 0.1), false).values;
            for (std::size_t k = 0; k < es.values.size(); ++k) {
                LocalizedState st;
                st.j = j;
                st.energy = es.values[k];
                const auto reg = classical_region(p, j, st.energy, grid);
                st.r_hi = reg.interval ? reg.interval->second : 0.0;
                const double* u = &es.vectors[k * n];
                double umax = 0.0;
                for (std::size_t i = 0; i < n; ++i) umax = std::max(umax, std::abs(u[i]));
                std::vector<double> xs, ys;
                for (std::size_t i = 0; i < n; ++i) {
                    const double r = grid.node(i);
                    if (r < st.r_hi) continue;
                    if (r > 0.95 * grid.r_max() || std::abs(u[i]) < o.amplitude_floor * umax) break;
                    xs.push_back(r);
                    ys.push_back(std::abs(u[i]));
                }
                if (xs.size() >= 4) {
                    const auto f = decay_rate_fit(xs, ys);
                    st.decay_rate = -f.slope;
                    st.r2 = f.r2;
                } else {
                    st.decay_rate = std::numeric_limits<double>::quiet_NaN();
                }
                st.shift = std::numeric_limits<double>::infinity();
                for (double e : big) st.shift = std::min(st.shift, std::abs(e - st.energy));
                st.pass = st.decay_rate >= o.min_decay_rate && st.shift < o.max_shift;
                rep.min_decay_rate = std::min(rep.min_decay_rate, st.decay_rate);
                rep.max_shift = std::max(rep.max_shift, st.shift);
                rep.localized.push_back(st);
            }
        }
        // extended band
        if (high_lo <= high_hi) {
            auto widths = [&](const RadialGrid& g, const ChannelOperator& c) {
                const auto es = channel_eigen(c, lapack::Range::values(high_lo, high_hi), true);
                std::vector<double> w;
                for (std::size_t k = 0; k < es.values.size(); ++k)
                    w.push_back(participation_width(
                        std::vector<double>(es.vectors.begin() + static_cast<std::ptrdiff_t>(k * g.size()),
                                            es.vectors.begin() + static_cast<std::ptrdiff_t>((k + 1) * g.size())),
                        g.h()));
                return w;
            };
            const auto ws = widths(grid, op);
            const auto wl = widths(g_high, build_channel_operator(p, j, g_high));
            if (ws.empty() && wl.empty()) continue;
            ExtendedBand b;
            b.j = j;
            b.states_small = ws.size();
            b.states_large = wl.size();
            for (double w : ws) b.width_small += w / static_cast<double>(ws.size());
            for (double w : wl) b.width_large += w / static_cast<double>(wl.size());
            b.ratio = ws.empty() || wl.empty() ? 0.0 : b.width_large / b.width_small;
            b.pass = b.ratio >= o.min_width_ratio;
            rep.min_width_ratio = std::min(rep.min_width_ratio, b.ratio);
            rep.extended.push_back(b);
        }
    }
    rep.low_empty = rep.localized.empty();
    rep.high_empty = rep.extended.empty();
    return rep;
}

} // namespace maglocal

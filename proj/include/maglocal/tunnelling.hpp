#pragma once
//
// maglocal : tunnelling sums over channels and log-linear decay fits
//
// Channels j and -j are masked together, so there is one term per |j|.
//

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "spectral.hpp"
#include "weights.hpp"

namespace maglocal {

struct DecayFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

// least squares of log y against x
inline DecayFit decay_rate_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw domain_error("decay_rate_fit: x and y differ in length");
    if (x.size() < 4) throw domain_error("decay_rate_fit needs at least 4 points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    std::vector<double> ly(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (!(y[k] > 0.0)) throw domain_error("decay_rate_fit needs y > 0 (entry " + std::to_string(k) + ")");
        ly[k] = std::log(y[k]);
        sx += x[k];
        sy += ly[k];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (ly[k] - my);
        syy += (ly[k] - my) * (ly[k] - my);
    }
    if (sxx == 0.0) throw domain_error("decay_rate_fit: all x equal");
    DecayFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double e = ly[k] - (f.intercept + f.slope * x[k]);
        ss_res += e * e;
    }
    f.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
    return f;
}

struct TunnellingSum {
    std::vector<int> j;               // |j| = 0..J_max
    std::vector<double> lo, hi;       // radial mask per |j|
    std::vector<double> norm;         // plain masked norm ||1_region P_{+-j} E_I||
    std::vector<double> term;         // weighted squared term
    std::vector<double> running;      // partial sums of term
    double sum = 0.0;
    std::optional<DecayFit> norm_fit; // log norm vs |j| over the upper half of channels
    std::optional<DecayFit> term_fit; // log term vs |j|, same channels
    std::optional<double> tail_ratio; // exp(term_fit slope): per-channel ratio of consecutive terms

    std::string csv() const {
        io::Csv c({"j", "r_lo", "r_hi", "norm", "weighted_term", "running_sum"});
        for (std::size_t k = 0; k < j.size(); ++k)
            c.row(j[k], lo[k], hi[k], norm[k], term[k], running[k]);
        return c.str();
    }
};

namespace detail {

inline std::optional<DecayFit> upper_half_fit(const std::vector<int>& j, const std::vector<double>& y) {
    if (j.empty()) return std::nullopt;
    const int jm = j.back();
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < j.size(); ++k)
        if (2 * j[k] >= jm && j[k] > 0 && y[k] > 0.0) {
            xs.push_back(j[k]);
            ys.push_back(y[k]);
        }
    if (xs.size() < 4) return std::nullopt;
    return decay_rate_fit(xs, ys);
}

inline void finish(TunnellingSum& s) {
    double acc = 0.0;
    for (double t : s.term) s.running.push_back(acc += t);
    s.sum = acc;
    s.norm_fit = upper_half_fit(s.j, s.norm);
    s.term_fit = upper_half_fit(s.j, s.term);
    if (s.term_fit) s.tail_ratio = std::exp(s.term_fit->slope);
}

} // namespace detail

// sum_j e^{delta+ |j|^zeta} || 1_[0, c+ |j|^{zeta/s+}] P_j E_I ||^2
inline TunnellingSum tunnelling_interior_sum(const SpectralProjection& p, double c_plus, double delta_plus,
                                             double sigma_plus, double zeta, int j_max) {
    TunnellingSum s;
    for (int aj = 0; aj <= j_max; ++aj) {
        const double hi = std::min(c_plus * std::pow(aj, zeta / sigma_plus), p.grid.r_max());
        const std::vector<int> js = aj == 0 ? std::vector<int>{0} : std::vector<int>{aj, -aj};
        const double nrm = aj == 0 || p.empty() ? 0.0 : channels_projection_norm(p, js, 0.0, hi);
        s.j.push_back(aj);
        s.lo.push_back(0.0);
        s.hi.push_back(hi);
        s.norm.push_back(nrm);
        s.term.push_back(std::exp(delta_plus * std::pow(aj, zeta)) * nrm * nrm);
    }
    detail::finish(s);
    return s;
}

inline TunnellingSum tunnelling_interior_sum(const SpectralProjection& p, const WeightSequence& f, int j_max) {
    return tunnelling_interior_sum(p, f.c_plus, f.delta_plus, f.sigma_plus, f.zeta, j_max);
}

// sum_j || 1_[c- |j|^{zeta/s-}, r_max] e^{delta- r^{zeta s-}} P_j E_I ||^2
inline TunnellingSum tunnelling_exterior_sum(const SpectralProjection& p, double c_minus, double delta_minus,
                                             double sigma_minus, double zeta, int j_max) {
    TunnellingSum s;
    const double ex = zeta * sigma_minus;
    const std::function<double(double)> wt = [=](double r) { return std::exp(delta_minus * std::pow(r, ex)); };
    for (int aj = 0; aj <= j_max; ++aj) {
        const double lo = c_minus * std::pow(aj, zeta / sigma_minus);
        const std::vector<int> js = aj == 0 ? std::vector<int>{0} : std::vector<int>{aj, -aj};
        double nrm = 0.0, wn = 0.0;
        if (!p.empty() && lo <= p.grid.r_max()) {
            nrm = channels_projection_norm(p, js, lo, p.grid.r_max());
            wn = channels_projection_norm(p, js, lo, p.grid.r_max(), &wt);
        }
        s.j.push_back(aj);
        s.lo.push_back(std::min(lo, p.grid.r_max()));
        s.hi.push_back(p.grid.r_max());
        s.norm.push_back(nrm);
        s.term.push_back(wn * wn);
    }
    detail::finish(s);
    return s;
}

inline TunnellingSum tunnelling_exterior_sum(const SpectralProjection& p, const WeightSequence& g, int j_max) {
    return tunnelling_exterior_sum(p, g.c_minus, g.delta_minus, g.sigma_minus, g.zeta, j_max);
}

} // namespace maglocal

#pragma once
//
// maglocal : angular perturbation W(r, theta), its Fourier table and Gevrey envelope
//
//   W^(r, m) = (2 pi)^{-1/2} int_0^{2 pi} W(r, theta) e^{-i m theta} d theta
//   envelope:  |W^(r, m)| <= b(r) exp(-a |m|^zeta)
//

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "grid.hpp"
#include "io.hpp"

namespace maglocal {

using cplx = std::complex<double>;

inline constexpr double sqrt_2pi = 2.506628274631000502415765284811;

// W^(r_i, m) for i < n_r and |m| <= M_max
class CoefficientTable {
public:
    CoefficientTable() = default;
    CoefficientTable(RadialGrid grid, int m_max)
        : grid_(grid), m_max_(m_max), data_(grid.size() * static_cast<std::size_t>(2 * m_max + 1)) {
        if (m_max < 0) throw construction_error("M_max must be >= 0");
    }

    const RadialGrid& grid() const noexcept { return grid_; }
    int m_max() const noexcept { return m_max_; }

    cplx& at(std::size_t i, int m) { return data_[index(i, m)]; }
    cplx at(std::size_t i, int m) const {
        if (std::abs(m) > m_max_) return {};
        return data_[index(i, m)];
    }

    bool is_zero() const {
        return std::all_of(data_.begin(), data_.end(), [](const cplx& c) { return c == cplx{}; });
    }

    // only the m = 0 column is nonzero
    bool is_radial() const {
        for (std::size_t i = 0; i < grid_.size(); ++i)
            for (int m = -m_max_; m <= m_max_; ++m)
                if (m != 0 && at(i, m) != cplx{}) return false;
        return true;
    }

    double max_abs(int m) const {
        double mx = 0.0;
        for (std::size_t i = 0; i < grid_.size(); ++i) mx = std::max(mx, std::abs(at(i, m)));
        return mx;
    }

    // largest violation of W^(r,-m) = conj W^(r,m), relative to the table maximum
    double hermitian_defect() const {
        double mx = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < grid_.size(); ++i)
            for (int m = -m_max_; m <= m_max_; ++m) {
                mx = std::max(mx, std::abs(at(i, -m) - std::conj(at(i, m))));
                scale = std::max(scale, std::abs(at(i, m)));
            }
        return scale > 0.0 ? mx / scale : 0.0;
    }

    // restrict to |m| <= m_new
    CoefficientTable truncated(int m_new) const {
        CoefficientTable t(grid_, std::min(m_new, m_max_));
        for (std::size_t i = 0; i < grid_.size(); ++i)
            for (int m = -t.m_max_; m <= t.m_max_; ++m) t.at(i, m) = at(i, m);
        return t;
    }

private:
    std::size_t index(std::size_t i, int m) const {
        return i * static_cast<std::size_t>(2 * m_max_ + 1) + static_cast<std::size_t>(m + m_max_);
    }

    RadialGrid grid_;
    int m_max_ = 0;
    std::vector<cplx> data_;
};

struct GevreyEnvelope {
    double a = std::numeric_limits<double>::infinity();
    double zeta = 1.0;
    std::function<double(double)> b = [](double) { return 0.0; };
};

struct NoDecay {};
struct PowerDecay {
    double p;
};
struct StretchedExpDecay {
    double mu;
    double s;
};
using DecayClass = std::variant<NoDecay, PowerDecay, StretchedExpDecay>;

using ClosedForm = std::function<double(double r, double theta)>;

struct AngularPotential {
    std::variant<ClosedForm, CoefficientTable> source;
    GevreyEnvelope envelope;
    DecayClass decay = NoDecay{};
    bool radial = false;     // W independent of theta
    bool zero = false;       // W identically zero
    int natural_m_max = -1;  // highest nonzero mode of a closed form, if finite
    std::function<cplx(double r, int m)> exact;   // analytic W^(r, m) when known
    std::string description;
};

//
// radial profiles g(r) used by the catalogue
//
struct RadialProfile {
    enum class Kind { constant, power, exp } kind = Kind::constant;
    double p = 0.0;          // power: (1 + r^2)^{-p/2}
    double mu = 1.0, s = 1.0;  // exp: exp(-mu r^s)

    double operator()(double r) const {
        switch (kind) {
        case Kind::power: return std::pow(1.0 + r * r, -0.5 * p);
        case Kind::exp: return std::exp(-mu * std::pow(r, s));
        default: return 1.0;
        }
    }

    DecayClass decay() const {
        switch (kind) {
        case Kind::power: return PowerDecay{p};
        case Kind::exp: return StretchedExpDecay{mu, s};
        default: return NoDecay{};
        }
    }
};

inline AngularPotential zero_potential() {
    AngularPotential w;
    w.source = ClosedForm([](double, double) { return 0.0; });
    w.radial = w.zero = true;
    w.natural_m_max = 0;
    w.description = "zero";
    return w;
}

// W = amplitude * g(r)
inline AngularPotential radial_potential(double amplitude, RadialProfile g) {
    AngularPotential w;
    w.source = ClosedForm([amplitude, g](double r, double) { return amplitude * g(r); });
    w.envelope = {std::numeric_limits<double>::infinity(), 1.0,
                  [amplitude, g](double r) { return sqrt_2pi * std::abs(amplitude) * g(r); }};
    w.radial = true;
    w.zero = amplitude == 0.0;
    w.natural_m_max = 0;
    w.exact = [amplitude, g](double r, int m) { return m == 0 ? cplx(sqrt_2pi * amplitude * g(r)) : cplx{}; };
    w.description = "radial";
    return w;
}

// W = amplitude * g(r) * cos(mode * theta)
inline AngularPotential cos_potential(double amplitude, RadialProfile g, int mode, double a = 1.0) {
    if (mode < 1) throw construction_error("cos potential needs mode >= 1");
    AngularPotential w;
    w.source = ClosedForm([amplitude, g, mode](double r, double th) { return amplitude * g(r) * std::cos(mode * th); });
    // |W^(r, +-mode)| = sqrt(pi/2) |A| g(r); choose b so the envelope is tight at |m| = mode
    const double amp = std::sqrt(std::numbers::pi / 2.0) * std::abs(amplitude) * std::exp(a * mode);
    w.envelope = {a, 1.0, [amp, g](double r) { return amp * g(r); }};
    w.decay = g.decay();
    w.zero = amplitude == 0.0;
    w.natural_m_max = mode;
    w.exact = [amplitude, g, mode](double r, int m) {
        return std::abs(m) == mode ? cplx(std::sqrt(std::numbers::pi / 2.0) * amplitude * g(r)) : cplx{};
    };
    w.description = "cos";
    return w;
}

// W = amplitude * g(r) * sum_m exp(-a |m|^zeta) e^{i m theta}; its envelope is exact
inline AngularPotential gevrey_potential(double amplitude, RadialProfile g, double a, double zeta) {
    if (!(a > 0.0)) throw construction_error("gevrey potential needs a > 0");
    if (!(zeta > 0.0 && zeta <= 1.0)) throw construction_error("gevrey potential needs zeta in (0, 1]");
    // terms below 1e-17 relative are invisible in double precision
    const int m_series = static_cast<int>(std::ceil(std::pow(17.0 * std::log(10.0) / a, 1.0 / zeta)));
    std::vector<double> c(static_cast<std::size_t>(m_series) + 1);
    for (int m = 0; m <= m_series; ++m) c[static_cast<std::size_t>(m)] = std::exp(-a * std::pow(m, zeta));
    AngularPotential w;
    w.source = ClosedForm([amplitude, g, c](double r, double th) {
        double s = 0.0;
        for (std::size_t m = c.size() - 1; m >= 1; --m) s += 2.0 * c[m] * std::cos(static_cast<double>(m) * th);
        return amplitude * g(r) * (1.0 + s);
    });
    w.envelope = {a, zeta, [amplitude, g](double r) { return sqrt_2pi * std::abs(amplitude) * g(r); }};
    w.decay = g.decay();
    w.zero = amplitude == 0.0;
    w.natural_m_max = m_series;
    w.exact = [amplitude, g, a, zeta](double r, int m) {
        return cplx(sqrt_2pi * amplitude * g(r) * std::exp(-a * std::pow(std::abs(m), zeta)));
    };
    w.description = "gevrey";
    return w;
}

inline AngularPotential table_potential(CoefficientTable table, GevreyEnvelope env, DecayClass decay) {
    AngularPotential w;
    w.radial = table.is_radial();
    w.zero = table.is_zero();
    w.natural_m_max = table.m_max();
    w.source = std::move(table);
    w.envelope = std::move(env);
    w.decay = decay;
    w.description = "table";
    return w;
}

//
// quadrature
//
inline CoefficientTable fourier_coefficients(const ClosedForm& w, const RadialGrid& grid, int m_max, int n_theta) {
    if (m_max < 0) throw construction_error("M_max must be >= 0");
    if (n_theta < 4 * std::max(m_max, 1))
        throw aliasing_error("n_theta = " + std::to_string(n_theta) + " < 4 M_max = " + std::to_string(4 * m_max));
    CoefficientTable t(grid, m_max);
    const double dth = 2.0 * std::numbers::pi / n_theta;
    std::vector<double> samples(static_cast<std::size_t>(n_theta));
    std::vector<cplx> phase(static_cast<std::size_t>(n_theta));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = grid.node(i);
        for (int k = 0; k < n_theta; ++k) samples[static_cast<std::size_t>(k)] = w(r, k * dth);
        for (int m = -m_max; m <= m_max; ++m) {
            cplx s{};
            for (int k = 0; k < n_theta; ++k) {
                // reduce m k mod n_theta so the angle stays small and exact
                const long long mk = (static_cast<long long>(m) * k) % n_theta;
                s += samples[static_cast<std::size_t>(k)] * std::polar(1.0, -dth * static_cast<double>(mk));
            }
            t.at(i, m) = s * (dth / sqrt_2pi);
        }
    }
    return t;
}

inline int default_n_theta(int m_max) { return 4 * std::max(m_max, 16); }

// table for any potential; analytic coefficients when available, else the default quadrature
inline CoefficientTable coefficient_table(const AngularPotential& w, const RadialGrid& grid, int m_max) {
    if (const auto* t = std::get_if<CoefficientTable>(&w.source)) {
        if (!(t->grid() == grid)) throw construction_error("coefficient table grid does not match the radial grid");
        return t->truncated(m_max);
    }
    const auto& f = std::get<ClosedForm>(w.source);
    if (w.zero) return CoefficientTable(grid, m_max);
    if (w.exact) {
        CoefficientTable t(grid, m_max);
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (int m = -m_max; m <= m_max; ++m) t.at(i, m) = w.exact(grid.node(i), m);
        return t;
    }
    // sample enough angles to keep every series mode un-aliased
    int n_theta = default_n_theta(m_max);
    if (w.natural_m_max > 0) n_theta = std::max(n_theta, 2 * (w.natural_m_max + m_max) + 2);
    return fourier_coefficients(f, grid, m_max, n_theta);
}

// smallest M with b_max exp(-a M^zeta) < tol
inline int default_m_max(const GevreyEnvelope& env, const RadialGrid& grid, double tol = 1e-12) {
    double b_max = 0.0;
    for (double r : grid.nodes()) b_max = std::max(b_max, env.b(r));
    if (!(b_max > 0.0) || std::isinf(env.a)) return 0;
    if (b_max < tol) return 0;
    const double x = std::log(b_max / tol) / env.a;
    int m = static_cast<int>(std::floor(std::pow(x, 1.0 / env.zeta))) + 1;
    while (m > 1 && b_max * std::exp(-env.a * std::pow(m - 1, env.zeta)) < tol) --m;
    return m;
}

//
// envelope validation
//
struct GevreyReport {
    std::size_t entries = 0;
    std::size_t violations = 0;
    std::optional<std::pair<std::size_t, int>> first_violation;   // (node, m)
    double worst_ratio = 0.0;                   // max |W^| / envelope
    double tightest_a = std::numeric_limits<double>::infinity();   // for the given zeta and b
    bool pass() const noexcept { return violations == 0; }
};

inline GevreyReport gevrey_validate(const CoefficientTable& t, const GevreyEnvelope& env) {
    GevreyReport rep;
    const auto& g = t.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double b = env.b(g.node(i));
        for (int m = -t.m_max(); m <= t.m_max(); ++m) {
            const double w = std::abs(t.at(i, m));
            const double am = std::pow(std::abs(m), env.zeta);
            const double bound = b * (m == 0 ? 1.0 : std::exp(-env.a * am));
            ++rep.entries;
            const bool ok = w <= bound * (1.0 + 1e-9) + 1e-14 * b || w < 1e-300;
            if (!ok) {
                ++rep.violations;
                if (!rep.first_violation) rep.first_violation = std::make_pair(i, m);
            }
            if (bound > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, w / bound);
            else if (w > 0.0) rep.worst_ratio = std::numeric_limits<double>::infinity();
            if (m != 0 && w > 1e-300) {
                const double a_here = b > 0.0 ? (std::log(b) - std::log(w)) / am : -std::numeric_limits<double>::infinity();
                rep.tightest_a = std::min(rep.tightest_a, a_here);
            }
        }
    }
    return rep;
}

//
// W = W_s + W_ns
//
struct SymmetricSplit {
    std::vector<double> w_s;     // W_s(r_i) = W^(r_i, 0) / sqrt(2 pi)
    CoefficientTable w_ns;       // table with the m = 0 column removed
};

inline SymmetricSplit symmetric_split(const CoefficientTable& t) {
    SymmetricSplit out{std::vector<double>(t.grid().size()), t};
    for (std::size_t i = 0; i < t.grid().size(); ++i) {
        out.w_s[i] = t.at(i, 0).real() / sqrt_2pi;
        out.w_ns.at(i, 0) = cplx{};
    }
    return out;
}

//
// xi(a, zeta) = sum_{m in Z} exp(-(a/2) |m|^zeta)
//
// The tail beyond M is bounded by 2 int_M^inf exp(-(a/2) x^zeta) dx
//   = (2/zeta) (a/2)^{-1/zeta} Gamma(1/zeta, (a/2) M^zeta).
inline double xi_tail_bound(double a, double zeta, double m) {
    const double c = 0.5 * a;
    return 2.0 / zeta * std::pow(c, -1.0 / zeta) * boost::math::tgamma(1.0 / zeta, c * std::pow(m, zeta));
}

inline double xi_constant(double a, double zeta, double tol = 1e-14) {
    if (!(a > 0.0)) throw domain_error("xi_constant needs a > 0");
    if (!(zeta > 0.0 && zeta <= 1.0)) throw domain_error("xi_constant needs zeta in (0, 1]");
    if (!(tol > 0.0)) throw domain_error("xi_constant needs tol > 0");
    if (std::isinf(a)) return 1.0;
    long long m = 1;
    while (xi_tail_bound(a, zeta, static_cast<double>(m)) >= tol) {
        m *= 2;
        if (m > (1LL << 40)) throw numerical_error("xi_constant tail did not fall below tol");
    }
    long long lo = m / 2, hi = m;
    while (hi - lo > 1) {
        const long long mid = (lo + hi) / 2;
        (xi_tail_bound(a, zeta, static_cast<double>(mid)) < tol ? hi : lo) = mid;
    }
    // smallest terms first
    double s = 0.0;
    for (long long k = hi; k >= 1; --k) s += 2.0 * std::exp(-0.5 * a * std::pow(static_cast<double>(k), zeta));
    return 1.0 + s;
}

// |j + k|^zeta <= |j|^zeta + |k|^zeta (concavity of t -> t^zeta)
inline bool gevrey_triangle_holds(long long j, long long k, double zeta) {
    auto p = [zeta](long long x) { return std::pow(static_cast<double>(std::llabs(x)), zeta); };
    const double lhs = p(j + k), rhs = p(j) + p(k);
    return lhs <= rhs * (1.0 + 4.0 * std::numeric_limits<double>::epsilon());
}

//
// CSV: i, r_i, m, re, im
//
inline std::string coefficient_table_csv(const CoefficientTable& t) {
    io::Csv csv({"i", "r_i", "m", "re", "im"});
    for (std::size_t i = 0; i < t.grid().size(); ++i)
        for (int m = -t.m_max(); m <= t.m_max(); ++m) {
            const cplx c = t.at(i, m);
            csv.row(i, t.grid().node(i), m, c.real(), c.imag());
        }
    return csv.str();
}

inline CoefficientTable read_coefficient_table(const std::filesystem::path& path, const RadialGrid& grid) {
    const auto rows = io::read_csv(path);
    if (rows.empty()) throw construction_error("coefficient table " + path.string() + " is empty");
    int m_max = 0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        if (rows[k].size() != 5) throw construction_error("coefficient table row " + std::to_string(k) + " needs 5 columns");
        m_max = std::max(m_max, std::abs(static_cast<int>(io::parse_double(rows[k][2], "m"))));
    }
    CoefficientTable t(grid, m_max);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const auto i = static_cast<long long>(io::parse_double(rows[k][0], "i"));
        const double r = io::parse_double(rows[k][1], "r_i");
        if (i < 0 || static_cast<std::size_t>(i) >= grid.size())
            throw construction_error("coefficient table node index " + std::to_string(i) + " outside the grid");
        if (std::abs(r - grid.node(static_cast<std::size_t>(i))) > 1e-9 * (1.0 + r))
            throw construction_error("coefficient table r_i does not match the grid at i = " + std::to_string(i));
        const int m = static_cast<int>(io::parse_double(rows[k][2], "m"));
        t.at(static_cast<std::size_t>(i), m) = {io::parse_double(rows[k][3], "re"), io::parse_double(rows[k][4], "im")};
    }
    return t;
}

} // namespace maglocal

#pragma once
//
// maglocal : rotationally symmetric flux profiles in the Poincare gauge
//
// Phi(r) = A(r) r = int_0^r B(s) s ds is the flux through the disc of radius r
// (up to 2 pi). Channel j sees the effective potential V_j(r) = (Phi(r) - j)^2 / r^2.
//

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <type_traits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace maglocal {

struct PowerLaw {
    double lambda;
    double sigma;
};

struct LinearFlux {
    double lambda;
};

struct UniformField {
    double b0;
};

struct TabulatedFlux {
    std::vector<double> nodes;
    std::vector<double> values;
};

// Candidate constants for the two growth conditions:
//   upper:  |Phi(r)| <= lambda_plus (1 + r^sigma_plus)     for all r > 0
//   lower:  |Phi(r)| >= lambda_minus r^sigma_minus         for r >= r0
struct GrowthParams {
    double lambda_plus = 0.0;
    double sigma_plus = 0.0;
    double lambda_minus = 0.0;
    double sigma_minus = 0.0;
    double r0 = 1.0;
};

class FluxProfile {
public:
    using Kind = std::variant<PowerLaw, LinearFlux, UniformField, TabulatedFlux>;

    explicit FluxProfile(Kind kind) : FluxProfile(std::move(kind), std::nullopt) {}

    FluxProfile(Kind kind, std::optional<GrowthParams> growth) : kind_(std::move(kind)) {
        validate_kind();
        growth_ = growth ? *growth : default_growth();
    }

    static FluxProfile power_law(double lambda, double sigma) { return FluxProfile(PowerLaw{lambda, sigma}); }
    static FluxProfile linear(double lambda) { return FluxProfile(LinearFlux{lambda}); }
    static FluxProfile uniform_field(double b0) { return FluxProfile(UniformField{b0}); }
    static FluxProfile tabulated(std::vector<double> nodes, std::vector<double> values, GrowthParams growth) {
        return FluxProfile(TabulatedFlux{std::move(nodes), std::move(values)}, growth);
    }

    const Kind& kind() const noexcept { return kind_; }
    const GrowthParams& growth() const noexcept { return growth_; }
    FluxProfile with_growth(GrowthParams g) const { return FluxProfile(kind_, g); }

    bool is_linear() const noexcept { return std::holds_alternative<LinearFlux>(kind_); }
    std::optional<double> linear_lambda() const {
        if (auto* l = std::get_if<LinearFlux>(&kind_)) return l->lambda;
        return std::nullopt;
    }

    std::string name() const {
        return std::visit([](const auto& k) -> std::string {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, PowerLaw>) return "power_law";
            else if constexpr (std::is_same_v<T, LinearFlux>) return "linear";
            else if constexpr (std::is_same_v<T, UniformField>) return "uniform_field";
            else return "tabulated";
        }, kind_);
    }

    // Phi(r); tabulated profiles interpolate linearly inside [nodes.front, nodes.back]
    double flux(double r) const {
        if (!(r > 0.0)) throw domain_error("flux_eval requires r > 0");
        return std::visit([r](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, PowerLaw>) return k.lambda * std::pow(r, k.sigma);
            else if constexpr (std::is_same_v<T, LinearFlux>) return k.lambda * r;
            else if constexpr (std::is_same_v<T, UniformField>) return 0.5 * k.b0 * r * r;
            else return interpolate(k, r);
        }, kind_);
    }

    // B(r) = Phi'(r) / r; central differences for tabulated data
    double field(double r) const {
        if (!(r > 0.0)) throw domain_error("field requires r > 0");
        return std::visit([r](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, PowerLaw>) return k.lambda * k.sigma * std::pow(r, k.sigma - 2.0);
            else if constexpr (std::is_same_v<T, LinearFlux>) return k.lambda / r;
            else if constexpr (std::is_same_v<T, UniformField>) return k.b0;
            else {
                const auto& x = k.nodes;
                const std::size_t n = x.size();
                auto it = std::lower_bound(x.begin(), x.end(), r);
                std::size_t i = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - x.begin(), 1, static_cast<std::ptrdiff_t>(n) - 2));
                const double d = (k.values[i + 1] - k.values[i - 1]) / (x[i + 1] - x[i - 1]);
                return d / r;
            }
        }, kind_);
    }

private:
    static double interpolate(const TabulatedFlux& t, double r) {
        const auto& x = t.nodes;
        if (r < x.front() || r > x.back())
            throw extrapolation_error("tabulated flux queried at r = " + std::to_string(r) + " outside [" +
                                      std::to_string(x.front()) + ", " + std::to_string(x.back()) + "]");
        auto it = std::upper_bound(x.begin(), x.end(), r);
        if (it == x.end()) return t.values.back();
        const std::size_t i = static_cast<std::size_t>(it - x.begin());
        const double w = (r - x[i - 1]) / (x[i] - x[i - 1]);
        return (1.0 - w) * t.values[i - 1] + w * t.values[i];
    }

    void validate_kind() const {
        std::visit([](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, PowerLaw>) {
                if (!(k.lambda > 0.0)) throw construction_error("power_law needs lambda > 0");
                if (!(k.sigma >= 1.0)) throw construction_error("power_law needs sigma >= 1");
            } else if constexpr (std::is_same_v<T, LinearFlux>) {
                if (!(k.lambda > 0.0)) throw construction_error("linear flux needs lambda > 0");
            } else if constexpr (std::is_same_v<T, UniformField>) {
                if (!(k.b0 > 0.0)) throw construction_error("uniform_field needs B0 > 0");
            } else {
                if (k.nodes.size() < 3 || k.nodes.size() != k.values.size())
                    throw construction_error("tabulated flux needs >= 3 matching nodes/values");
                if (!(k.nodes.front() > 0.0)) throw construction_error("tabulated flux nodes must be positive");
                for (std::size_t i = 1; i < k.nodes.size(); ++i)
                    if (!(k.nodes[i] > k.nodes[i - 1]))
                        throw construction_error("tabulated flux nodes must be strictly increasing");
                for (double v : k.values)
                    if (!(v >= 0.0)) throw construction_error("signed flux is not supported (Phi must be >= 0)");
            }
        }, kind_);
    }

    GrowthParams default_growth() const {
        return std::visit([](const auto& k) -> GrowthParams {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, PowerLaw>) return {k.lambda, k.sigma, k.lambda, k.sigma, 1.0};
            else if constexpr (std::is_same_v<T, LinearFlux>) return {k.lambda, 1.0, k.lambda, 1.0, 1.0};
            else if constexpr (std::is_same_v<T, UniformField>) return {0.5 * k.b0, 2.0, 0.5 * k.b0, 2.0, 1.0};
            else return GrowthParams{};
        }, kind_);
    }

    Kind kind_;
    GrowthParams growth_;
};

inline double flux_eval(const FluxProfile& p, double r) { return p.flux(r); }

inline double effective_potential(const FluxProfile& p, int j, double r) {
    if (!(r > 0.0)) throw domain_error("effective_potential requires r > 0");
    const double d = p.flux(r) - static_cast<double>(j);
    return d * d / (r * r);
}

// V_j at every grid node
inline std::vector<double> effective_potential(const FluxProfile& p, int j, const RadialGrid& grid) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = effective_potential(p, j, grid.node(i));
    return v;
}

//
// classically allowed region C_j(E) = { r : V_j(r) <= E }
//
struct ClassicalRegion {
    int j = 0;
    double energy = 0.0;
    std::optional<std::pair<double, double>> interval;
    bool closed_form = false;
    bool disconnected = false;   // grid scan found gaps; interval is the convex hull

    bool empty() const noexcept { return !interval.has_value(); }
    bool contains(double r) const noexcept { return interval && r >= interval->first && r <= interval->second; }
};

inline ClassicalRegion classical_region(const FluxProfile& p, int j, double energy, const RadialGrid& grid) {
    if (!(energy >= 0.0)) throw domain_error("classical_region requires energy >= 0");
    ClassicalRegion out{j, energy, std::nullopt, false, false};

    if (auto lambda = p.linear_lambda(); lambda && energy < (*lambda) * (*lambda)) {
        out.closed_form = true;
        if (j > 0) {
            const double s = std::sqrt(energy);
            out.interval = std::make_pair(j / (*lambda + s), j / (*lambda - s));
        }
        return out;
    }

    std::optional<std::size_t> first, last;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (effective_potential(p, j, grid.node(i)) <= energy) {
            if (!first) first = i;
            last = i;
            ++hits;
        }
    }
    if (first) {
        out.interval = std::make_pair(grid.node(*first), grid.node(*last));
        out.disconnected = hits != (*last - *first + 1);
    }
    return out;
}

// exact node indicator of { V_j(r_i) <= E } (not the hull)
inline std::vector<bool> classical_indicator(const FluxProfile& p, int j, double energy, const RadialGrid& grid) {
    std::vector<bool> chi(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) chi[i] = effective_potential(p, j, grid.node(i)) <= energy;
    return chi;
}

//
// growth conditions on the grid
//
struct GrowthReport {
    std::vector<bool> upper_ok;
    std::vector<bool> lower_ok;        // vacuously true below r0
    std::optional<double> first_upper_violation;
    std::optional<double> first_lower_violation;
    bool upper_pass = true;
    bool lower_pass = true;
    bool pass() const noexcept { return upper_pass && lower_pass; }
};

inline GrowthReport validate_growth_conditions(const FluxProfile& p, const RadialGrid& grid) {
    const auto& g = p.growth();
    GrowthReport rep;
    rep.upper_ok.resize(grid.size());
    rep.lower_ok.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = grid.node(i);
        const double phi = std::abs(p.flux(r));
        const bool up = phi <= g.lambda_plus * (1.0 + std::pow(r, g.sigma_plus));
        const bool lo = r < g.r0 || phi >= g.lambda_minus * std::pow(r, g.sigma_minus);
        rep.upper_ok[i] = up;
        rep.lower_ok[i] = lo;
        if (!up && !rep.first_upper_violation) rep.first_upper_violation = r;
        if (!lo && !rep.first_lower_violation) rep.first_lower_violation = r;
    }
    rep.upper_pass = !rep.first_upper_violation;
    rep.lower_pass = !rep.first_lower_violation;
    return rep;
}

//
// forbidden-region lower bounds on V_j - E, checked node by node
//
struct ForbiddenBoundReport {
    double constant = 0.0;      // epsilon (interior) or eta (exterior)
    int j0 = 0;
    std::size_t nodes_checked = 0;
    std::size_t violations = 0;
    double worst_slack = std::numeric_limits<double>::infinity();
    bool pass() const noexcept { return violations == 0; }
};

// interior: V_j(r) - E >= |j|^{2(s-1)/s} for r <= eps |j|^{1/s}, |j| >= j0, with
// eps = min{ (2 lambda_+)^{-1/s}, 1/(4 sqrt(E+1)) } and j0 = ceil(4 lambda_+)
inline ForbiddenBoundReport check_interior_forbidden_bound(const FluxProfile& p, double energy,
                                                           const RadialGrid& grid, int j_max) {
    const auto& g = p.growth();
    ForbiddenBoundReport rep;
    const double s = g.sigma_plus;
    rep.constant = std::min(std::pow(0.5 / g.lambda_plus, 1.0 / s), 0.25 / std::sqrt(energy + 1.0));
    rep.j0 = static_cast<int>(std::ceil(4.0 * g.lambda_plus));
    for (int j = -j_max; j <= j_max; ++j) {
        const int aj = std::abs(j);
        if (aj < rep.j0) continue;
        const double r_lim = rep.constant * std::pow(aj, 1.0 / s);
        const double bound = std::pow(aj, 2.0 * (s - 1.0) / s);
        for (std::size_t i = 0; i < grid.size() && grid.node(i) <= r_lim; ++i) {
            const double slack = effective_potential(p, j, grid.node(i)) - energy - bound;
            ++rep.nodes_checked;
            rep.worst_slack = std::min(rep.worst_slack, slack);
            if (slack < 0.0) ++rep.violations;
        }
    }
    return rep;
}

// exterior: V_j(r) - E >= (lambda_-^2 / 8) r^{2(s-1)} for r >= eta (1+|j|)^{1/s}
inline ForbiddenBoundReport check_exterior_forbidden_bound(const FluxProfile& p, double energy,
                                                           const RadialGrid& grid, int j_max) {
    const auto& g = p.growth();
    ForbiddenBoundReport rep;
    const double s = g.sigma_minus;
    const double lm = g.lambda_minus;
    double eta = std::max(g.r0, std::pow(2.0 / lm, 1.0 / s));
    if (s > 1.0 && energy > 0.0) eta = std::max(eta, std::pow(8.0 * energy / (lm * lm), 0.5 / (s - 1.0)));
    rep.constant = eta;
    for (int j = -j_max; j <= j_max; ++j) {
        const double r_lim = eta * std::pow(1.0 + std::abs(j), 1.0 / s);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double r = grid.node(i);
            if (r < r_lim) continue;
            const double slack = effective_potential(p, j, r) - energy - lm * lm / 8.0 * std::pow(r, 2.0 * (s - 1.0));
            ++rep.nodes_checked;
            rep.worst_slack = std::min(rep.worst_slack, slack);
            if (slack < 0.0) ++rep.violations;
        }
    }
    return rep;
}

} // namespace maglocal

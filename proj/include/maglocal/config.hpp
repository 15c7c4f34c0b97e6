#pragma once
//
// maglocal : flat dotted-key run configuration
//
//   # comment
//   profile.kind = power_law
//   grid.n_r     = 319
//
// Keys are checked against a fixed vocabulary; the first bad key is named in the error.
//

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "flux.hpp"
#include "grid.hpp"
#include "io.hpp"
#include "perturbation.hpp"

namespace maglocal {

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "profile.kind", "profile.lambda", "profile.sigma", "profile.B0", "profile.table",
        "profile.growth.lambda_plus", "profile.growth.sigma_plus", "profile.growth.lambda_minus",
        "profile.growth.sigma_minus", "profile.growth.r0",
        "potential.kind", "potential.amplitude", "potential.radial", "potential.p", "potential.mu", "potential.s",
        "potential.mode", "potential.a", "potential.zeta", "potential.table", "potential.decay",
        "grid.n_r", "grid.r_max",
        "channels.J_max", "channels.M_max",
        "window.E0", "window.delta0",
        "solver.dense_limit", "solver.tol", "solver.slice_target", "solver.seed",
        "weights.kinds", "weights.interior", "weights.interior.eps", "weights.interior.j0",
        "weights.exterior", "weights.exterior.c", "weights.exterior.eta",
        "tunnel.c_plus", "tunnel.delta_plus", "tunnel.c_minus", "tunnel.delta_minus",
        "time.kind", "time.t0", "time.t1", "time.n",
        "evolve.nu", "evolve.beta", "evolve.tolerance", "evolve.heisenberg_T", "evolve.heisenberg_n",
        "seed.kind", "seed.k", "seed.j", "seed.r", "seed.sigma_j", "seed.sigma_r", "seed.theta",
        "mobility.low_lo", "mobility.low_hi", "mobility.high_center", "mobility.high_half_width",
        "mobility.margin", "mobility.low_stretch", "mobility.high_stretch", "mobility.min_decay_rate",
        "mobility.max_shift", "mobility.min_width_ratio",
        "output.dir"};
    return keys;
}

class Config {
public:
    Config() = default;

    static Config parse(const std::string& text, const std::filesystem::path& base = {}) {
        Config c;
        c.base_ = base;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            const auto eq = line.find('=');
            const std::string key = trim(line.substr(0, eq));
            if (key.empty() && eq == std::string::npos) continue;
            if (eq == std::string::npos)
                throw config_error(key, "line " + std::to_string(lineno) + " has no '='");
            if (key.empty()) throw config_error("", "line " + std::to_string(lineno) + " has an empty key");
            if (!known_config_keys().count(key)) throw config_error(key, "unknown key (line " + std::to_string(lineno) + ")");
            if (c.values_.count(key)) throw config_error(key, "given twice (line " + std::to_string(lineno) + ")");
            c.values_[key] = trim(line.substr(eq + 1));
            c.order_.push_back(key);
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::string text;
        try {
            text = io::read_file(path);
        } catch (const std::exception& e) {
            throw config_error("--config", e.what());
        }
        return parse(text, path.parent_path());
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) {
        if (!has(key)) order_.push_back(key);
        values_[key] = value;
    }

    std::string str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw config_error(key, "required key is missing");
        if (it->second.empty()) throw config_error(key, "empty value");
        return it->second;
    }
    std::string str(const std::string& key, const std::string& fallback) const { return has(key) ? str(key) : fallback; }

    double num(const std::string& key) const {
        const std::string s = str(key);
        try {
            return io::parse_double(s, key);
        } catch (const std::exception&) {
            throw config_error(key, "'" + s + "' is not a number");
        }
    }
    double num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }
    std::optional<double> opt_num(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return num(key);
    }

    long long integer(const std::string& key) const {
        const std::string s = str(key);
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size()) throw config_error(key, "'" + s + "' is not an integer");
        return v;
    }
    long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

    std::filesystem::path path(const std::string& key) const {
        std::filesystem::path p = str(key);
        return p.is_relative() && !base_.empty() ? base_ / p : p;
    }

    // key order as written, for the manifest echo
    const std::vector<std::string>& keys() const noexcept { return order_; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    template <class T>
    static T check(const std::string& key, T v, bool ok, const std::string& what) {
        if (!ok) throw config_error(key, what);
        return v;
    }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
    }

    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
    std::filesystem::path base_;
};

//
// model pieces from a config; library errors are re-raised against the responsible key
//
inline RadialGrid grid_from(const Config& c) {
    const long long n = c.integer("grid.n_r");
    Config::check("grid.n_r", n, n >= 8, "needs n_r >= 8");
    const double r = c.num("grid.r_max");
    Config::check("grid.r_max", r, r > 0.0, "needs r_max > 0");
    return RadialGrid(static_cast<std::size_t>(n), r);
}

inline std::optional<GrowthParams> growth_from(const Config& c) {
    static const char* keys[] = {"profile.growth.lambda_plus", "profile.growth.sigma_plus", "profile.growth.lambda_minus",
                                 "profile.growth.sigma_minus", "profile.growth.r0"};
    bool any = false;
    for (const char* k : keys) any = any || c.has(k);
    if (!any) return std::nullopt;
    for (const char* k : keys)
        if (!c.has(k)) throw config_error(k, "growth parameters must be given together");
    return GrowthParams{c.num(keys[0]), c.num(keys[1]), c.num(keys[2]), c.num(keys[3]), c.num(keys[4])};
}

inline FluxProfile profile_from(const Config& c) {
    const std::string kind = c.str("profile.kind");
    const auto growth = growth_from(c);
    try {
        if (kind == "power_law") {
            const double l = c.num("profile.lambda"), s = c.num("profile.sigma");
            return FluxProfile(PowerLaw{l, s}, growth);
        }
        if (kind == "linear") return FluxProfile(LinearFlux{c.num("profile.lambda")}, growth);
        if (kind == "uniform_field") return FluxProfile(UniformField{c.num("profile.B0")}, growth);
        if (kind == "tabulated") {
            if (!growth) throw config_error("profile.growth.lambda_plus", "tabulated profiles need growth parameters");
            const auto rows = io::read_csv(c.path("profile.table"));
            std::vector<double> x, y;
            for (std::size_t k = 1; k < rows.size(); ++k) {
                if (rows[k].size() < 2) throw config_error("profile.table", "row " + std::to_string(k) + " needs r,flux");
                x.push_back(io::parse_double(rows[k][0], "profile.table"));
                y.push_back(io::parse_double(rows[k][1], "profile.table"));
            }
            return FluxProfile::tabulated(x, y, *growth);
        }
    } catch (const config_error&) {
        throw;
    } catch (const std::exception& e) {
        throw config_error(kind == "tabulated" ? "profile.table" : "profile.kind", e.what());
    }
    throw config_error("profile.kind", "unknown profile '" + kind + "' (power_law, linear, uniform_field, tabulated)");
}

inline RadialProfile radial_profile_from(const Config& c) {
    const std::string kind = c.str("potential.radial", "constant");
    if (kind == "constant") return {};
    if (kind == "power") {
        const double p = c.num("potential.p");
        return {RadialProfile::Kind::power, Config::check("potential.p", p, p > 0.0, "needs p > 0")};
    }
    if (kind == "exp") {
        const double mu = c.num("potential.mu", 1.0), s = c.num("potential.s", 1.0);
        Config::check("potential.mu", mu, mu > 0.0, "needs mu > 0");
        Config::check("potential.s", s, s > 0.0, "needs s > 0");
        return {RadialProfile::Kind::exp, 0.0, mu, s};
    }
    throw config_error("potential.radial", "unknown radial profile '" + kind + "' (constant, power, exp)");
}

inline DecayClass decay_from(const Config& c) {
    const std::string kind = c.str("potential.decay", "none");
    if (kind == "none") return NoDecay{};
    if (kind == "power") return PowerDecay{c.num("potential.p")};
    if (kind == "stretched") return StretchedExpDecay{c.num("potential.mu", 1.0), c.num("potential.s", 1.0)};
    throw config_error("potential.decay", "unknown decay class '" + kind + "' (none, power, stretched)");
}

inline AngularPotential potential_from(const Config& c, const RadialGrid& grid) {
    const std::string kind = c.str("potential.kind", "zero");
    if (kind == "zero") return zero_potential();
    const auto g = radial_profile_from(c);
    if (kind == "radial") return radial_potential(c.num("potential.amplitude"), g);
    if (kind == "cos") {
        const long long mode = c.integer("potential.mode", 1);
        Config::check("potential.mode", mode, mode >= 1, "needs mode >= 1");
        const double a = c.num("potential.a", 1.0);
        Config::check("potential.a", a, a > 0.0, "needs a > 0");
        return cos_potential(c.num("potential.amplitude"), g, static_cast<int>(mode), a);
    }
    if (kind == "gevrey") {
        const double a = c.num("potential.a"), z = c.num("potential.zeta", 1.0);
        Config::check("potential.a", a, a > 0.0, "needs a > 0");
        Config::check("potential.zeta", z, z > 0.0 && z <= 1.0, "needs 0 < zeta <= 1");
        return gevrey_potential(c.num("potential.amplitude"), g, a, z);
    }
    if (kind == "table") {
        CoefficientTable t(grid, 0);
        try {
            t = read_coefficient_table(c.path("potential.table"), grid);
        } catch (const std::exception& e) {
            throw config_error("potential.table", e.what());
        }
        const double a = c.num("potential.a"), z = c.num("potential.zeta", 1.0);
        Config::check("potential.a", a, a > 0.0, "needs a > 0");
        Config::check("potential.zeta", z, z > 0.0 && z <= 1.0, "needs 0 < zeta <= 1");
        // tightest envelope with the given rate: b(r_i) = max_m |W^(r_i, m)| e^{a |m|^zeta}
        std::vector<double> b(grid.size(), 0.0);
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (int m = -t.m_max(); m <= t.m_max(); ++m)
                b[i] = std::max(b[i], std::abs(t.at(i, m)) * std::exp(a * std::pow(std::abs(m), z)));
        const double h = grid.h();
        GevreyEnvelope env{a, z, [b, h](double r) {
                               const auto i = static_cast<std::size_t>(std::clamp(std::llround(r / h) - 1, 0LL,
                                                                                  static_cast<long long>(b.size()) - 1));
                               return b[i];
                           }};
        return table_potential(std::move(t), std::move(env), decay_from(c));
    }
    throw config_error("potential.kind", "unknown potential '" + kind + "' (zero, radial, cos, gevrey, table)");
}

} // namespace maglocal

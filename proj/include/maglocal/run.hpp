#pragma once
//
// maglocal : subcommand execution, artifacts, manifest.json and --verify
//
// Exit codes: 0 ok, 2 invalid config, 3 numerical/construction failure, 4 verification failed,
// 1 anything else.
//

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "dynamics.hpp"
#include "eigensolver.hpp"
#include "hamiltonian.hpp"
#include "spectral.hpp"
#include "tunnelling.hpp"
#include "weights.hpp"

#ifndef MAGLOCAL_VERSION
#define MAGLOCAL_VERSION "0.0.0"
#endif

extern "C" {
void openblas_set_num_threads(int);
char* openblas_get_config(void);
}

namespace maglocal {

using json = nlohmann::json;

// a library failure tagged with the module it came from
class module_error : public std::runtime_error {
public:
    module_error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}
    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

template <class F>
auto in_module(const std::string& module, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const config_error&) {
        throw;
    } catch (const module_error&) {
        throw;
    } catch (const std::exception& e) {
        throw module_error(module, e.what());
    }
}

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s = {"spectrum", "project", "tunnel", "validate-weights", "evolve", "mobility"};
    return s;
}

struct RunOptions {
    std::string subcommand;
    std::filesystem::path out;
    int threads = 0;   // 0 = hardware concurrency
    bool verify = false;
};

struct Artifacts {
    std::vector<std::pair<std::string, std::string>> files;   // name, content
    json constants = json::object();
    json checks = json::object();
    json verify = json::object();
    std::vector<std::string> warnings;

    void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
    void expect(const std::string& name, double value, double limit, bool pass) {
        verify[name] = {{"value", value}, {"limit", limit}, {"pass", pass}};
    }
    bool verify_pass() const {
        for (const auto& [k, v] : verify.items())
            if (!v.at("pass").get<bool>()) return false;
        return true;
    }
};

//
// model assembly
//
struct Model {
    FluxProfile profile = FluxProfile::linear(1.0);
    RadialGrid grid;
    AngularPotential w;
    int j_max = 0;
    BlockHamiltonian h;
};

inline Model model_from(const Config& c, Artifacts& art) {
    Model m;
    m.grid = grid_from(c);
    m.profile = profile_from(c);
    m.w = in_module("perturbation", [&] { return potential_from(c, m.grid); });
    const long long jm = c.integer("channels.J_max");
    m.j_max = static_cast<int>(Config::check("channels.J_max", jm, jm >= 0 && jm <= 10000, "needs 0 <= J_max <= 10000"));
    const long long mm = c.integer("channels.M_max", -1);
    m.h = in_module("spectral_core", [&] { return assemble_hamiltonian(m.profile, m.w, m.grid, m.j_max, static_cast<int>(mm)); });
    for (const auto& wmsg : m.h.warnings()) art.warnings.push_back(wmsg);
    return m;
}

inline DiagonalizeOptions solver_from(const Config& c) {
    DiagonalizeOptions o;
    const long long dl = c.integer("solver.dense_limit", static_cast<long long>(o.dense_limit));
    o.dense_limit = static_cast<std::size_t>(Config::check("solver.dense_limit", dl, dl >= 0, "needs >= 0"));
    o.tol = Config::check("solver.tol", c.num("solver.tol", o.tol), c.num("solver.tol", o.tol) > 0.0, "needs tol > 0");
    const long long st = c.integer("solver.slice_target", static_cast<long long>(o.slice_target));
    o.slice_target = static_cast<std::size_t>(Config::check("solver.slice_target", st, st >= 4, "needs >= 4"));
    o.seed = static_cast<std::uint64_t>(c.integer("solver.seed", static_cast<long long>(o.seed)));
    return o;
}

inline double required_E0(const Config& c) {
    const double e = c.num("window.E0");
    return Config::check("window.E0", e, std::isfinite(e), "needs a finite value");
}

inline WindowedSpectrum window_from(const Config& c, const Model& m, Artifacts& art) {
    const double E0 = required_E0(c);
    const auto d0 = c.opt_num("window.delta0");
    if (d0) Config::check("window.delta0", *d0, *d0 > 0.0, "needs delta0 > 0");
    if (auto t = truncation_warning(m.profile, m.grid, m.j_max, E0)) art.warnings.push_back(*t);
    auto ws = in_module("spectral_core", [&] { return compute_window(m.h, m.w, E0, d0, solver_from(c)); });
    const auto& win = ws.projection.window;
    art.constants["window"] = {{"e0", win.e0}, {"E0", win.E0}, {"delta0", win.delta0}, {"c0", win.c0}, {"E_tilde", win.E_tilde}};
    art.constants["rank"] = ws.projection.rank();
    art.constants["route"] = ws.system.route;
    art.constants["max_residual"] = ws.system.max_residual;
    return ws;
}

inline json model_constants(const Model& m) {
    return {{"dim", m.h.dim()}, {"n_r", m.grid.size()}, {"r_max", m.grid.r_max()}, {"h", m.grid.h()},
            {"J_max", m.j_max}, {"M_max", m.h.m_max()}, {"profile", m.profile.name()},
            {"potential", m.w.description.empty() ? "zero" : m.w.description},
            {"gevrey_a", m.w.envelope.a}, {"gevrey_zeta", m.w.envelope.zeta},
            {"dropped_coupling_bound", m.h.dropped_coupling_bound()}};
}

// channel carrying most of column k
inline std::pair<int, double> dominant_channel(const MatrixC& v, Eigen::Index k, std::size_t n_r, int j_max) {
    int best = 0;
    double w = -1.0;
    for (int j = -j_max; j <= j_max; ++j) {
        const double s = v.col(k).segment(static_cast<Eigen::Index>(static_cast<std::size_t>(j + j_max) * n_r),
                                          static_cast<Eigen::Index>(n_r)).squaredNorm();
        if (s > w) {
            w = s;
            best = j;
        }
    }
    return {best, w};
}

inline void verify_csv(Artifacts& art, const std::string& name, const std::string& content) {
    // every row has the header's width and every cell parses as a finite number
    std::istringstream in(content);
    std::string line;
    std::size_t width = 0, rows = 0, bad = 0;
    bool header = true;
    while (std::getline(in, line)) {
        const auto cells = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
        if (header) {
            width = cells;
            header = false;
            continue;
        }
        ++rows;
        if (cells != width) ++bad;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                const double v = io::parse_double(cell, name);
                if (!std::isfinite(v) && cell != "inf" && cell != "nan") ++bad;
            } catch (const std::exception&) {
                ++bad;
            }
        }
    }
    art.expect("csv:" + name, static_cast<double>(bad), 0.0, bad == 0 && rows > 0);
}

//
// subcommands
//
inline void run_spectrum(const Config& c, Artifacts& art) {
    Model m = model_from(c, art);
    art.constants["model"] = model_constants(m);
    auto opt = solver_from(c);
    opt.upper = required_E0(c);
    if (auto t = truncation_warning(m.profile, m.grid, m.j_max, *opt.upper)) art.warnings.push_back(*t);
    const auto es = in_module("spectral_core", [&] { return diagonalize(m.h, opt); });
    io::Csv csv({"index", "energy", "channel", "channel_weight"});
    for (std::size_t k = 0; k < es.size(); ++k) {
        const auto [j, w] = dominant_channel(es.vectors, static_cast<Eigen::Index>(k), m.h.n_r(), m.j_max);
        csv.row(k, es.values[k], j, w);
    }
    art.add("eigenvalues.csv", csv.str());
    art.constants["count"] = es.size();
    art.constants["lowest"] = es.values.empty() ? json(nullptr) : json(es.values.front());
    art.constants["route"] = es.route;
    art.constants["max_residual"] = es.max_residual;
    art.constants["norm_estimate"] = es.norm_estimate;
    bool ascending = std::is_sorted(es.values.begin(), es.values.end());
    art.expect("eigenvalues_ascending", ascending ? 0.0 : 1.0, 0.0, ascending);
    art.expect("residual", es.max_residual, opt.tol * es.norm_estimate, es.max_residual <= opt.tol * es.norm_estimate);
}

inline void run_project(const Config& c, Artifacts& art) {
    Model m = model_from(c, art);
    art.constants["model"] = model_constants(m);
    const auto ws = window_from(c, m, art);
    const auto& p = ws.projection;
    io::Csv vals({"k", "energy", "channel", "channel_weight"});
    for (std::size_t k = 0; k < p.rank(); ++k) {
        const auto [j, w] = dominant_channel(p.vectors, static_cast<Eigen::Index>(k), p.n_r(), p.j_max);
        vals.row(k, p.eigenvalues[k], j, w);
    }
    art.add("projection.csv", vals.str());
    io::Csv com({"j", "channel_norm2_trace", "commutator_norm"});
    double max_comm = 0.0;
    for (int j = -m.j_max; j <= m.j_max; ++j) {
        const auto base = static_cast<Eigen::Index>(static_cast<std::size_t>(j + m.j_max) * p.n_r());
        const double tr = p.rank() ? p.vectors.middleRows(base, static_cast<Eigen::Index>(p.n_r())).squaredNorm() : 0.0;
        const double cn = channel_commutator_norm(p, j);
        max_comm = std::max(max_comm, cn);
        com.row(j, tr, cn);
    }
    art.add("commutators.csv", com.str());
    const auto err = projector_errors(p);
    art.constants["projector"] = {{"idempotency", err.idempotency}, {"self_adjointness", err.self_adjointness},
                                  {"orthonormality", err.orthonormality}, {"max_commutator", max_comm}};
    art.expect("idempotency", err.idempotency, 1e-10, err.idempotency <= 1e-10);
    art.expect("orthonormality", err.orthonormality, 1e-10, err.orthonormality <= 1e-10);
    if (m.h.block_diagonal()) art.expect("commutator_zero_without_coupling", max_comm, 0.0, max_comm == 0.0);
}

inline WeightSequence weight_from(const Config& c, WeightSequence::Kind kind, const Model& m, const SpectralWindow& win) {
    const WeightBuildParams bp{m.w.envelope.a, m.w.envelope.zeta, m.j_max};
    const auto& g = m.profile.growth();
    if (kind == WeightSequence::Kind::interior && c.str("weights.interior", "auto") != "auto") {
        if (c.str("weights.interior") != "explicit") throw config_error("weights.interior", "expected auto or explicit");
        const double eps = c.num("weights.interior.eps");
        Config::check("weights.interior.eps", eps, eps > 0.0, "needs eps > 0");
        const long long j0 = c.integer("weights.interior.j0");
        Config::check("weights.interior.j0", j0, j0 >= 0, "needs j0 >= 0");
        return interior_weight(eps, static_cast<int>(j0), g.sigma_plus, bp.zeta);
    }
    if (kind == WeightSequence::Kind::exterior && c.str("weights.exterior", "auto") != "auto") {
        if (c.str("weights.exterior") != "explicit") throw config_error("weights.exterior", "expected auto or explicit");
        const double cc = c.num("weights.exterior.c"), eta = c.num("weights.exterior.eta");
        Config::check("weights.exterior.c", cc, cc > 0.0, "needs c > 0");
        Config::check("weights.exterior.eta", eta, eta > 1.0, "needs eta > 1");
        return exterior_weight(cc, eta, g.sigma_minus, bp.zeta);
    }
    return in_module("weights_tunnelling", [&] { return build_weight(kind, m.profile, win, m.grid, bp); });
}

inline json weight_json(const WeightSequence& f) {
    json j = {{"kind", f.name()}};
    switch (f.kind) {
    case WeightSequence::Kind::interior:
        j.update({{"eps", f.eps}, {"j0", f.j0}, {"sigma_plus", f.sigma_plus}, {"zeta", f.zeta},
                  {"c_plus", f.c_plus}, {"delta_plus", f.delta_plus}});
        break;
    case WeightSequence::Kind::exterior:
        j.update({{"c", f.c}, {"eta", f.eta}, {"sigma_minus", f.sigma_minus}, {"zeta", f.zeta},
                  {"c_minus", f.c_minus}, {"delta_minus", f.delta_minus}});
        break;
    case WeightSequence::Kind::mobility: j.update({{"delta1", f.delta1}, {"eta1", f.eta1}}); break;
    default: break;
    }
    return j;
}

inline json fit_json(const std::optional<DecayFit>& f) {
    if (!f) return nullptr;
    return {{"slope", f->slope}, {"intercept", f->intercept}, {"r2", f->r2}};
}

inline std::vector<WeightSequence::Kind> weight_kinds(const Config& c, const Model& m) {
    std::vector<WeightSequence::Kind> out;
    std::istringstream in(c.str("weights.kinds", m.profile.is_linear() ? "mobility" : "interior,exterior"));
    std::string k;
    while (std::getline(in, k, ',')) {
        k.erase(0, k.find_first_not_of(' '));
        k.erase(k.find_last_not_of(' ') + 1);
        if (k == "interior") out.push_back(WeightSequence::Kind::interior);
        else if (k == "exterior") out.push_back(WeightSequence::Kind::exterior);
        else if (k == "mobility") out.push_back(WeightSequence::Kind::mobility);
        else if (k == "zero") out.push_back(WeightSequence::Kind::zero);
        else throw config_error("weights.kinds", "unknown weight kind '" + k + "' (interior, exterior, mobility, zero)");
    }
    if (out.empty()) throw config_error("weights.kinds", "no weight kinds listed");
    return out;
}

inline void run_tunnel(const Config& c, Artifacts& art) {
    Model m = model_from(c, art);
    art.constants["model"] = model_constants(m);
    const auto ws = window_from(c, m, art);
    const auto& win = ws.projection.window;
    for (auto kind : weight_kinds(c, m)) {
        if (kind == WeightSequence::Kind::interior) {
            const auto f = weight_from(c, kind, m, win);
            const double cp = c.num("tunnel.c_plus", f.c_plus), dp = c.num("tunnel.delta_plus", f.delta_plus);
            const auto s = in_module("weights_tunnelling", [&] {
                return tunnelling_interior_sum(ws.projection, cp, dp, f.sigma_plus, f.zeta, m.j_max);
            });
            art.add("tunnel_interior.csv", s.csv());
            art.constants["interior"] = {{"weight", weight_json(f)}, {"c_plus", cp}, {"delta_plus", dp}, {"sum", s.sum},
                                         {"tail_ratio", s.tail_ratio ? json(*s.tail_ratio) : json(nullptr)},
                                         {"norm_fit", fit_json(s.norm_fit)}, {"term_fit", fit_json(s.term_fit)}};
            bool mono = std::is_sorted(s.running.begin(), s.running.end());
            art.expect("interior_running_sum_monotone", mono ? 0.0 : 1.0, 0.0, mono);
        } else if (kind == WeightSequence::Kind::exterior) {
            const auto g = weight_from(c, kind, m, win);
            const double cm = c.num("tunnel.c_minus", g.c_minus), dm = c.num("tunnel.delta_minus", g.delta_minus);
            const auto s = in_module("weights_tunnelling", [&] {
                return tunnelling_exterior_sum(ws.projection, cm, dm, g.sigma_minus, g.zeta, m.j_max);
            });
            art.add("tunnel_exterior.csv", s.csv());
            art.constants["exterior"] = {{"weight", weight_json(g)}, {"c_minus", cm}, {"delta_minus", dm}, {"sum", s.sum},
                                         {"tail_ratio", s.tail_ratio ? json(*s.tail_ratio) : json(nullptr)},
                                         {"norm_fit", fit_json(s.norm_fit)}, {"term_fit", fit_json(s.term_fit)}};
            bool mono = std::is_sorted(s.running.begin(), s.running.end());
            art.expect("exterior_running_sum_monotone", mono ? 0.0 : 1.0, 0.0, mono);
        } else {
            throw config_error("weights.kinds", "tunnel accepts interior and exterior weights only");
        }
    }
}

inline void run_validate_weights(const Config& c, Artifacts& art) {
    Model m = model_from(c, art);
    art.constants["model"] = model_constants(m);
    const auto ws = window_from(c, m, art);
    const auto& win = ws.projection.window;
    json report = json::object();
    for (auto kind : weight_kinds(c, m)) {
        const auto f = kind == WeightSequence::Kind::zero ? zero_weight() : weight_from(c, kind, m, win);
        const auto rep = weight_validate(f, m.profile, win, m.w.envelope.a, m.w.envelope.zeta, m.grid, m.j_max);
        const auto tg = in_module("weights_tunnelling", [&] { return twisted_gap_check(m.h, m.profile, f, win); });
        json r = {{"weight", weight_json(f)},
                  {"slope", {{"pass", rep.slope_pass()}, {"checks", rep.slope_checks}, {"violations", rep.slope_violations},
                             {"worst_slack", rep.slope_worst_slack}}},
                  {"bounded", {{"pass", rep.bounded}, {"max_exp_on_classical", rep.max_exp_on_classical},
                               {"vanishes_on_classical", rep.vanishes_on_classical}}},
                  {"efw", {{"pass", rep.efw_pass()}, {"required", rep.efw_required}, {"checks", rep.efw_checks},
                           {"violations", rep.efw_violations}, {"worst_ratio", rep.efw_worst_ratio}}},
                  {"twisted_gap", {{"pass", tg.pass()}, {"threshold", tg.threshold}, {"lowest", tg.lowest},
                                   {"slack", tg.slack}, {"below", tg.below}}}};
        if (rep.slope_first_violation)
            r["slope"]["first_violation"] = {{"j", rep.slope_first_violation->first}, {"r", rep.slope_first_violation->second}};
        if (rep.efw_first_violation)
            r["efw"]["first_violation"] = {{"j", rep.efw_first_violation->first}, {"k", rep.efw_first_violation->second}};
        report[f.name()] = r;
        art.checks[f.name()] = {{"hypotheses", rep.pass()}, {"twisted_gap", tg.pass()}};
    }
    art.constants["weights"] = report;
    art.add("weight_report.json", report.dump(2) + "\n");
}

inline SeedSpec seed_from(const Config& c, const Model& m) {
    const std::string kind = c.str("seed.kind", "gaussian");
    if (kind == "eigenvector") {
        const long long k = c.integer("seed.k", 0);
        return EigenvectorSeed{static_cast<std::size_t>(Config::check("seed.k", k, k >= 0, "needs k >= 0"))};
    }
    if (kind == "gaussian") {
        const double jc = c.num("seed.j", 0.0);
        const double rc = c.num("seed.r", std::max(m.grid.h(), std::pow(std::abs(jc), 2.0 / 3.0)));
        const double sj = c.num("seed.sigma_j", 1.0), sr = c.num("seed.sigma_r", 1.0);
        Config::check("seed.sigma_j", sj, sj > 0.0, "needs sigma_j > 0");
        Config::check("seed.sigma_r", sr, sr > 0.0, "needs sigma_r > 0");
        return GaussianSeed{jc, rc, sj, sr, c.num("seed.theta", std::numbers::pi / 2)};
    }
    if (kind == "channel") {
        const long long j = c.integer("seed.j", 0);
        Config::check("seed.j", j, std::abs(j) <= m.j_max, "channel outside [-J_max, J_max]");
        const double sr = c.num("seed.sigma_r", 1.0);
        Config::check("seed.sigma_r", sr, sr > 0.0, "needs sigma_r > 0");
        return ChannelBumpSeed{static_cast<int>(j), c.num("seed.r", 1.0), sr};
    }
    throw config_error("seed.kind", "unknown seed '" + kind + "' (eigenvector, gaussian, channel)");
}

inline std::vector<double> times_from(const Config& c) {
    const std::string kind = c.str("time.kind", "geometric");
    const long long n = c.integer("time.n", 200);
    Config::check("time.n", n, n >= 2, "needs n >= 2");
    if (kind == "geometric") {
        const double t0 = c.num("time.t0", 1.0), t1 = c.num("time.t1", 1000.0);
        Config::check("time.t0", t0, t0 > 0.0, "needs t0 > 0");
        Config::check("time.t1", t1, t1 > t0, "needs t1 > t0");
        auto t = geometric_times(t0, t1, static_cast<std::size_t>(n));
        t.insert(t.begin(), 0.0);   // baseline for the growth fit
        return t;
    }
    if (kind == "uniform") {
        const double t1 = c.num("time.t1");
        Config::check("time.t1", t1, t1 > 0.0, "needs t1 > 0");
        return uniform_times(t1, static_cast<std::size_t>(n));
    }
    throw config_error("time.kind", "unknown time grid '" + kind + "' (geometric, uniform)");
}

inline void run_evolve(const Config& c, Artifacts& art) {
    Model m = model_from(c, art);
    art.constants["model"] = model_constants(m);
    const auto ws = window_from(c, m, art);
    const auto& p = ws.projection;
    const auto seed = seed_from(c, m);
    const auto phi0 = in_module("dynamics", [&] { return prepare_state(p, seed); });
    const auto times = times_from(c);
    const double nu = c.num("evolve.nu", 1.0), beta = c.num("evolve.beta", 1.0);
    Config::check("evolve.nu", nu, nu >= 0.0, "needs nu >= 0");
    Config::check("evolve.beta", beta, beta >= 0.0, "needs beta >= 0");
    const double sigma_minus = m.profile.growth().sigma_minus, sigma_plus = m.profile.growth().sigma_plus;
    const double zeta = m.w.envelope.zeta;
    const double beta1 = zeta * nu / sigma_minus;

    const auto series = record_series(p, phi0, times, nu, beta);
    const auto series1 = record_series(p, phi0, times, nu, beta1);
    art.add("observables.csv", series.csv());
    art.add("channel_norms.csv", series.channel_csv());

    const auto t1 = bound_check_thm1(series1, nu, sigma_minus, zeta);
    io::Csv r1({"t", "x_moment", "j_moment", "norm", "ratio"});
    for (std::size_t k = 0; k < series1.times.size(); ++k)
        r1.row(series1.times[k], series1.x_moment[k], series1.j_moment[k], series1.norm[k], t1.ratio[k]);
    art.add("thm1.csv", r1.str());

    const double tol = c.num("evolve.tolerance", 0.1);
    const auto t2 = growth_fit_thm2(series, m.w.decay, {sigma_plus, zeta, beta, tol});
    art.constants["evolve"] = {{"nu", nu}, {"beta", beta}, {"beta_thm1", beta1}, {"sigma_minus", sigma_minus},
                               {"sigma_plus", sigma_plus}, {"zeta", zeta}, {"times", times.size()},
                               {"window_defect", window_defect(p, phi0)}, {"norm_drift", norm_drift(series)},
                               {"channel_norm_drift", channel_norm_drift(series)}};
    art.constants["thm1"] = {{"sup", t1.sup}, {"first_quartile_mean", t1.first_quartile_mean},
                             {"last_quartile_mean", t1.last_quartile_mean}, {"mann_kendall_z", t1.trend.z},
                             {"mann_kendall_increasing", t1.trend.increasing}, {"pass", t1.pass}};
    art.constants["thm2"] = {{"mode", t2.mode}, {"fitted", t2.fitted}, {"bound", t2.bound}, {"tolerance", tol},
                             {"r2", t2.r2}, {"points", t2.points}, {"flat", t2.flat}, {"reliable", t2.reliable},
                             {"pass", t2.pass}};
    art.checks["thm1"] = t1.pass;
    art.checks["thm2"] = t2.pass;

    const double hT = c.num("evolve.heisenberg_T", 0.0);
    if (hT > 0.0) {
        const long long hn = c.integer("evolve.heisenberg_n", 200);
        Config::check("evolve.heisenberg_n", hn, hn >= 2, "needs n >= 2");
        const auto a = heisenberg_check(m.h, p, phi0, hT, static_cast<std::size_t>(hn));
        const auto b = heisenberg_check(m.h, p, phi0, hT, static_cast<std::size_t>(2 * hn));
        art.constants["heisenberg"] = {{"T", hT}, {"n", hn}, {"max_residual", a.max_residual},
                                       {"final_residual", a.final_residual}, {"final_residual_half_step", b.final_residual},
                                       {"halving_ratio", b.final_residual > 0 ? json(a.final_residual / b.final_residual) : json(nullptr)}};
    }
    art.expect("norm_drift", norm_drift(series), 1e-10, norm_drift(series) <= 1e-10);
    double worst_sum = 0.0, most_negative = 0.0;
    for (std::size_t k = 0; k < series.times.size(); ++k) {
        double s = 0.0;
        for (double v : series.channel_norms[k]) s += v;
        worst_sum = std::max(worst_sum, std::abs(s - series.norm[k]));
        most_negative = std::min({most_negative, series.x_moment[k], series.j_moment[k]});
    }
    art.expect("channel_norms_sum_to_norm", worst_sum, 1e-12, worst_sum <= 1e-12);
    art.expect("moments_nonnegative", most_negative, 0.0, most_negative >= 0.0);
    if (m.w.radial)
        art.expect("channel_norm_conservation", channel_norm_drift(series), 1e-10, channel_norm_drift(series) <= 1e-10);
}

inline void run_mobility(const Config& c, Artifacts& art) {
    const auto profile = profile_from(c);
    const auto lambda = profile.linear_lambda();
    if (!lambda) throw config_error("profile.kind", "mobility needs profile.kind = linear");
    if (c.str("potential.kind", "zero") != "zero") throw config_error("potential.kind", "mobility needs potential.kind = zero");
    const RadialGrid grid = grid_from(c);
    const long long jm = c.integer("channels.J_max");
    Config::check("channels.J_max", jm, jm >= 0, "needs J_max >= 0");
    MobilityOptions o;
    o.low_lo = c.num("mobility.low_lo", o.low_lo);
    o.low_hi = c.num("mobility.low_hi", o.low_hi);
    o.high_center = c.num("mobility.high_center", o.high_center);
    o.high_half_width = c.num("mobility.high_half_width", o.high_half_width);
    o.margin = c.num("mobility.margin", o.margin);
    o.low_stretch = Config::check("mobility.low_stretch", c.num("mobility.low_stretch", o.low_stretch),
                                  c.num("mobility.low_stretch", o.low_stretch) > 1.0, "needs a factor > 1");
    o.high_stretch = Config::check("mobility.high_stretch", c.num("mobility.high_stretch", o.high_stretch),
                                   c.num("mobility.high_stretch", o.high_stretch) > 1.0, "needs a factor > 1");
    o.min_decay_rate = c.num("mobility.min_decay_rate", o.min_decay_rate);
    o.max_shift = c.num("mobility.max_shift", o.max_shift);
    o.min_width_ratio = c.num("mobility.min_width_ratio", o.min_width_ratio);
    const auto rep = in_module("dynamics", [&] { return mobility_edge_scan(*lambda, grid, static_cast<int>(jm), o); });
    io::Csv lo({"j", "energy", "r_hi", "decay_rate", "r2", "shift", "pass"});
    for (const auto& s : rep.localized) lo.row(s.j, s.energy, s.r_hi, s.decay_rate, s.r2, s.shift, s.pass ? 1 : 0);
    io::Csv hi({"j", "states_small", "states_large", "width_small", "width_large", "ratio", "pass"});
    for (const auto& b : rep.extended)
        hi.row(b.j, b.states_small, b.states_large, b.width_small, b.width_large, b.ratio, b.pass ? 1 : 0);
    art.add("mobility_localized.csv", lo.str());
    art.add("mobility_extended.csv", hi.str());
    auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    art.constants["mobility"] = {{"lambda", *lambda}, {"low_band", {o.low_lo, o.low_hi}},
                                 {"high_band", {o.high_center - o.high_half_width, o.high_center + o.high_half_width}},
                                 {"localized", rep.localized.size()}, {"extended_channels", rep.extended.size()},
                                 {"min_decay_rate", finite_or_null(rep.min_decay_rate)}, {"max_shift", rep.max_shift},
                                 {"min_width_ratio", finite_or_null(rep.min_width_ratio)},
                                 {"low_empty", rep.low_empty}, {"high_empty", rep.high_empty}};
    art.checks["localized_band"] = rep.low_pass();
    art.checks["extended_band"] = rep.high_pass();
}

//
// driver
//
inline json versions_json(int threads) {
    return {{"maglocal", MAGLOCAL_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"openblas", std::string(openblas_get_config())},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                  "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__},
            {"threads", threads}};
}

inline int set_threads(int requested) {
    const int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    openblas_set_num_threads(n);
    return n;
}

// returns the process exit code; diagnostics go to err
inline int run(const RunOptions& ro, const Config& cfg, std::ostream& err = std::cerr) {
    const auto t0 = std::chrono::steady_clock::now();
    Artifacts art;
    try {
        if (ro.threads < 0) throw config_error("--threads", "needs n >= 0");
        const int threads = set_threads(ro.threads);
        if (ro.subcommand == "spectrum") run_spectrum(cfg, art);
        else if (ro.subcommand == "project") run_project(cfg, art);
        else if (ro.subcommand == "tunnel") run_tunnel(cfg, art);
        else if (ro.subcommand == "validate-weights") run_validate_weights(cfg, art);
        else if (ro.subcommand == "evolve") run_evolve(cfg, art);
        else if (ro.subcommand == "mobility") run_mobility(cfg, art);
        else throw config_error("subcommand", "unknown subcommand '" + ro.subcommand + "'");

        std::vector<std::string> names;
        for (const auto& [name, content] : art.files) {
            if (ro.verify && name.size() > 4 && name.substr(name.size() - 4) == ".csv") verify_csv(art, name, content);
            io::atomic_write(ro.out / name, content);
            names.push_back(name);
        }
        json config_echo = json::object();
        for (const auto& [k, v] : cfg.values()) config_echo[k] = v;
        json manifest = {{"tool", "maglocal"},
                         {"subcommand", ro.subcommand},
                         {"config", config_echo},
                         {"versions", versions_json(threads)},
                         {"constants", art.constants},
                         {"checks", art.checks},
                         {"warnings", art.warnings},
                         {"artifacts", names}};
        if (ro.verify) {
            manifest["verify"] = {{"pass", art.verify_pass()}, {"checks", art.verify}};
            io::atomic_write(ro.out / "verify.json", manifest["verify"].dump(2) + "\n");
        }
        manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        io::atomic_write(ro.out / "manifest.json", manifest.dump(2) + "\n");
        for (const auto& w : art.warnings) err << "maglocal: warning: " << w << "\n";
        if (ro.verify && !art.verify_pass()) {
            for (const auto& [k, v] : art.verify.items())
                if (!v.at("pass").get<bool>()) err << "maglocal: verify failed: " << k << " = " << v.at("value") << "\n";
            return 4;
        }
        return 0;
    } catch (const config_error& e) {
        err << "maglocal: invalid config: " << e.what() << "\n";
        return 2;
    } catch (const module_error& e) {
        err << "maglocal: numerical failure in " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "maglocal: error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace maglocal

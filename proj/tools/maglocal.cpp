// maglocal command line front end
//
//   maglocal <subcommand> --config run.cfg --out results/ [--threads N] [--verify]

#include <CLI11.hpp>

#include "maglocal/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"maglocal: spectral localization and transport for magnetic Schroedinger operators"};
    app.set_version_flag("--version", std::string(MAGLOCAL_VERSION));
    app.require_subcommand(1, 1);

    struct Args {
        std::string config;
        std::string out;
        int threads = 0;
        bool verify = false;
    };
    std::map<std::string, Args> args;
    const std::map<std::string, std::string> help = {
        {"spectrum", "eigenvalues below E0"},
        {"project", "spectral projection on [e0, E0] and channel commutators"},
        {"tunnel", "weighted tunnelling sums for the interior and exterior weights"},
        {"validate-weights", "check weight hypotheses and the twisted spectral gap"},
        {"evolve", "time evolution inside the window, moment bounds and growth fits"},
        {"mobility", "localized and extended bands for the linear flux"}};
    for (const auto& name : maglocal::subcommands()) {
        auto& a = args[name];
        auto* sc = app.add_subcommand(name, help.at(name));
        sc->add_option("--config", a.config, "run configuration")->required();
        sc->add_option("--out", a.out, "output directory (overrides output.dir)");
        sc->add_option("--threads", a.threads, "BLAS threads, 0 = all cores")->capture_default_str();
        sc->add_flag("--verify", a.verify, "check artifacts and invariants, write verify.json");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    const auto& a = args.at(sub);
    maglocal::RunOptions ro{sub, {}, a.threads, a.verify};
    maglocal::Config cfg;
    try {
        cfg = maglocal::Config::load(a.config);
        if (!a.out.empty()) ro.out = a.out;
        else if (cfg.has("output.dir")) ro.out = cfg.path("output.dir");
        else throw maglocal::config_error("output.dir", "no output directory; pass --out or set output.dir");
    } catch (const maglocal::config_error& e) {
        std::cerr << "maglocal: invalid config: " << e.what() << "\n";
        return 2;
    }
    return maglocal::run(ro, cfg);
}

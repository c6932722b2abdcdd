#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "levylab/core/error.hpp"
#include "levylab/harness/harness.hpp"
#include "levylab/harness/report.hpp"

using namespace levylab;
using namespace levylab::harness;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    int threads = 0;
};

void add_common(CLI::App* app, Options& o) {
    app->add_option("--config", o.config, "experiment config (TOML key-value)")->required()->check(CLI::ExistingFile);
    app->add_option("--out", o.out, "output directory")->required();
    app->add_option("--seed", o.seed, "random seed (overrides the config key 'seed')");
    app->add_option("--paths", o.paths, "Monte Carlo path count (overrides sim.paths)");
    app->add_option("--threads", o.threads, "OpenMP threads (default: LEVYLAB_THREADS or the runtime default)");
}

int default_threads() {
    const char* env = std::getenv("LEVYLAB_THREADS");
    if (!env) return 0;
    try {
        return std::max(0, std::stoi(env));
    } catch (const std::exception&) {
        return 0;
    }
}

int run(Kind kind, const Options& o) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    cfg.out_dir = o.out;
    try {
        cfg.raw = Config::load(o.config);
        cfg.thresholds = Thresholds::from(cfg.raw);
        cfg.seed = o.seed ? o.seed : static_cast<std::uint64_t>(cfg.raw.number("seed", 1.0));
    } catch (const Error& e) {
        std::cerr << "levylab: " << e.what() << "\n";
        try {
            write_error_record(cfg, e);
        } catch (const Error&) {
        }
        return 1;
    }
    if (o.paths) cfg.raw.set("sim.paths", static_cast<double>(o.paths));
    cfg.threads = o.threads ? o.threads : default_threads();

    const auto result = run_experiment(cfg);
    for (const auto& c : result.checks)
        std::cout << status_name(c.status) << "  " << c.name << "  (" << fmt(c.measured) << ")\n";
    if (result.exit_code == 1) std::cerr << "levylab: " << result.error << "\n";
    return result.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"levylab: non-local drift-diffusion laboratory"};
    app.require_subcommand(1);
    Options o;
    std::string verify_kind;

    struct Sub {
        const char* name;
        const char* help;
        Kind kind;
    };
    const Sub subs[] = {
        {"symbol", "symbol table and coercivity fit", Kind::symbol},
        {"lp", "Littlewood-Paley identities on random fields", Kind::lp},
        {"pde", "solve the non-local equation", Kind::pde},
        {"simulate", "simulate the jump SDE by thinning", Kind::simulate},
        {"regime-study", "KS study across drift mollifications", Kind::regime_study},
    };
    for (const auto& s : subs) add_common(app.add_subcommand(s.name, s.help), o);
    auto* verify = app.add_subcommand("verify", "run a verification experiment");
    verify->add_option("kind", verify_kind,
                       "apriori | krylov | feynman-kac | zvonkin | maxprinciple | coercivity | commutator")
        ->required();
    add_common(verify, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (verify->parsed()) {
            const Kind k = parse_kind(verify_kind);
            if (k < Kind::verify_apriori || k > Kind::verify_commutator)
                fail(ErrorCode::configuration, "not a verification kind: " + verify_kind);
            return run(k, o);
        }
        for (const auto& s : subs)
            if (app.got_subcommand(s.name)) return run(s.kind, o);
    } catch (const Error& e) {
        std::cerr << "levylab: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

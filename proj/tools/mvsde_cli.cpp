// Command-line harness for the McKean-Vlasov particle studies.
//
//   mvsde converge|moments|chaos|corrupt|validate [flags]
//
// Exit codes: 0 success, 1 usage/config error, 2 simulation failure,
// 3 validation failure.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvsde/mvsde.hpp"

namespace {

namespace ex = mvsde::experiments;

constexpr int kExitUsage = 1;
constexpr int kExitSimulation = 2;
constexpr int kExitValidation = 3;

struct Flags {
    std::string config;
    std::string model_positional;
    // flag name -> raw values, in command-line order
    std::map<std::string, std::vector<std::string>> values;
    bool allow_unsafe_h = false;
};

void add_study_flags(CLI::App* cmd, Flags& flags) {
    cmd->add_option("--config", flags.config, "key = value config file; flags override it");
    auto add = [&](const std::string& name, const std::string& help) {
        cmd->add_option("--" + name, flags.values[name], help)->allow_extra_args(false);
    };
    add("model", "example-4.1 | example-4.2");
    add("scheme", "pem | bem | em (repeatable or comma separated)");
    add("n", "particle count; chaos takes a list (repeatable)");
    add("t", "horizon T");
    add("h", "step size, decimal or 2^-k (repeatable)");
    add("href", "reference (finest) step, decimal or 2^-k");
    add("seed", "Brownian driver seed");
    add("replicas", "Monte Carlo replicas (converge)");
    add("threads", "worker threads");
    add("out", "CSV output path (default: stdout)");
    add("x0", "initial value override");
    add("nmax", "proxy particle count (chaos)");
    add("newton-tol", "Newton residual tolerance (bem)");
    add("newton-max-iter", "Newton iteration cap (bem)");
    add("moment", "moment order 2p to record (repeatable)");
    add("stride", "steps between recorded moments");
    add("samples", "sample count (validate)");
    cmd->add_flag("--allow-unsafe-h", flags.allow_unsafe_h, "permit h above the admissible maximum");
}

ex::StudyConfig resolve(const std::string& command, const Flags& flags) {
    auto cfg = flags.config.empty() ? ex::defaults_for(command) : ex::load_config(flags.config, command);
    if (!flags.model_positional.empty()) cfg.model = flags.model_positional;
    for (const auto& [key, values] : flags.values) {
        bool append = false;
        for (const auto& v : values) {
            ex::apply_setting(cfg, key, v, append, "--" + key + ": ");
            append = true;
        }
    }
    if (flags.allow_unsafe_h) cfg.allow_unsafe_h = true;
    return cfg;
}

void emit(const std::vector<ex::ResultRow>& rows, const std::string& out) {
    if (out.empty())
        ex::write_csv(std::cout, rows);
    else
        ex::write_csv(rows, out);
}

int run_command(const std::string& command, const Flags& flags) {
    const auto cfg = resolve(command, flags);
    if (command == "validate") {
        const auto model = mvsde::make_model(cfg.model);
        mvsde::print_constants(std::cerr, model);
        const auto outcome = ex::validate_cmd(cfg);
        mvsde::print_report(std::cerr, outcome.report);
        emit(outcome.rows, cfg.out);
        return outcome.report.passed() ? 0 : kExitValidation;
    }

    ex::StudyOutcome outcome;
    if (command == "converge")
        outcome = ex::converge_cmd(cfg);
    else if (command == "moments")
        outcome = ex::moments_cmd(cfg);
    else if (command == "chaos")
        outcome = ex::chaos_cmd(cfg);
    else
        outcome = ex::corrupt_cmd(cfg);
    emit(outcome.rows, cfg.out);

    for (const auto& r : outcome.rates) {
        if (r.fit)
            std::fprintf(stderr, "%s: fitted rate %.4f\n", r.scheme.c_str(), r.fit->slope);
        else
            std::fprintf(stderr, "%s: fitted rate absent (fewer than two usable points)\n", r.scheme.c_str());
    }
    if (outcome.simulation_failed) {
        std::fprintf(stderr, "one or more runs failed; see blowup_step rows\n");
        return kExitSimulation;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Particle-system simulations for McKean-Vlasov SDEs"};
    app.require_subcommand(1);
    // "-h" would collide with the step-size option "--h".
    app.set_help_flag("--help", "Print this help message and exit");
    std::map<std::string, Flags> flags;
    for (const auto& name : ex::study_commands()) {
        auto* cmd = app.add_subcommand(name);
        add_study_flags(cmd, flags[name]);
        if (name == "validate") cmd->add_option("model_name", flags[name].model_positional, "model to check");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    for (const auto& name : ex::study_commands()) {
        if (!app.got_subcommand(name)) continue;
        try {
            return run_command(name, flags[name]);
        } catch (const mvsde::ConfigError& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return kExitUsage;
        } catch (const mvsde::Error& e) {
            std::fprintf(stderr, "simulation failure: %s\n", e.what());
            return kExitSimulation;
        }
    }
    return kExitUsage;
}

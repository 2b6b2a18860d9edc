// zcool: pulsed sideband-cooling simulator and analysis CLI for
// same-species ion chains with Zeeman-selective shelving.

#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "zcool/runner.hpp"

namespace {

struct GlobalFlags {
    std::string config_path;
    std::string out_dir;
    std::string backend;
    uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

zcool::RunConfig resolve_config(const GlobalFlags& flags) {
    zcool::RunConfig cfg = flags.config_path.empty()
                               ? zcool::RunConfig::defaults()
                               : zcool::load_config_file(flags.config_path);
    if (!flags.out_dir.empty()) cfg.output.dir = flags.out_dir;
    if (flags.seed_set) cfg.engine.master_seed = flags.seed;
    if (!flags.backend.empty()) {
        if (flags.backend == "mc")
            cfg.engine.backend = zcool::Backend::monte_carlo;
        else if (flags.backend == "rate")
            cfg.engine.backend = zcool::Backend::rate;
        else
            throw std::invalid_argument("--backend must be 'mc' or 'rate'");
    }
    if (flags.threads > 0) cfg.engine.threads = flags.threads;
    cfg.validate();
    return cfg;
}

void add_common_flags(CLI::App* cmd, GlobalFlags& flags) {
    cmd->add_option("--config", flags.config_path, "config file (JSON); a run manifest works too");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "master seed")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--backend", flags.backend, "evolution backend: mc | rate");
    cmd->add_option("--threads", flags.threads,
                    "worker threads (affects speed only, never results)");
}

int run_command(const GlobalFlags& flags,
                const std::function<zcool::CommandResult(const zcool::RunConfig&)>& fn) {
    try {
        const zcool::RunConfig cfg = resolve_config(flags);
        const zcool::CommandResult result = fn(cfg);
        zcool::write_files(cfg.output.dir, result);
        for (const auto& [name, _] : result.files)
            std::cout << cfg.output.dir << "/" << name << "\n";
        return 0;
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = {{"message", e.what()}};
        std::cerr << err.dump() << std::endl;
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sideband-cooling protocol simulator for same-species ion chains"};
    app.require_subcommand(1);
    app.set_version_flag("--version", zcool::version_string());

    GlobalFlags flags;
    std::string trace_path;

    auto* modes = app.add_subcommand("modes", "chain normal-mode structure (JSON)");
    add_common_flags(modes, flags);

    auto* cool = app.add_subcommand("cool", "cooling cycles on one target mode (CSV)");
    add_common_flags(cool, flags);

    auto* suppress = app.add_subcommand(
        "suppress", "periodic cooling bursts against heating; steady-state detection");
    add_common_flags(suppress, flags);

    auto* sweep =
        app.add_subcommand("sweep", "steady-state nbar vs pulses-per-burst and duty cycle");
    add_common_flags(sweep, flags);

    auto* scan = app.add_subcommand("scan", "shelving-detection spectroscopy scan (CSV)");
    add_common_flags(scan, flags);

    auto* probe =
        app.add_subcommand("probe", "sideband-ratio thermometry of a thermal state");
    add_common_flags(probe, flags);

    auto* coherence = app.add_subcommand(
        "coherence", "light-shift coherence prediction and spin-echo simulation");
    add_common_flags(coherence, flags);

    auto* allan = app.add_subcommand("allan", "Allan deviation of an intensity trace");
    add_common_flags(allan, flags);
    allan->add_option("--input", trace_path, "two-column CSV: time_s,amplitude")
        ->required();

    auto* scatter =
        app.add_subcommand("scatter", "scattered-photon absorption upper bound (JSON)");
    add_common_flags(scatter, flags);

    CLI11_PARSE(app, argc, argv);

    if (modes->parsed()) return run_command(flags, zcool::run_modes);
    if (cool->parsed()) return run_command(flags, zcool::run_cool);
    if (suppress->parsed()) return run_command(flags, zcool::run_suppress);
    if (sweep->parsed()) return run_command(flags, zcool::run_sweep_cmd);
    if (scan->parsed()) return run_command(flags, zcool::run_scan);
    if (probe->parsed()) return run_command(flags, zcool::run_probe);
    if (coherence->parsed()) return run_command(flags, zcool::run_coherence);
    if (scatter->parsed()) return run_command(flags, zcool::run_scatter);
    if (allan->parsed()) {
        return run_command(flags, [&](const zcool::RunConfig& cfg) {
            return zcool::run_allan(cfg, zcool::read_trace_csv(trace_path));
        });
    }
    return 1;
}

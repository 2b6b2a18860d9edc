#include "zcool/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace zcool {

namespace {

// Reject keys that no reader consumed; typos must not silently fall back to
// defaults.
class StrictObject {
public:
    StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object())
            throw std::invalid_argument("config: " + path_ + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw std::invalid_argument("config: bad value at " + path_ + "." + key + ": " +
                                        e.what());
        }
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    ~StrictObject() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key()))
                throw std::invalid_argument("config: unknown key " + path_ + "." + it.key());
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Backend backend_from_string(const std::string& s) {
    if (s == "monte_carlo" || s == "mc") return Backend::monte_carlo;
    if (s == "rate") return Backend::rate;
    throw std::invalid_argument("config: engine.backend must be 'monte_carlo' or 'rate'");
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "shot_gaussian") return NoiseKind::shot_gaussian;
    if (s == "random_walk") return NoiseKind::random_walk;
    if (s == "constant") return NoiseKind::constant;
    throw std::invalid_argument("config: noise.process must be 'shot_gaussian', "
                                "'random_walk' or 'constant'");
}

}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    cfg.noise.anchors = {{1.0, 1.43e-3}, {0.1, 0.71e-3}};
    cfg.coherence.wait_times_s = {};  // filled per command when empty
    return cfg;
}

void RunConfig::validate() const {
    trap.validate();
    if (levels.zeeman_shift_hz <= 0)
        throw std::invalid_argument("levels.zeeman_shift_hz must be > 0");
    if (engine.n_max < 4) throw std::invalid_argument("engine.n_max must be >= 4");
    if (engine.trajectories < 1)
        throw std::invalid_argument("engine.trajectories must be >= 1");
    if (engine.threads < 1) throw std::invalid_argument("engine.threads must be >= 1");
    if (engine.leakage_tolerance <= 0)
        throw std::invalid_argument("engine.leakage_tolerance must be > 0");
    if (schedule.pulses_per_burst < 0)
        throw std::invalid_argument("schedule.pulses_per_burst must be >= 0");
    if (schedule.period_s <= 0) throw std::invalid_argument("schedule.period_s must be > 0");
    if (schedule.heating_rate_qps < 0)
        throw std::invalid_argument("schedule.heating_rate_qps must be >= 0");
    if (schedule.target_radial_mode < 0 || schedule.target_radial_mode >= trap.n_ions)
        throw std::invalid_argument("schedule.target_radial_mode out of range");
    if (schedule.coolant_ion < 0 || schedule.coolant_ion >= trap.n_ions)
        throw std::invalid_argument("schedule.coolant_ion out of range");
    if (schedule.shelve_transfer_scale < 0 || schedule.shelve_transfer_scale > 1)
        throw std::invalid_argument("schedule.shelve_transfer_scale must be in [0,1]");
    if (coherence.duty < 0 || coherence.duty >= 1)
        throw std::invalid_argument("coherence.duty must be in [0,1)");
    if (doppler_temperature_k < 0)
        throw std::invalid_argument("doppler_temperature_k must be >= 0");
}

RunConfig config_from_json(const json& root) {
    const json* jp = &root;
    if (root.is_object() && root.contains("config")) {
        // run manifest: unwrap the resolved config
        jp = &root.at("config");
    }
    const json& j = *jp;

    RunConfig cfg = RunConfig::defaults();
    StrictObject top(j, "$");

    if (top.has("trap")) {
        StrictObject o(top.raw("trap"), "$.trap");
        o.get("n_ions", cfg.trap.n_ions);
        o.get("axial_com_freq_hz", cfg.trap.axial_com_freq_hz);
        o.get("radial_com_freq_hz", cfg.trap.radial_com_freq_hz);
        o.get("ion_mass_kg", cfg.trap.ion_mass_kg);
        o.get("laser_wavelength_m", cfg.trap.laser_wavelength_m);
        o.get("axial_projection", cfg.trap.axial_projection);
        o.get("radial_projection", cfg.trap.radial_projection);
    }
    if (top.has("levels")) {
        StrictObject o(top.raw("levels"), "$.levels");
        o.get("zeeman_shift_hz", cfg.levels.zeeman_shift_hz);
        o.get("d_zeeman_ratio", cfg.levels.d_zeeman_ratio);
        o.get("repump_branching_weights", cfg.levels.repump_branching_weights);
    }
    if (top.has("engine")) {
        StrictObject o(top.raw("engine"), "$.engine");
        std::string backend;
        o.get("backend", backend);
        if (!backend.empty()) cfg.engine.backend = backend_from_string(backend);
        o.get("n_max", cfg.engine.n_max);
        o.get("trajectories", cfg.engine.trajectories);
        o.get("master_seed", cfg.engine.master_seed);
        o.get("threads", cfg.engine.threads);
        o.get("leakage_tolerance", cfg.engine.leakage_tolerance);
        o.get("repump_recoil", cfg.engine.repump_recoil);
        o.get("repump_scatter_events", cfg.engine.repump_scatter_events);
        o.get("axial_sideband_channels", cfg.engine.axial_sideband_channels);
        o.get("doppler_temperature_k", cfg.doppler_temperature_k);
    }
    if (top.has("schedule")) {
        StrictObject o(top.raw("schedule"), "$.schedule");
        o.get("target_radial_mode", cfg.schedule.target_radial_mode);
        o.get("coolant_ion", cfg.schedule.coolant_ion);
        o.get("pulses_per_burst", cfg.schedule.pulses_per_burst);
        o.get("period_s", cfg.schedule.period_s);
        o.get("total_duration_s", cfg.schedule.total_duration_s);
        o.get("heating_rate_qps", cfg.schedule.heating_rate_qps);
        o.get("initial_nbar", cfg.schedule.initial_nbar);
        o.get("n_cycles", cfg.schedule.n_cycles);
        o.get("shelve_plus_s", cfg.schedule.pi_times.shelve_plus_s);
        o.get("shelve_minus_s", cfg.schedule.pi_times.shelve_minus_s);
        o.get("raman_s", cfg.schedule.pi_times.raman_s);
        o.get("repump_s", cfg.schedule.pi_times.repump_s);
        o.get("shelve_transfer_scale", cfg.schedule.shelve_transfer_scale);
        o.get("raman_transfer_scale", cfg.schedule.raman_transfer_scale);
        o.get("participation_floor", cfg.schedule.participation_floor);
    }
    if (top.has("noise")) {
        StrictObject o(top.raw("noise"), "$.noise");
        std::string kind;
        o.get("process", kind);
        if (!kind.empty()) cfg.noise.kind = noise_kind_from_string(kind);
        o.get("sigma", cfg.noise.sigma);
        o.get("sample_period_s", cfg.noise.sample_period_s);
        if (o.has("anchors")) {
            cfg.noise.anchors.clear();
            int k = 0;
            for (const auto& a : o.raw("anchors")) {
                StrictObject ao(a, "$.noise.anchors[" + std::to_string(k++) + "]");
                AllanPoint p{0.0, 0.0};
                ao.get("tau_s", p.tau_s);
                ao.get("sigma", p.sigma);
                cfg.noise.anchors.push_back(p);
            }
        }
    }
    if (top.has("budget")) {
        StrictObject o(top.raw("budget"), "$.budget");
        if (o.has("terms")) {
            cfg.budget.terms.clear();
            int k = 0;
            for (const auto& t : o.raw("terms")) {
                StrictObject to(t, "$.budget.terms[" + std::to_string(k++) + "]");
                ShiftTerm term{"", 0.0, 0.0};
                to.get("label", term.label);
                to.get("rabi_hz", term.rabi_hz);
                to.get("detuning_hz", term.detuning_hz);
                cfg.budget.terms.push_back(term);
            }
        }
    }
    if (top.has("coherence")) {
        StrictObject o(top.raw("coherence"), "$.coherence");
        o.get("duty", cfg.coherence.duty);
        o.get("sigma_eps", cfg.coherence.sigma_eps);
        o.get("wait_times_s", cfg.coherence.wait_times_s);
        o.get("shots", cfg.coherence.shots);
        o.get("background_tau_s", cfg.coherence.background_tau_s);
        o.get("rabi_factors", cfg.coherence.rabi_factors);
        o.get("detuning_factors", cfg.coherence.detuning_factors);
    }
    if (top.has("scan")) {
        StrictObject o(top.raw("scan"), "$.scan");
        o.get("offsets_hz", cfg.scan.offsets_hz);
        o.get("probe_rabi_hz", cfg.scan.probe_rabi_hz);
        o.get("probe_duration_s", cfg.scan.probe_duration_s);
        o.get("state_nbar", cfg.scan.state_nbar);
        o.get("probe_ion", cfg.scan.probe_ion);
    }
    if (top.has("probe")) {
        StrictObject o(top.raw("probe"), "$.probe");
        o.get("mode", cfg.probe.mode);
        o.get("rabi_hz", cfg.probe.rabi_hz);
        o.get("pi_time_fraction", cfg.probe.pi_time_fraction);
        o.get("state_nbar", cfg.probe.state_nbar);
        o.get("probe_ion", cfg.probe.probe_ion);
    }
    if (top.has("scatter")) {
        StrictObject o(top.raw("scatter"), "$.scatter");
        o.get("wavelength_m", cfg.scatter.wavelength_m);
        o.get("spacing_m", cfg.scatter.spacing_m);
        o.get("pulses_per_s", cfg.scatter.pulses_per_s);
    }
    if (top.has("allan")) {
        StrictObject o(top.raw("allan"), "$.allan");
        o.get("taus_s", cfg.allan.taus_s);
        o.get("normalized", cfg.allan.normalized);
        o.get("overlapping", cfg.allan.overlapping);
    }
    if (top.has("sweep")) {
        StrictObject o(top.raw("sweep"), "$.sweep");
        o.get("pulse_counts", cfg.sweep.pulse_counts);
        o.get("runs", cfg.sweep.runs);
    }
    if (top.has("output")) {
        StrictObject o(top.raw("output"), "$.output");
        o.get("dir", cfg.output.dir);
    }

    cfg.validate();
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["trap"] = {{"n_ions", cfg.trap.n_ions},
                 {"axial_com_freq_hz", cfg.trap.axial_com_freq_hz},
                 {"radial_com_freq_hz", cfg.trap.radial_com_freq_hz},
                 {"ion_mass_kg", cfg.trap.ion_mass_kg},
                 {"laser_wavelength_m", cfg.trap.laser_wavelength_m},
                 {"axial_projection", cfg.trap.axial_projection},
                 {"radial_projection", cfg.trap.radial_projection}};
    j["levels"] = {{"zeeman_shift_hz", cfg.levels.zeeman_shift_hz},
                   {"d_zeeman_ratio", cfg.levels.d_zeeman_ratio},
                   {"repump_branching_weights", cfg.levels.repump_branching_weights}};
    j["engine"] = {{"backend", cfg.engine.backend == Backend::monte_carlo ? "monte_carlo"
                                                                          : "rate"},
                   {"n_max", cfg.engine.n_max},
                   {"trajectories", cfg.engine.trajectories},
                   {"master_seed", cfg.engine.master_seed},
                   {"threads", cfg.engine.threads},
                   {"leakage_tolerance", cfg.engine.leakage_tolerance},
                   {"repump_recoil", cfg.engine.repump_recoil},
                   {"repump_scatter_events", cfg.engine.repump_scatter_events},
                   {"axial_sideband_channels", cfg.engine.axial_sideband_channels},
                   {"doppler_temperature_k", cfg.doppler_temperature_k}};
    j["schedule"] = {{"target_radial_mode", cfg.schedule.target_radial_mode},
                     {"coolant_ion", cfg.schedule.coolant_ion},
                     {"pulses_per_burst", cfg.schedule.pulses_per_burst},
                     {"period_s", cfg.schedule.period_s},
                     {"total_duration_s", cfg.schedule.total_duration_s},
                     {"heating_rate_qps", cfg.schedule.heating_rate_qps},
                     {"initial_nbar", cfg.schedule.initial_nbar},
                     {"n_cycles", cfg.schedule.n_cycles},
                     {"shelve_plus_s", cfg.schedule.pi_times.shelve_plus_s},
                     {"shelve_minus_s", cfg.schedule.pi_times.shelve_minus_s},
                     {"raman_s", cfg.schedule.pi_times.raman_s},
                     {"repump_s", cfg.schedule.pi_times.repump_s},
                     {"shelve_transfer_scale", cfg.schedule.shelve_transfer_scale},
                     {"raman_transfer_scale", cfg.schedule.raman_transfer_scale},
                     {"participation_floor", cfg.schedule.participation_floor}};
    json anchors = json::array();
    for (const auto& a : cfg.noise.anchors)
        anchors.push_back({{"tau_s", a.tau_s}, {"sigma", a.sigma}});
    const char* noise_name = cfg.noise.kind == NoiseKind::shot_gaussian ? "shot_gaussian"
                             : cfg.noise.kind == NoiseKind::constant    ? "constant"
                                                                        : "random_walk";
    j["noise"] = {{"process", noise_name},
                  {"sigma", cfg.noise.sigma},
                  {"sample_period_s", cfg.noise.sample_period_s},
                  {"anchors", anchors}};
    json terms = json::array();
    for (const auto& t : cfg.budget.terms)
        terms.push_back({{"label", t.label},
                         {"rabi_hz", t.rabi_hz},
                         {"detuning_hz", t.detuning_hz}});
    j["budget"] = {{"terms", terms}};
    j["coherence"] = {{"duty", cfg.coherence.duty},
                      {"sigma_eps", cfg.coherence.sigma_eps},
                      {"wait_times_s", cfg.coherence.wait_times_s},
                      {"shots", cfg.coherence.shots},
                      {"background_tau_s", cfg.coherence.background_tau_s},
                      {"rabi_factors", cfg.coherence.rabi_factors},
                      {"detuning_factors", cfg.coherence.detuning_factors}};
    j["scan"] = {{"offsets_hz", cfg.scan.offsets_hz},
                 {"probe_rabi_hz", cfg.scan.probe_rabi_hz},
                 {"probe_duration_s", cfg.scan.probe_duration_s},
                 {"state_nbar", cfg.scan.state_nbar},
                 {"probe_ion", cfg.scan.probe_ion}};
    j["probe"] = {{"mode", cfg.probe.mode},
                  {"rabi_hz", cfg.probe.rabi_hz},
                  {"pi_time_fraction", cfg.probe.pi_time_fraction},
                  {"state_nbar", cfg.probe.state_nbar},
                  {"probe_ion", cfg.probe.probe_ion}};
    j["scatter"] = {{"wavelength_m", cfg.scatter.wavelength_m},
                    {"spacing_m", cfg.scatter.spacing_m},
                    {"pulses_per_s", cfg.scatter.pulses_per_s}};
    j["allan"] = {{"taus_s", cfg.allan.taus_s},
                  {"normalized", cfg.allan.normalized},
                  {"overlapping", cfg.allan.overlapping}};
    j["sweep"] = {{"pulse_counts", cfg.sweep.pulse_counts}, {"runs", cfg.sweep.runs}};
    j["output"] = {{"dir", cfg.output.dir}};
    return j;
}

}  // namespace zcool

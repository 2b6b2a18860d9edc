#pragma once

#include <string>
#include <vector>

#include "zcool/coherence.hpp"
#include "zcool/protocol.hpp"

#include <nlohmann/json_fwd.hpp>

namespace zcool {

using json = nlohmann::json;

// Scheduling + protocol knobs for the cooling commands.
struct ScheduleConfig {
    int target_radial_mode = 0;
    int coolant_ion = 0;
    int pulses_per_burst = 10;
    double period_s = 0.01;
    double total_duration_s = 0.5;
    double heating_rate_qps = 33.3;
    double initial_nbar = 0.0;
    int n_cycles = 100;  // for `cool`
    PiTimes pi_times;
    double shelve_transfer_scale = 1.0;
    double raman_transfer_scale = 1.0;
    double participation_floor = 0.05;
};

struct CoherenceConfig {
    double duty = 0.70;
    double sigma_eps = 1.43e-3;
    std::vector<double> wait_times_s;
    int shots = 400;
    double background_tau_s = 0.0;
    std::vector<double> rabi_factors{0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
    std::vector<double> detuning_factors{0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
};

struct ScanConfig {
    std::vector<double> offsets_hz;
    double probe_rabi_hz = 125e3;
    double probe_duration_s = 0.0;  // 0: use the Doppler pi-time of ion 0
    double state_nbar = 1.0;
    int probe_ion = 0;
};

struct ProbeConfig {
    int mode = 0;  // radial mode, paper order
    double rabi_hz = 125e3;
    double pi_time_fraction = 0.2;  // weak-probe duration as a fraction of the n=1 pi-time
    double state_nbar = 0.5;
    int probe_ion = 0;
};

struct ScatterConfig {
    double wavelength_m = 297e-9;
    double spacing_m = 5e-6;
    double pulses_per_s = 1000.0;
};

struct AllanConfig {
    std::vector<double> taus_s;
    bool normalized = false;
    bool overlapping = false;
};

struct SweepConfig {
    std::vector<int> pulse_counts{2, 4, 6, 8, 10, 12, 14, 16, 20, 25, 30};
    int runs = 5;
};

struct OutputConfig {
    std::string dir = "out";
};

struct RunConfig {
    TrapConfig trap;
    LevelConfig levels;
    EngineParams engine;
    double doppler_temperature_k = 4.7e-4;
    ScheduleConfig schedule;
    NoiseSpec noise;
    ShiftBudget budget = ShiftBudget::cooling_cycle_default();
    CoherenceConfig coherence;
    ScanConfig scan;
    ProbeConfig probe;
    ScatterConfig scatter;
    AllanConfig allan;
    SweepConfig sweep;
    OutputConfig output;

    // Desk-scale defaults for the figure-class experiments.
    static RunConfig defaults();

    void validate() const;
};

// Strict parser: unknown keys are rejected with their JSON path; a manifest
// (object with a "config" key) is accepted and unwrapped.
RunConfig config_from_json(const json& j);
RunConfig load_config_file(const std::string& path);
json config_to_json(const RunConfig& cfg);

}  // namespace zcool

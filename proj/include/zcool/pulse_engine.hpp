#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zcool/chain_modes.hpp"
#include "zcool/levels.hpp"
#include "zcool/rng.hpp"

namespace zcool {

enum class Backend { monte_carlo, rate };

enum class PulseKind { mw_pi, mw_pi_half, raman_two_tone, rsb_shelve, repump, idle };

struct PulseSpec {
    PulseKind kind = PulseKind::mw_pi;
    std::optional<int> target_ion;  // nullopt = all ions (global beam)
    InternalState from = qubit_zero();
    InternalState to = qubit_one();
    int sideband_mode = 0;   // index into the tracked radial modes
    int sideband_order = 0;  // 0 carrier, -1 first red, +1 first blue
    double rabi_hz = 0.0;    // carrier-scale Rabi frequency (ordinary Hz)
    double detuning_hz = 0.0;  // offset from the addressed transition + sideband
    double duration_s = 0.0;
    // Composite per-pulse transfer efficiency (SPAM, polarization, pointing);
    // 1 = ideal. Set by the protocol compiler from config, never by probes.
    double transfer_scale = 1.0;

    void validate(int n_ions, int n_tracked_modes) const;
};

struct HeatingModel {
    std::vector<double> rate_qps;  // quanta/s per tracked mode

    static HeatingModel none(int n_modes) { return HeatingModel{std::vector<double>(n_modes, 0.0)}; }
    static HeatingModel single(double rate) { return HeatingModel{{rate}}; }
};

// Motional context for the engine: the Fock-tracked radial modes plus the
// axial modes, which enter only as a hot thermal bath through the
// Debye-Waller factor on every quadrupole Rabi frequency.
struct TrackedModes {
    int n_ions = 1;
    std::vector<int> radial_index;     // indices into the radial ModeStructure
    std::vector<double> freq_hz;       // per tracked mode
    Eigen::MatrixXd eta;               // eta(ion, tracked mode)
    std::vector<double> axial_freq_hz;
    Eigen::MatrixXd axial_eta;         // eta(ion, axial mode)
    std::vector<double> axial_nbar;    // thermal occupation per axial mode

    int n_tracked() const { return static_cast<int>(freq_hz.size()); }
    int n_axial() const { return static_cast<int>(axial_freq_hz.size()); }
    // Mean Debye-Waller factor prod_k (1 - eta_k^2 (nbar_k + 1/2)) for one ion.
    double axial_dw_mean(int ion) const;
};

// Tracked modes for one target radial mode, axial spectators populated at the
// thermal occupations implied by doppler_temperature_k (0 disables them).
TrackedModes make_tracked_modes(const TrapConfig& trap, const ModeStructure& radial,
                                const ModeStructure& axial,
                                const std::vector<int>& radial_modes,
                                double doppler_temperature_k);

double thermal_nbar(double freq_hz, double temperature_k);

struct EngineParams {
    Backend backend = Backend::monte_carlo;
    int n_max = 40;
    int trajectories = 2000;
    uint64_t master_seed = 1;
    int threads = 1;
    double leakage_tolerance = 1e-3;  // max population in the top two Fock levels
    bool repump_recoil = false;
    int repump_scatter_events = 1;
    bool axial_sideband_channels = true;  // off-resonant axial-spectator sidebands
};

// One Monte-Carlo trajectory: internal labels, integer Fock indices for the
// tracked modes, axial spectator samples, and a deterministic RNG stream.
struct Trajectory {
    std::vector<int> internal;  // level index per ion
    std::vector<int> fock;      // per tracked mode
    std::vector<int> axial_n;   // per axial mode
    std::vector<double> phase;  // accumulated qubit phase per ion (rad)
    Rng rng;
};

// Joint state of the chain. MC mode holds an ensemble of trajectories; rate
// mode holds the exact probability table over one designated ion's internal
// levels x the Fock ladder (with the remaining ions factorized), and serves
// as the verification oracle.
class SystemState {
public:
    Backend backend = Backend::monte_carlo;
    int n_ions = 1;
    int n_max = 40;
    int threads = 1;

    // monte carlo
    std::vector<Trajectory> traj;

    // rate
    int joint_ion = 0;
    Eigen::MatrixXd joint;                // (kNumLevels, n_max+1)
    std::vector<Eigen::VectorXd> others;  // per non-joint ion: kNumLevels probabilities

    double total_probability() const;
    Eigen::VectorXd fock_distribution(int mode = 0) const;
    double mean_fock(int mode = 0) const;
    double mean_fock_stderr(int mode = 0) const;
    // probability of each internal level for one ion
    Eigen::VectorXd level_populations(int ion) const;
};

// Thermal initial state; every ion starts in `internal_init[i]`, and the
// tracked modes are thermal with the given means (truncated at n_max).
SystemState make_state(const TrackedModes& modes, const EngineParams& params,
                       const std::vector<InternalState>& internal_init,
                       const std::vector<double>& nbar_tracked, int joint_ion = 0);

// First-red-sideband Rabi frequency with the second-order axial
// Debye-Waller correction, multiplicative over all tracked axial modes:
// omega * eta_rad * sqrt(n) * prod_k (1 - eta_ax_k^2 (n_ax_k + 1/2)).
// Units follow `rabi` (Hz in, Hz out).
double effective_rsb_rabi(double rabi, double eta_rad,
                          const std::vector<double>& eta_axial, int n,
                          const std::vector<double>& n_axial);

// Second-order AC Stark shift sum_i rabi_i^2 / (4 detuning_i); ordinary-Hz
// in, ordinary-Hz out. Rejects any zero detuning.
double light_shift_hz(const std::vector<std::pair<double, double>>& rabi_detuning_hz);

class PulseEngine {
public:
    PulseEngine(LevelConfig levels, TrackedModes modes, EngineParams params);

    const TrackedModes& modes() const { return modes_; }
    const LevelConfig& levels() const { return levels_; }
    const EngineParams& params() const { return params_; }

    SystemState make_thermal_state(const std::vector<InternalState>& internal_init,
                                   const std::vector<double>& nbar_tracked,
                                   int joint_ion = 0) const;

    // Coherent drive pulses (MW, Raman two-tone, quadrupole shelving).
    void apply_drive(SystemState& state, const PulseSpec& pulse) const;
    // Dissipative repump through the bracket state.
    void apply_repump(SystemState& state, const PulseSpec& pulse) const;
    // Dispatch on pulse kind (idle applies nothing; use heating_step for time).
    void apply(SystemState& state, const PulseSpec& pulse) const;

    // Background heating: birth-death jump process with rates G(n+1) up and
    // G n down, so d<n>/dt = G exactly.
    void heating_step(SystemState& state, double dt, const HeatingModel& model) const;

private:
    struct Channel {
        int from_label;
        int to_label;
        int mode = -1;       // tracked mode whose Fock index changes
        int fock_delta = 0;
        int axial_mode = -1;  // spectator sideband bookkeeping (MC only)
        int axial_delta = 0;
        double detuning_hz = 0.0;
        double coupling = 0.0;  // dimensionless multiplier on 2*pi*rabi
    };

    void drive_trajectory(Trajectory& t, const PulseSpec& pulse) const;
    void drive_rate(SystemState& state, const PulseSpec& pulse) const;
    void repump_trajectory(Trajectory& t) const;
    void resample_axial(Trajectory& t) const;
    std::vector<Channel> quadrupole_channels(int label, const PulseSpec& pulse,
                                             const std::vector<int>& fock,
                                             const std::vector<double>& axial_occ,
                                             int ion) const;
    double channel_probability(const Channel& ch, double duration_s) const;
    void check_leakage(const SystemState& state) const;

    LevelConfig levels_;
    TrackedModes modes_;
    EngineParams params_;
};

}  // namespace zcool

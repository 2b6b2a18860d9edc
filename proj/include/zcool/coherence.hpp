#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace zcool {

struct NoiseTrace {
    std::vector<double> time_s;     // strictly increasing
    std::vector<double> amplitude;  // arbitrary units

    double duration_s() const { return time_s.empty() ? 0.0 : time_s.back() - time_s.front(); }
    void validate() const;
};

struct AllanPoint {
    double tau_s;
    double sigma;
};

struct AllanCurve {
    std::vector<AllanPoint> points;
    bool normalized = false;
};

// Two-sample Allan deviation over consecutive bins of width tau
// (non-overlapping by default; the overlapping estimator is available as an
// option). The normalized variant divides by the global mean amplitude.
AllanCurve allan_deviation(const NoiseTrace& trace, const std::vector<double>& taus,
                           bool normalized = false, bool overlapping = false);

struct ShiftTerm {
    std::string label;
    double rabi_hz;      // ordinary Hz (Omega / 2pi)
    double detuning_hz;  // ordinary Hz, nonzero
};

// Off-resonant transitions contributing to the data-qubit light shift during
// a cooling cycle.
struct ShiftBudget {
    std::vector<ShiftTerm> terms;

    // Total second-order shift  sum_i rabi_i^2 / (4 det_i)  in ordinary Hz.
    double total_shift_hz() const;
    ShiftBudget scaled(double rabi_factor, double detuning_factor) const;

    // Default budget for one cooling cycle: carrier and axial-COM-sideband
    // couplings once per shelving transition (two per cycle), with the
    // aggregate other-axial and radial sideband rows once, each at the near
    // and far Zeeman-branch detunings.
    static ShiftBudget cooling_cycle_default();
};

struct InfiniteCoherence : std::runtime_error {
    InfiniteCoherence()
        : std::runtime_error("sigma_eps = 0: coherence time is infinite") {}
};

// 1/e coherence time (wall-clock seconds) from the Gaussian decay
// exp(-(sigma^2/2) (pi S tau_on)^2), with the beam-on time divided by the
// cooling fraction (1 - duty). A single-term budget with duty = 0 reduces to
// 8 sqrt(2) Delta / (Omega^2 sigma).
double predict_coherence_time_s(const ShiftBudget& budget, double sigma_eps, double duty);

// --- noise synthesis -------------------------------------------------------

enum class NoiseKind { shot_gaussian, random_walk, constant };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::random_walk;
    // shot_gaussian: per-shot arm-difference deviation; constant: the static
    // fractional intensity error itself.
    double sigma = 1.43e-3;
    std::vector<AllanPoint> anchors;  // random_walk: Allan anchor points to match
    double sample_period_s = 0.01;    // noise update period (one cooling period)
};

// White plus random-walk process, per-period, calibrated so the synthesized
// trace's Allan deviation matches the anchor points.
struct CalibratedNoise {
    double white_sigma = 0.0;
    double walk_step_sigma = 0.0;
    double period_s = 0.01;
};

CalibratedNoise calibrate_noise(const NoiseSpec& spec, uint64_t seed);
NoiseTrace synthesize_trace(const CalibratedNoise& noise, double duration_s, uint64_t seed);

// --- spin echo -------------------------------------------------------------

// Beam-on bookkeeping for one cooling period during the Ramsey wait.
struct EchoSchedule {
    double period_s = 0.01;
    double burst_s = 2.95e-3;  // cooling burst per period

    double duty() const { return (period_s - burst_s) / period_s; }
};

struct EchoPoint {
    double tau_s;  // wait time (snapped to an even number of periods)
    double fidelity;
    double err;
};

struct EchoResult {
    std::vector<EchoPoint> points;
    std::optional<double> one_over_e_time_s;  // Gaussian fit; nullopt on fit failure
    double fit_amplitude = 1.0;
};

struct EchoConfig {
    int shots = 400;
    uint64_t seed = 1;
    double background_tau_s = 0.0;  // optional baseline Gaussian decay channel; 0 = off
};

// pi/2 - tau/2 (cooling + light-shift phase accrual) - pi - tau/2 - pi/2 on a
// data ion. Per shot the phase error is the budget shift times the
// intensity-error difference between the two arms.
EchoResult simulate_spin_echo(const EchoSchedule& schedule, const ShiftBudget& budget,
                              const NoiseSpec& noise, const std::vector<double>& wait_times_s,
                              const EchoConfig& cfg);

// --- decay-rate scalings ---------------------------------------------------

enum class SweepVariable { rabi, detuning };

struct DecayRatePoint {
    double value;  // multiplicative factor on the budget's Rabi or detuning
    double rate_per_s;
};

struct DecaySweepResult {
    std::vector<DecayRatePoint> points;
    std::vector<double> fit_coeffs;  // quadratic in value (rabi) or linear in 1/value
    double r2 = 0.0;
};

DecaySweepResult decay_rate_sweep(SweepVariable variable, const std::vector<double>& factors,
                                  const ShiftBudget& base, const NoiseSpec& noise,
                                  const EchoSchedule& schedule, const EchoConfig& cfg);

// --- scattered-photon bound -------------------------------------------------

struct ScatterResult {
    double photons_per_pulse;
    double photons_per_s;
};

// Upper bound on photons absorbed by a neighbor at distance `spacing` when
// each cooling pulse emits one photon at `wavelength`:
// N = 6 pi (lambda/2pi)^2 / (4 pi d^2).
ScatterResult scatter_absorption(double wavelength_m, double spacing_m,
                                 double pulses_per_s);

}  // namespace zcool

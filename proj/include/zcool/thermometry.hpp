#pragma once

#include <vector>

#include "zcool/protocol.hpp"

namespace zcool {

struct ProbeResult {
    double frequency_offset_hz = 0.0;
    std::vector<double> bright;      // per-ion shelving (bright) probability
    std::vector<double> bright_err;  // binomial error from the shot count
    int shots = 0;
};

struct NbarEstimate {
    double nbar;
    double err;
};

// Shelving detection: MW pi (all) -> probe -> MW pi (all); population left
// outside |0> is classified bright. The probe must drive an S -> D
// transition. The input state is copied; detection does not disturb it.
std::vector<double> simulate_shelving_detection(const SimContext& ctx, SystemState state,
                                                const PulseSpec& probe);

// One shelving detection per frequency offset; the template's detuning is
// replaced by each offset (relative to the |1> -> (D,1,0) carrier).
std::vector<ProbeResult> scan_spectrum(const SimContext& ctx, const SystemState& state,
                                       const std::vector<double>& offsets_hz,
                                       const PulseSpec& probe_template);

// Sideband-ratio thermometry: r = p_rsb / p_bsb, nbar = r / (1 - r), with
// first-order error propagation from the binomial input errors.
NbarEstimate ratio_nbar(double p_rsb, double p_bsb, int shots = 0);

// Probe builder: a global quadrupole pulse on |1> -> (D,1,0) at the given
// sideband of a tracked mode.
PulseSpec make_probe(const SimContext& ctx, int tracked_mode, int order, double rabi_hz,
                     double duration_s);

// pi-time calibrated against the thermal-mean sideband Rabi frequency at the
// given nbar (the "Doppler-cooled pi-time" convention for probes).
double doppler_pi_time(const SimContext& ctx, int ion, int tracked_mode, double nbar,
                       double rabi_hz);

}  // namespace zcool

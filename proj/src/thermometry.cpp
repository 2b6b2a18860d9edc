#include "zcool/thermometry.hpp"

#include <cmath>
#include <stdexcept>

namespace zcool {

std::vector<double> simulate_shelving_detection(const SimContext& ctx, SystemState state,
                                                const PulseSpec& probe) {
    if (probe.kind != PulseKind::rsb_shelve)
        throw std::invalid_argument(
            "simulate_shelving_detection: probe must drive an S -> D transition");

    PulseSpec mw;
    mw.kind = PulseKind::mw_pi;
    mw.from = qubit_zero();
    mw.to = qubit_one();

    ctx.engine.apply(state, mw);
    ctx.engine.apply(state, probe);
    ctx.engine.apply(state, mw);

    std::vector<double> bright(state.n_ions);
    for (int i = 0; i < state.n_ions; ++i)
        bright[i] = 1.0 - state.level_populations(i)[level_index(qubit_zero())];
    return bright;
}

std::vector<ProbeResult> scan_spectrum(const SimContext& ctx, const SystemState& state,
                                       const std::vector<double>& offsets_hz,
                                       const PulseSpec& probe_template) {
    std::vector<ProbeResult> out;
    out.reserve(offsets_hz.size());
    const int shots = state.backend == Backend::monte_carlo
                          ? static_cast<int>(state.traj.size())
                          : 0;
    for (double f : offsets_hz) {
        if (!std::isfinite(f))
            throw std::invalid_argument("scan_spectrum: offsets must be finite");
        PulseSpec probe = probe_template;
        probe.detuning_hz = f;
        ProbeResult r;
        r.frequency_offset_hz = f;
        r.bright = simulate_shelving_detection(ctx, state, probe);
        r.shots = shots;
        for (double p : r.bright)
            r.bright_err.push_back(shots > 0 ? std::sqrt(p * (1.0 - p) / shots) : 0.0);
        out.push_back(std::move(r));
    }
    return out;
}

NbarEstimate ratio_nbar(double p_rsb, double p_bsb, int shots) {
    if (p_rsb < 0.0 || p_bsb > 1.0)
        throw std::invalid_argument("ratio_nbar: probabilities must lie in [0,1]");
    if (p_rsb >= p_bsb)
        throw std::invalid_argument(
            "ratio_nbar: p_rsb >= p_bsb, the ratio estimator diverges (state too hot "
            "for the sideband-ratio method)");
    const double r = p_rsb / p_bsb;
    const double nbar = r / (1.0 - r);
    double err = 0.0;
    if (shots > 0) {
        const double s_r = std::sqrt(p_rsb * (1.0 - p_rsb) / shots);
        const double s_b = std::sqrt(p_bsb * (1.0 - p_bsb) / shots);
        const double dr = std::sqrt(s_r * s_r / (p_bsb * p_bsb) +
                                    r * r * s_b * s_b / (p_bsb * p_bsb));
        err = dr / ((1.0 - r) * (1.0 - r));
    }
    return {nbar, err};
}

PulseSpec make_probe(const SimContext& ctx, int tracked_mode, int order, double rabi_hz,
                     double duration_s) {
    PulseSpec p;
    p.kind = PulseKind::rsb_shelve;
    p.target_ion = std::nullopt;
    p.from = qubit_one();
    p.to = d_state(0);
    p.sideband_mode = tracked_mode;
    p.sideband_order = order;
    p.rabi_hz = rabi_hz;
    p.duration_s = duration_s;
    p.validate(ctx.trap.n_ions, ctx.engine.modes().n_tracked());
    return p;
}

double doppler_pi_time(const SimContext& ctx, int ion, int tracked_mode, double nbar,
                       double rabi_hz) {
    const auto& modes = ctx.engine.modes();
    const double eta = std::abs(modes.eta(ion, tracked_mode));
    const double dw = modes.axial_dw_mean(ion);
    const double neff = std::max(nbar, 1.0);
    const double omega_eff = rabi_hz * eta * std::sqrt(neff) * dw;
    return 1.0 / (2.0 * omega_eff);
}

}  // namespace zcool

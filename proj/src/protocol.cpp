#include "zcool/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace zcool {

double thermal_mean_sqrt_n(double nbar) {
    if (nbar <= 0.0) return 0.0;
    const double q = nbar / (nbar + 1.0);
    double sum = 0.0, weight = 1.0 / (nbar + 1.0), total = 0.0;
    for (int n = 0; n < 4000; ++n) {
        sum += weight * std::sqrt(static_cast<double>(n));
        total += weight;
        weight *= q;
        if (weight < 1e-15) break;
    }
    return sum / total;
}

int SimContext::tracked_of_radial(int radial_mode) const {
    const auto& idx = engine.modes().radial_index;
    for (int m = 0; m < static_cast<int>(idx.size()); ++m)
        if (idx[m] == radial_mode) return m;
    throw std::invalid_argument("radial mode " + std::to_string(radial_mode) +
                                " is not in the tracked-mode set");
}

SimContext make_context(const TrapConfig& trap, const LevelConfig& levels,
                        const EngineParams& params,
                        const std::vector<int>& tracked_radial_modes,
                        double doppler_temperature_k) {
    trap.validate();
    ModeStructure radial = normal_modes(trap, Axis::radial);
    ModeStructure axial = normal_modes(trap, Axis::axial);
    TrackedModes tracked = make_tracked_modes(trap, radial, axial, tracked_radial_modes,
                                              doppler_temperature_k);
    return SimContext{levels, trap, std::move(radial), std::move(axial),
                      PulseEngine(levels, std::move(tracked), params)};
}

PulseProgram compile_prep(const SimContext& ctx, int coolant,
                          const ProtocolParams& params) {
    if (coolant < 0 || coolant >= ctx.trap.n_ions)
        throw std::invalid_argument("compile_prep: coolant index out of range");

    PulseSpec mw;
    mw.kind = PulseKind::mw_pi;
    mw.from = qubit_zero();
    mw.to = qubit_one();

    PulseSpec raman;
    raman.kind = PulseKind::raman_two_tone;
    raman.target_ion = coolant;
    raman.from = qubit_one();
    raman.to = s_zeeman(+1);
    raman.duration_s = params.pi_times.raman_s;
    raman.rabi_hz = 1.0 / (2.0 * params.pi_times.raman_s);
    raman.transfer_scale = params.raman_transfer_scale;

    return {mw, raman, mw};
}

CoolingCycle compile_cycle(const SimContext& ctx, int radial_mode, int coolant,
                           const ProtocolParams& params) {
    if (coolant < 0 || coolant >= ctx.trap.n_ions)
        throw std::invalid_argument("compile_cycle: coolant index out of range");
    const int tracked = ctx.tracked_of_radial(radial_mode);
    const auto& modes = ctx.engine.modes();

    const double b = std::abs(ctx.radial.participation(coolant, radial_mode));
    if (b <= params.participation_floor) {
        std::ostringstream msg;
        msg << "compile_cycle: ion " << coolant << " has participation " << b
            << " in radial mode " << radial_mode << " (below floor "
            << params.participation_floor << "); usable coolant ions:";
        std::vector<std::pair<double, int>> usable;
        for (int i = 0; i < ctx.trap.n_ions; ++i) {
            const double bi = std::abs(ctx.radial.participation(i, radial_mode));
            if (bi > params.participation_floor) usable.emplace_back(bi, i);
        }
        std::sort(usable.rbegin(), usable.rend());
        for (const auto& [bi, i] : usable) msg << " ion" << i << " (" << bi << ")";
        throw std::invalid_argument(msg.str());
    }

    const double eta = std::abs(modes.eta(coolant, tracked));
    const double dw = modes.axial_dw_mean(coolant);
    const double sqrt_ref = params.calibration_nbar <= 1.0
                                ? 1.0
                                : thermal_mean_sqrt_n(params.calibration_nbar);

    auto shelve = [&](const InternalState& from, const InternalState& to, double t) {
        PulseSpec p;
        p.kind = PulseKind::rsb_shelve;
        p.target_ion = std::nullopt;  // the 435 nm beam is global
        p.from = from;
        p.to = to;
        p.sideband_mode = tracked;
        p.sideband_order = -1;
        p.duration_s = t;
        // pi at the calibration reference with the thermal-mean axial correction
        p.rabi_hz = 1.0 / (2.0 * t * eta * sqrt_ref * dw);
        p.transfer_scale = params.shelve_transfer_scale;
        return p;
    };

    CoolingCycle cycle;
    cycle.radial_mode = radial_mode;
    cycle.coolant = coolant;
    cycle.shelve_plus = shelve(s_zeeman(+1), d_state(-1), params.pi_times.shelve_plus_s);
    cycle.shelve_minus = shelve(s_zeeman(-1), d_state(+1), params.pi_times.shelve_minus_s);
    if (params.shared_shelve_rabi)
        cycle.shelve_minus.rabi_hz = cycle.shelve_plus.rabi_hz;

    cycle.raman.kind = PulseKind::raman_two_tone;
    cycle.raman.target_ion = coolant;
    cycle.raman.from = qubit_one();
    cycle.raman.to = s_zeeman(+1);
    cycle.raman.duration_s = params.pi_times.raman_s;
    cycle.raman.rabi_hz = 1.0 / (2.0 * params.pi_times.raman_s);
    cycle.raman.transfer_scale = params.raman_transfer_scale;

    cycle.repump.kind = PulseKind::repump;
    cycle.repump.duration_s = params.pi_times.repump_s;
    return cycle;
}

PulseProgram compile_program(const SimContext& ctx, int radial_mode, int coolant,
                             int n_cycles, const ProtocolParams& params) {
    PulseProgram prog = compile_prep(ctx, coolant, params);
    const CoolingCycle cycle = compile_cycle(ctx, radial_mode, coolant, params);
    for (int c = 0; c < n_cycles; ++c) {
        prog.push_back(cycle.shelve_plus);
        prog.push_back(cycle.shelve_minus);
        prog.push_back(cycle.raman);
        prog.push_back(cycle.repump);
    }
    return prog;
}

namespace {

void apply_cycle(const SimContext& ctx, SystemState& state, const CoolingCycle& cycle,
                 const HeatingModel* heating) {
    const PulseSpec* order[4] = {&cycle.shelve_plus, &cycle.shelve_minus, &cycle.raman,
                                 &cycle.repump};
    for (const PulseSpec* p : order) {
        if (heating) ctx.engine.heating_step(state, p->duration_s, *heating);
        ctx.engine.apply(state, *p);
    }
}

}  // namespace

std::vector<CyclePoint> run_cooling(const SimContext& ctx, SystemState& state,
                                    const CoolingCycle& cycle, int n_cycles,
                                    const HeatingModel* heating) {
    if (n_cycles < 1) throw std::invalid_argument("run_cooling: n_cycles must be >= 1");
    const int tracked = ctx.tracked_of_radial(cycle.radial_mode);
    std::vector<CyclePoint> out;
    out.reserve(n_cycles + 1);
    out.push_back({0, state.mean_fock(tracked), state.mean_fock_stderr(tracked)});
    for (int c = 1; c <= n_cycles; ++c) {
        apply_cycle(ctx, state, cycle, heating);
        out.push_back({c, state.mean_fock(tracked), state.mean_fock_stderr(tracked)});
    }
    return out;
}

double duty_cycle(const CoolingSchedule& schedule, const CoolingCycle& cycle) {
    const double burst = schedule.pulses_per_burst * cycle.cycle_time_s();
    if (burst > schedule.period_s)
        throw std::invalid_argument("duty_cycle: cooling burst (" + std::to_string(burst) +
                                    " s) exceeds the period (" +
                                    std::to_string(schedule.period_s) + " s)");
    return (schedule.period_s - burst) / schedule.period_s;
}

SuppressionResult run_suppression(const SimContext& ctx, const CoolingSchedule& schedule,
                                  const HeatingModel& heating, SystemState state,
                                  const ProtocolParams& params) {
    const CoolingCycle cycle =
        compile_cycle(ctx, schedule.target_mode, schedule.coolant_ion, params);
    const double burst = schedule.pulses_per_burst * cycle.cycle_time_s();
    if (burst > schedule.period_s)
        throw std::invalid_argument("run_suppression: burst longer than period");
    const int tracked = ctx.tracked_of_radial(schedule.target_mode);

    for (const auto& p : compile_prep(ctx, schedule.coolant_ion, params))
        ctx.engine.apply(state, p);

    SuppressionResult res;
    res.points.push_back({0.0, state.mean_fock(tracked), state.mean_fock_stderr(tracked)});

    const int n_periods = static_cast<int>(std::round(schedule.total_duration_s /
                                                      schedule.period_s));
    std::vector<double> series{res.points.back().nbar};
    for (int k = 1; k <= n_periods; ++k) {
        for (int c = 0; c < schedule.pulses_per_burst; ++c)
            apply_cycle(ctx, state, cycle, &heating);
        ctx.engine.heating_step(state, schedule.period_s - burst, heating);
        const double nb = state.mean_fock(tracked);
        res.points.push_back({k * schedule.period_s, nb, state.mean_fock_stderr(tracked)});
        series.push_back(nb);

        // steady state: consecutive five-period window means within 5%
        if (!res.steady_state_time_s && k >= 10) {
            double w1 = 0, w2 = 0;
            for (int j = 0; j < 5; ++j) {
                w1 += series[k - 9 + j];
                w2 += series[k - 4 + j];
            }
            w1 /= 5;
            w2 /= 5;
            if (std::abs(w2 - w1) < 0.05 * std::max(std::abs(w1), 1e-3))
                res.steady_state_time_s = k * schedule.period_s;
        }
    }

    // steady value: mean over the trailing quarter (at least 5 periods)
    const int tail = std::max(5, n_periods / 4);
    const int start = std::max(1, n_periods + 1 - tail);
    double sum = 0.0, sq = 0.0;
    int cnt = 0;
    for (int k = start; k <= n_periods; ++k) {
        sum += series[k];
        sq += series[k] * series[k];
        ++cnt;
    }
    res.steady_nbar = sum / cnt;
    const double var = std::max(0.0, sq / cnt - res.steady_nbar * res.steady_nbar);
    res.steady_nbar_err = std::sqrt(var / cnt) + res.points.back().nbar_err;
    return res;
}

SweepResult sweep_steady_state(const SimContext& ctx, const std::vector<int>& pulse_counts,
                               double period_s, const HeatingModel& heating,
                               const CoolingSchedule& base, const ProtocolParams& params,
                               int runs, double initial_nbar) {
    if (runs < 1) throw std::invalid_argument("sweep_steady_state: runs must be >= 1");
    SweepResult out;
    const CoolingCycle cycle = compile_cycle(ctx, base.target_mode, base.coolant_ion, params);
    for (size_t idx = 0; idx < pulse_counts.size(); ++idx) {
        const int pulses = pulse_counts[idx];
        CoolingSchedule sched = base;
        sched.pulses_per_burst = pulses;
        sched.period_s = period_s;
        if (pulses == 0)
            throw std::invalid_argument(
                "sweep_steady_state: zero cooling pulses never reach a steady state "
                "(nbar grows without bound)");
        std::vector<double> vals;
        for (int r = 0; r < runs; ++r) {
            EngineParams p = ctx.engine.params();
            p.master_seed = derive_seed(p.master_seed, idx * 1000 + r + 1);
            PulseEngine eng(ctx.levels, ctx.engine.modes(), p);
            SimContext local{ctx.levels, ctx.trap, ctx.radial, ctx.axial, eng};
            std::vector<InternalState> init(ctx.trap.n_ions, qubit_zero());
            SystemState st = eng.make_thermal_state(init, {initial_nbar});
            vals.push_back(
                run_suppression(local, sched, heating, std::move(st), params).steady_nbar);
        }
        const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / runs;
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var = runs > 1 ? var / (runs - 1) : 0.0;
        out.points.push_back({pulses, duty_cycle(sched, cycle), mean,
                              std::sqrt(var / std::max(1, runs))});
    }
    return out;
}

}  // namespace zcool

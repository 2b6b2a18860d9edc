#include "zcool/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "zcool/thermometry.hpp"

namespace zcool {

namespace {

using Clock = std::chrono::steady_clock;

std::string manifest_json(const std::string& command, const RunConfig& cfg,
                          double wall_time_s) {
    json m;
    m["command"] = command;
    m["version"] = version_string();
    m["master_seed"] = cfg.engine.master_seed;
    m["wall_time_s"] = wall_time_s;
    m["config"] = config_to_json(cfg);
    return m.dump(2) + "\n";
}

ProtocolParams protocol_params(const RunConfig& cfg) {
    ProtocolParams p;
    p.pi_times = cfg.schedule.pi_times;
    p.shelve_transfer_scale = cfg.schedule.shelve_transfer_scale;
    p.raman_transfer_scale = cfg.schedule.raman_transfer_scale;
    p.participation_floor = cfg.schedule.participation_floor;
    return p;
}

SimContext context_for(const RunConfig& cfg, const std::vector<int>& tracked) {
    return make_context(cfg.trap, cfg.levels, cfg.engine, tracked,
                        cfg.doppler_temperature_k);
}

SystemState initial_state(const SimContext& ctx, const RunConfig& cfg, double nbar,
                          int joint_ion) {
    std::vector<InternalState> init(cfg.trap.n_ions, qubit_zero());
    std::vector<double> nbars(ctx.engine.modes().n_tracked(), nbar);
    return ctx.engine.make_thermal_state(init, nbars, joint_ion);
}

EchoSchedule echo_schedule(const RunConfig& cfg) {
    const double cycle = cfg.schedule.pi_times.shelve_plus_s +
                         cfg.schedule.pi_times.shelve_minus_s +
                         cfg.schedule.pi_times.raman_s + cfg.schedule.pi_times.repump_s;
    return {cfg.schedule.period_s, cfg.schedule.pulses_per_burst * cycle};
}

}  // namespace

CommandResult run_modes(const RunConfig& cfg) {
    const auto start = Clock::now();
    const auto positions = equilibrium_positions(cfg.trap);
    const auto radial = normal_modes(cfg.trap, Axis::radial);
    const auto axial = normal_modes(cfg.trap, Axis::axial);

    auto mode_block = [&](const ModeStructure& m, Axis axis) {
        json out = json::array();
        for (size_t k = 0; k < m.frequencies_hz.size(); ++k) {
            json rec;
            rec["index"] = k;
            rec["name"] = mode_name(axis, static_cast<int>(k), cfg.trap.n_ions);
            rec["frequency_hz"] = m.frequencies_hz[k];
            json b = json::array(), eta = json::array();
            for (int i = 0; i < cfg.trap.n_ions; ++i) {
                b.push_back(m.participation(i, static_cast<int>(k)));
                eta.push_back(m.lamb_dicke(i, static_cast<int>(k)));
            }
            rec["participation"] = b;
            rec["lamb_dicke"] = eta;
            out.push_back(rec);
        }
        return out;
    };

    json doc;
    doc["positions"] = positions;
    doc["radial"] = mode_block(radial, Axis::radial);
    doc["axial"] = mode_block(axial, Axis::axial);

    CommandResult res;
    res.files["modes.json"] = doc.dump(2) + "\n";
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    res.files["manifest.json"] = manifest_json("modes", cfg, wall);
    return res;
}

CommandResult run_cool(const RunConfig& cfg) {
    const auto start = Clock::now();
    SimContext ctx = context_for(cfg, {cfg.schedule.target_radial_mode});
    const auto params = protocol_params(cfg);
    const auto cycle = compile_cycle(ctx, cfg.schedule.target_radial_mode,
                                     cfg.schedule.coolant_ion, params);

    double nbar0 = cfg.schedule.initial_nbar;
    if (nbar0 <= 0.0)
        nbar0 = thermal_nbar(ctx.radial.frequencies_hz[cfg.schedule.target_radial_mode],
                             cfg.doppler_temperature_k);
    SystemState state = initial_state(ctx, cfg, nbar0, cfg.schedule.coolant_ion);
    for (const auto& p : compile_prep(ctx, cfg.schedule.coolant_ion, params))
        ctx.engine.apply(state, p);

    HeatingModel heating = HeatingModel::single(cfg.schedule.heating_rate_qps);
    const auto points = run_cooling(ctx, state, cycle, cfg.schedule.n_cycles,
                                    cfg.schedule.heating_rate_qps > 0 ? &heating : nullptr);

    CsvWriter csv({"cycle", "nbar", "nbar_err"});
    for (const auto& p : points)
        csv.row({static_cast<double>(p.cycle), p.nbar, p.nbar_err});

    CommandResult res;
    res.files["cool.csv"] = csv.str();
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    res.files["manifest.json"] = manifest_json("cool", cfg, wall);
    return res;
}

CommandResult run_suppress(const RunConfig& cfg) {
    const auto start = Clock::now();
    SimContext ctx = context_for(cfg, {cfg.schedule.target_radial_mode});
    const auto params = protocol_params(cfg);

    CoolingSchedule sched;
    sched.pulses_per_burst = cfg.schedule.pulses_per_burst;
    sched.period_s = cfg.schedule.period_s;
    sched.total_duration_s = cfg.schedule.total_duration_s;
    sched.target_mode = cfg.schedule.target_radial_mode;
    sched.coolant_ion = cfg.schedule.coolant_ion;

    SystemState state =
        initial_state(ctx, cfg, cfg.schedule.initial_nbar, cfg.schedule.coolant_ion);
    const auto result =
        run_suppression(ctx, sched, HeatingModel::single(cfg.schedule.heating_rate_qps),
                        std::move(state), params);

    CsvWriter csv({"time_s", "nbar", "nbar_err"});
    for (const auto& p : result.points) csv.row({p.time_s, p.nbar, p.nbar_err});

    json summary;
    summary["steady_state_nbar"] = result.steady_nbar;
    summary["steady_state_nbar_err"] = result.steady_nbar_err;
    if (result.steady_state_time_s)
        summary["steady_state_time_s"] = *result.steady_state_time_s;

    CommandResult res;
    res.files["suppress.csv"] = csv.str();
    res.files["suppress_summary.json"] = summary.dump(2) + "\n";
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    res.files["manifest.json"] = manifest_json("suppress", cfg, wall);
    return res;
}

CommandResult run_sweep_cmd(const RunConfig& cfg) {
    const auto start = Clock::now();
    SimContext ctx = context_for(cfg, {cfg.schedule.target_radial_mode});
    const auto params = protocol_params(cfg);

    CoolingSchedule base;
    base.period_s = cfg.schedule.period_s;
    base.total_duration_s = cfg.schedule.total_duration_s;
    base.target_mode = cfg.schedule.target_radial_mode;
    base.coolant_ion = cfg.schedule.coolant_ion;

    const auto result = sweep_steady_state(
        ctx, cfg.sweep.pulse_counts, cfg.schedule.period_s,
        HeatingModel::single(cfg.schedule.heating_rate_qps), base, params,
        cfg.sweep.runs, cfg.schedule.initial_nbar);

    CsvWriter csv({"pulses", "duty_cycle", "nbar", "nbar_err"});
    for (const auto& p : result.points)
        csv.row({static_cast<double>(p.pulses), p.duty, p.nbar, p.nbar_err});

    CommandResult res;
    res.files["sweep.csv"] = csv.str();
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    res.files["manifest.json"] = manifest_json("sweep", cfg, wall);
    return res;
}

CommandResult run_scan(const RunConfig& cfg) {
    const auto start = Clock::now();
    std::vector<int> all_modes;
    for (int m = 0; m < cfg.trap.n_ions; ++m) all_modes.push_back(m);
    SimContext ctx = context_for(cfg, all_modes);

    SystemState state = initial_state(ctx, cfg, cfg.scan.state_nbar, cfg.scan.probe_ion);

    double duration = cfg.scan.probe_duration_s;
    if (duration <= 0.0)
        duration = doppler_pi_time(ctx, cfg.scan.probe_ion, 0, cfg.scan.state_nbar,
                                   cfg.scan.probe_rabi_hz);
    PulseSpec probe = make_probe(ctx, 0, 0, cfg.scan.probe_rabi_hz, duration);

    std::vector<double> offsets = cfg.scan.offsets_hz;
    if (offsets.empty()) {
        // default grid: spans the carrier and all first radial sidebands
        const double span = ctx.radial.frequencies_hz[0] * 1.15;
        const int n = 241;
        for (int k = 0; k < n; ++k) offsets.push_back(-span + 2.0 * span * k / (n - 1));
    }

    const auto results = scan_spectrum(ctx, state, offsets, probe);

    std::vector<std::string> header{"offset_hz"};
    for (int i = 0; i < cfg.trap.n_ions; ++i) header.push_back("p_bright_ion" + std::to_string(i));
    for (int i = 0; i < cfg.trap.n_ions; ++i) header.push_back("err_ion" + std::to_string(i));
    CsvWriter csv(header);
    for (const auto& r : results) {
        std::vector<double> row{r.frequency_offset_hz};
        row.insert(row.end(), r.bright.begin(), r.bright.end());
        row.insert(row.end(), r.bright_err.begin(), r.bright_err.end());
        csv.row(row);
    }

    CommandResult res;
    res.files["scan.csv"] = csv.str();
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    res.files["manifest.json"] = manifest_json("scan", cfg, wall);
    return res;
}

CommandResult run_probe(const RunConfig& cfg) {
    const auto start = Clock::now();
    SimContext ctx = context_for(cfg, {cfg.probe.mode});
    SystemState state = initial_state(ctx, cfg, cfg.probe.state_nbar, cfg.probe.probe_ion);

    const double eta = std::abs(ctx.engine.modes().eta(cfg.probe.probe_ion, 0));
    const double dw = ctx.engine.modes().axial_dw_mean(cfg.probe.probe_ion);
    const double pi_time = 1.0 / (2.0 * cfg.probe.rabi_hz * eta * dw);
    const double duration = cfg.probe.pi_time_fraction * pi_time;

    const PulseSpec rsb = make_probe(ctx, 0, -1, cfg.probe.rabi_hz, duration);
    const PulseSpec bsb = make_probe(ctx, 0, +1, cfg.probe.rabi_hz, duration);
    const auto p_rsb = simulate_shelving_detection(ctx, state, rsb);
    const auto p_bsb = simulate_shelving_detection(ctx, state, bsb);

    const int shots = state.backend == Backend::monte_carlo
                          ? static_cast<int>(state.traj.size())
                          : 0;
    const int ion = cfg.probe.probe_ion;
    json summary;
    summary["p_rsb"] = p_rsb[ion];
    summary["p_bsb"] = p_bsb[ion];
    summary["true_nbar"] = state.mean_fock(0);
    try {
        const auto est = ratio_nbar(p_rsb[ion], p_bsb[ion], shots);
        summary["nbar"] = est.nbar;
        summary["nbar_err"] = est.err;
    } catch (const std::exception& e) {
        summary["error"] = e.what();
    }

    std::vector<std::string> header{"sideband"};
    for (int i = 0; i < cfg.trap.n_ions; ++i) header.push_back("p_bright_ion" + std::to_string(i));
    CsvWriter csv(header);
    auto put = [&](const char* name, const std::vector<double>& p) {
        std::vector<std::string> row{name};
        for (double v : p) row.push_back(CsvWriter::format(v));
        csv.row_mixed(row);
    };
    put("rsb", p_rsb);
    put("bsb", p_bsb);

    CommandResult res;
    res.files["probe.csv"] = csv.str();
    res.files["probe_summary.json"] = summary.dump(2) + "\n";
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    res.files["manifest.json"] = manifest_json("probe", cfg, wall);
    return res;
}

CommandResult run_coherence(const RunConfig& cfg) {
    const auto start = Clock::now();
    json doc;
    doc["total_shift_hz"] = cfg.budget.total_shift_hz();

    json preds = json::array();
    for (const auto& a : cfg.noise.anchors) {
        json p;
        p["sigma_eps"] = a.sigma;
        p["tau_allan_s"] = a.tau_s;
        p["coherence_time_s"] = predict_coherence_time_s(cfg.budget, a.sigma, cfg.coherence.duty);
        preds.push_back(p);
    }
    doc["predictions"] = preds;

    const EchoSchedule sched = echo_schedule(cfg);
    std::vector<double> waits = cfg.coherence.wait_times_s;
    if (waits.empty()) {
        const double tc = predict_coherence_time_s(cfg.budget, cfg.coherence.sigma_eps,
                                                   sched.duty());
        for (double u = 0.2; u <= 1.81; u += 0.2) waits.push_back(u * tc);
    }
    EchoConfig ec;
    ec.shots = cfg.coherence.shots;
    ec.seed = cfg.engine.master_seed;
    ec.background_tau_s = cfg.coherence.background_tau_s;
    const EchoResult echo =
        simulate_spin_echo(sched, cfg.budget, cfg.noise, waits, ec);

    json epts = json::array();
    for (const auto& p : echo.points)
        epts.push_back({{"tau_s", p.tau_s}, {"fidelity", p.fidelity}, {"err", p.err}});
    doc["echo"] = {{"points", epts}};
    if (echo.one_over_e_time_s)
        doc["echo"]["one_over_e_time_s"] = *echo.one_over_e_time_s;
    else
        doc["echo"]["fit_failed"] = true;

    CsvWriter csv({"tau_s", "fidelity", "err"});
    for (const auto& p : echo.points) csv.row({p.tau_s, p.fidelity, p.err});

    CommandResult res;
    res.files["coherence.json"] = doc.dump(2) + "\n";
    res.files["echo.csv"] = csv.str();
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    res.files["manifest.json"] = manifest_json("coherence", cfg, wall);
    return res;
}

CommandResult run_allan(const RunConfig& cfg, const NoiseTrace& trace) {
    const auto start = Clock::now();
    std::vector<double> taus = cfg.allan.taus_s;
    if (taus.empty()) {
        trace.validate();
        const double dt = trace.duration_s() / static_cast<double>(trace.time_s.size() - 1);
        double tau = 2.0 * dt;
        while (tau <= trace.duration_s() / 3.0) {
            taus.push_back(tau);
            tau *= 1.5;
        }
    }
    const AllanCurve curve =
        allan_deviation(trace, taus, cfg.allan.normalized, cfg.allan.overlapping);

    CsvWriter csv({"tau_s", "sigma"});
    for (const auto& p : curve.points) csv.row({p.tau_s, p.sigma});

    CommandResult res;
    res.files["allan.csv"] = csv.str();
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    res.files["manifest.json"] = manifest_json("allan", cfg, wall);
    return res;
}

CommandResult run_scatter(const RunConfig& cfg) {
    const auto start = Clock::now();
    const auto r = scatter_absorption(cfg.scatter.wavelength_m, cfg.scatter.spacing_m,
                                      cfg.scatter.pulses_per_s);
    json doc;
    doc["input"] = {{"wavelength_m", cfg.scatter.wavelength_m},
                    {"spacing_m", cfg.scatter.spacing_m},
                    {"pulses_per_s", cfg.scatter.pulses_per_s}};
    doc["photons_per_pulse"] = r.photons_per_pulse;
    doc["photons_per_s"] = r.photons_per_s;

    CommandResult res;
    res.files["scatter.json"] = doc.dump(2) + "\n";
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    res.files["manifest.json"] = manifest_json("scatter", cfg, wall);
    return res;
}

NoiseTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    NoiseTrace tr;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
            throw std::runtime_error("trace file: expected two comma-separated columns");
        if (first) {
            first = false;
            try {
                std::stod(a);
            } catch (...) {
                continue;  // header row
            }
        }
        tr.time_s.push_back(std::stod(a));
        tr.amplitude.push_back(std::stod(b));
    }
    tr.validate();
    return tr;
}

}  // namespace zcool

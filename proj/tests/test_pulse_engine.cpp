#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "zcool/constants.hpp"
#include "zcool/protocol.hpp"

using namespace zcool;

namespace {

// Single-ion, single-tracked-mode context with no axial bath; isolated
// resonances make outcomes exact.
SimContext clean_context(Backend backend, int n_max = 8, int trajectories = 4000,
                         uint64_t seed = 42) {
    TrapConfig trap;
    trap.n_ions = 1;
    trap.radial_com_freq_hz = 1.0e6;
    EngineParams p;
    p.backend = backend;
    p.n_max = n_max;
    p.trajectories = trajectories;
    p.master_seed = seed;
    return make_context(trap, LevelConfig{}, p, {0}, 0.0);
}

PulseSpec shelve_pulse(const SimContext& ctx, int order, double duration_factor = 1.0,
                       int fock_ref = 1) {
    const double eta = std::abs(ctx.engine.modes().eta(0, 0));
    PulseSpec p;
    p.kind = PulseKind::rsb_shelve;
    p.from = s_zeeman(+1);
    p.to = d_state(-1);
    p.sideband_mode = 0;
    p.sideband_order = order;
    p.rabi_hz = 50e3;
    p.duration_s = duration_factor /
                   (2.0 * p.rabi_hz * eta * std::sqrt(static_cast<double>(fock_ref)));
    return p;
}

}  // namespace

TEST_CASE("effective RSB Rabi frequency") {
    // no axial coupling: standard eta sqrt(n) scaling
    CHECK(effective_rsb_rabi(1e5, 0.05, {}, 4, {}) == doctest::Approx(1e4));

    // one axial mode tuned so eta^2 (n + 1/2) = 0.1
    const double eta_ax = std::sqrt(0.1 / 3.5);
    CHECK(effective_rsb_rabi(1e5, 0.05, {eta_ax}, 1, {3.0}) ==
          doctest::Approx(0.9 * 1e5 * 0.05).epsilon(1e-12));

    // monotone decreasing in every axial occupation
    double prev = 1e9;
    for (double n_ax : {0.0, 1.0, 5.0, 20.0}) {
        const double w = effective_rsb_rabi(1e5, 0.05, {0.05, 0.03}, 2, {n_ax, 1.0});
        CHECK(w < prev);
        prev = w;
    }

    CHECK_THROWS_AS(effective_rsb_rabi(1e5, 0.05, {}, 0, {}), std::invalid_argument);
}

TEST_CASE("thermal-mean RSB Rabi matches the sampled ensemble") {
    const double eta_ax = 0.06, nbar_ax = 12.0;
    Rng rng(7);
    double sum = 0.0;
    const int n_samp = 200000;
    for (int k = 0; k < n_samp; ++k) {
        const double n = rng.thermal_fock(nbar_ax);
        sum += effective_rsb_rabi(1e5, 0.05, {eta_ax}, 1, {n});
    }
    const double expected =
        1e5 * 0.05 * (1.0 - eta_ax * eta_ax * (nbar_ax + 0.5));
    CHECK(sum / n_samp == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("light shift arithmetic") {
    // omega^2/(4 delta) in ordinary-frequency units
    CHECK(light_shift_hz({{125e3, 10e6}}) == doctest::Approx(390.625).epsilon(1e-12));
    CHECK(light_shift_hz({{0.0, 1e6}}) == doctest::Approx(0.0));
    CHECK(light_shift_hz({{125e3, 10e6}, {125e3, -10e6}}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(light_shift_hz({{1e3, 0.0}}), std::invalid_argument);
}

TEST_CASE("resonant RSB pi pulse transfers n=1 to the D manifold at n=0") {
    for (Backend backend : {Backend::rate, Backend::monte_carlo}) {
        SimContext ctx = clean_context(backend);
        SystemState st = ctx.engine.make_thermal_state({s_zeeman(+1)}, {0.0});
        // place all population at n = 1
        if (backend == Backend::rate) {
            st.joint.setZero();
            st.joint(level_index(s_zeeman(+1)), 1) = 1.0;
        } else {
            for (auto& t : st.traj) t.fock[0] = 1;
        }
        ctx.engine.apply_drive(st, shelve_pulse(ctx, -1));
        const auto pops = st.level_populations(0);
        CHECK(pops[level_index(d_state(-1))] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(st.mean_fock(0) == doctest::Approx(0.0).epsilon(1e-6));
    }
}

TEST_CASE("red sideband annihilates the ground state") {
    SimContext ctx = clean_context(Backend::rate);
    SystemState st = ctx.engine.make_thermal_state({s_zeeman(+1)}, {0.0});
    ctx.engine.apply_drive(st, shelve_pulse(ctx, -1));
    // no quantum can be removed; the only residue is the far-off-resonant
    // carrier at (Omega/nu)^2 scale
    CHECK(st.mean_fock(0) < 1e-6);
    double d_pop = 0.0;
    for (int mf = -1; mf <= 1; ++mf)
        d_pop += st.level_populations(0)[level_index(d_state(mf))];
    CHECK(d_pop < 1e-4);
}

TEST_CASE("MW pi pulse involution") {
    SimContext ctx = clean_context(Backend::rate);
    SystemState st = ctx.engine.make_thermal_state({qubit_zero()}, {0.5});
    PulseSpec mw;
    mw.kind = PulseKind::mw_pi;
    mw.from = qubit_zero();
    mw.to = qubit_one();
    ctx.engine.apply_drive(st, mw);
    CHECK(st.level_populations(0)[level_index(qubit_one())] == doctest::Approx(1.0));
    ctx.engine.apply_drive(st, mw);
    CHECK(st.level_populations(0)[level_index(qubit_zero())] == doctest::Approx(1.0));
}

TEST_CASE("generalized Rabi formula for a detuned drive") {
    SimContext ctx = clean_context(Backend::rate);
    SystemState st = ctx.engine.make_thermal_state({qubit_one()}, {0.0});
    PulseSpec probe;
    probe.kind = PulseKind::rsb_shelve;
    probe.from = qubit_one();
    probe.to = d_state(0);
    probe.rabi_hz = 20e3;
    probe.detuning_hz = 15e3;
    probe.duration_s = 31e-6;
    ctx.engine.apply_drive(st, probe);

    // carrier coupling carries the n = 0 Debye-Waller factor 1 - eta^2/2
    const double eta = std::abs(ctx.engine.modes().eta(0, 0));
    const double omega =
        constants::two_pi * probe.rabi_hz * (1.0 - 0.5 * eta * eta);
    const double delta = constants::two_pi * probe.detuning_hz;
    const double x = std::sqrt(omega * omega + delta * delta);
    const double expect =
        (omega * omega / (x * x)) * std::pow(std::sin(0.5 * x * probe.duration_s), 2);
    CHECK(st.level_populations(0)[level_index(d_state(0))] ==
          doctest::Approx(expect).epsilon(1e-4));
}

TEST_CASE("resonant pi pulse applied twice restores the populations (rate)") {
    SimContext ctx = clean_context(Backend::rate);
    SystemState st = ctx.engine.make_thermal_state({s_zeeman(+1)}, {0.0});
    st.joint.setZero();
    st.joint(level_index(s_zeeman(+1)), 1) = 1.0;
    const Eigen::MatrixXd before = st.joint;
    const PulseSpec p = shelve_pulse(ctx, -1);
    ctx.engine.apply_drive(st, p);
    ctx.engine.apply_drive(st, p);
    CHECK((st.joint - before).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("drives reject ions parked in the bracket state") {
    SimContext ctx = clean_context(Backend::monte_carlo, 8, 16);
    SystemState st = ctx.engine.make_thermal_state({bracket_state()}, {0.0});
    CHECK_THROWS_AS(ctx.engine.apply_drive(st, shelve_pulse(ctx, -1)),
                    std::runtime_error);
}

TEST_CASE("selection rules rejected at pulse validation") {
    PulseSpec bad;
    bad.kind = PulseKind::rsb_shelve;
    bad.from = qubit_zero();  // F=0 has no quadrupole channel in this model
    bad.to = d_state(0);
    CHECK_THROWS_AS(bad.validate(1, 1), std::invalid_argument);

    PulseSpec raman;
    raman.kind = PulseKind::raman_two_tone;
    raman.from = qubit_one();
    raman.to = s_zeeman(+1);
    // missing single-ion target
    CHECK_THROWS_AS(raman.validate(2, 1), std::invalid_argument);
}

TEST_CASE("repump pools the D manifold into S,F=1 uniformly") {
    for (Backend backend : {Backend::rate, Backend::monte_carlo}) {
        SimContext ctx = clean_context(backend, 8, 30000);
        SystemState st = ctx.engine.make_thermal_state({d_state(-1)}, {0.3});
        const double nbar_before = st.mean_fock(0);
        PulseSpec rp;
        rp.kind = PulseKind::repump;
        rp.duration_s = 20e-6;
        ctx.engine.apply_repump(st, rp);
        const auto pops = st.level_populations(0);
        const double tol = backend == Backend::rate ? 1e-12 : 0.02;
        CHECK(pops[level_index(s_zeeman(-1))] == doctest::Approx(1.0 / 3).epsilon(tol));
        CHECK(pops[level_index(qubit_one())] == doctest::Approx(1.0 / 3).epsilon(tol));
        CHECK(pops[level_index(s_zeeman(+1))] == doctest::Approx(1.0 / 3).epsilon(tol));
        CHECK(pops[level_index(qubit_zero())] == doctest::Approx(0.0));
        // recoil off: motional state untouched
        CHECK(st.mean_fock(0) == doctest::Approx(nbar_before).epsilon(1e-12));
    }
}

TEST_CASE("repump leaves S population alone") {
    SimContext ctx = clean_context(Backend::rate);
    SystemState st = ctx.engine.make_thermal_state({qubit_one()}, {0.2});
    const Eigen::MatrixXd before = st.joint;
    PulseSpec rp;
    rp.kind = PulseKind::repump;
    ctx.engine.apply_repump(st, rp);
    CHECK((st.joint - before).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("repump recoil bookkeeping at small eta") {
    SimContext ctx = [&] {
        TrapConfig trap;
        trap.n_ions = 1;
        EngineParams p;
        p.backend = Backend::rate;
        p.n_max = 8;
        p.repump_recoil = true;
        p.repump_scatter_events = 1;
        return make_context(trap, LevelConfig{}, p, {0}, 0.0);
    }();
    SystemState st = ctx.engine.make_thermal_state({d_state(0)}, {0.0});
    PulseSpec rp;
    rp.kind = PulseKind::repump;
    ctx.engine.apply_repump(st, rp);
    // from n=0 a single scattering event adds one quantum with probability eta^2
    const double eta = ctx.engine.modes().eta(0, 0);
    CHECK(st.mean_fock(0) == doctest::Approx(eta * eta).epsilon(1e-9));
}

TEST_CASE("heating: zero rate leaves the state untouched") {
    SimContext ctx = clean_context(Backend::monte_carlo, 20, 200);
    SystemState st = ctx.engine.make_thermal_state({qubit_zero()}, {1.0});
    const double before = st.mean_fock(0);
    ctx.engine.heating_step(st, 0.1, HeatingModel::single(0.0));
    CHECK(st.mean_fock(0) == doctest::Approx(before));
}

TEST_CASE("heating: d<n>/dt = Gamma") {
    // MC: nbar after 100 ms of 33.3 q/s from the ground state, within 3 sigma
    SimContext ctx = clean_context(Backend::monte_carlo, 30, 20000, 11);
    SystemState st = ctx.engine.make_thermal_state({qubit_zero()}, {0.0});
    ctx.engine.heating_step(st, 0.1, HeatingModel::single(33.3));
    const double expect = 3.33;
    CHECK(std::abs(st.mean_fock(0) - expect) < 3.0 * st.mean_fock_stderr(0));

    // rate mode: linear fit of nbar(t) over 10 points recovers Gamma within 5%
    SimContext rctx = clean_context(Backend::rate, 60);
    SystemState rst = rctx.engine.make_thermal_state({qubit_zero()}, {0.0});
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double dt = 0.01, gamma = 33.3;
    for (int k = 1; k <= 10; ++k) {
        rctx.engine.heating_step(rst, dt, HeatingModel::single(gamma));
        const double t = k * dt, n = rst.mean_fock(0);
        sx += t; sy += n; sxx += t * t; sxy += t * n;
    }
    const double slope = (10 * sxy - sx * sy) / (10 * sxx - sx * sx);
    CHECK(slope == doctest::Approx(gamma).epsilon(0.05));
    // probability conserved through the generator
    CHECK(rst.total_probability() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("heating leakage raises a diagnostic") {
    SimContext ctx = clean_context(Backend::rate, 6);
    SystemState st = ctx.engine.make_thermal_state({qubit_zero()}, {0.0});
    CHECK_THROWS_WITH_AS(ctx.engine.heating_step(st, 0.5, HeatingModel::single(50.0)),
                         doctest::Contains("n_max"), std::runtime_error);
}

TEST_CASE("rate-mode probability conservation through a pulse program") {
    SimContext ctx = clean_context(Backend::rate, 12);
    SystemState st = ctx.engine.make_thermal_state({s_zeeman(+1)}, {1.0});
    PulseSpec rp;
    rp.kind = PulseKind::repump;
    for (int k = 0; k < 5; ++k) {
        ctx.engine.apply_drive(st, shelve_pulse(ctx, -1));
        CHECK(st.total_probability() == doctest::Approx(1.0).epsilon(1e-9));
        ctx.engine.apply_repump(st, rp);
        CHECK(st.total_probability() == doctest::Approx(1.0).epsilon(1e-9));
        ctx.engine.heating_step(st, 1e-3, HeatingModel::single(20.0));
        CHECK(st.total_probability() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("MC matches the rate-mode oracle on a fixed three-pulse program") {
    // n_max = 5, no heating: every (level, n) outcome probability within
    // 3 sigma binomial error of the exact rate-mode result.
    const int n_traj = 10000;
    auto program = [](const SimContext& ctx) {
        std::vector<PulseSpec> prog;
        prog.push_back(shelve_pulse(ctx, -1, 1.0, 1));   // pi at n=1
        PulseSpec rp;
        rp.kind = PulseKind::repump;
        prog.push_back(rp);
        prog.push_back(shelve_pulse(ctx, -1, 0.7, 1));   // deliberate under-rotation
        return prog;
    };

    SimContext rate_ctx = clean_context(Backend::rate, 5);
    SystemState rate_st = rate_ctx.engine.make_thermal_state({s_zeeman(+1)}, {0.8});
    for (const auto& p : program(rate_ctx)) rate_ctx.engine.apply(rate_st, p);

    SimContext mc_ctx = clean_context(Backend::monte_carlo, 5, n_traj, 99);
    SystemState mc_st = mc_ctx.engine.make_thermal_state({s_zeeman(+1)}, {0.8});
    for (const auto& p : program(mc_ctx)) mc_ctx.engine.apply(mc_st, p);

    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(kNumLevels, 6);
    for (const auto& t : mc_st.traj) counts(t.internal[0], t.fock[0]) += 1.0;
    counts /= static_cast<double>(n_traj);

    for (int l = 0; l < kNumLevels; ++l) {
        for (int n = 0; n <= 5; ++n) {
            const double p = rate_st.joint(l, n);
            const double sigma = std::sqrt(std::max(p * (1 - p) / n_traj, 1e-12));
            CHECK(std::abs(counts(l, n) - p) < 3.5 * sigma);
        }
    }
}

TEST_CASE("determinism: same seed and different thread counts agree exactly") {
    auto run = [](int threads) {
        SimContext ctx = clean_context(Backend::monte_carlo, 20, 500, 1234);
        SystemState st = ctx.engine.make_thermal_state({s_zeeman(+1)}, {1.0});
        st.threads = threads;
        ctx.engine.apply_drive(st, shelve_pulse(ctx, -1));
        ctx.engine.heating_step(st, 0.01, HeatingModel::single(30.0));
        std::vector<int> sig;
        for (const auto& t : st.traj) {
            sig.push_back(t.internal[0]);
            sig.push_back(t.fock[0]);
        }
        return sig;
    };
    CHECK(run(1) == run(4));
}

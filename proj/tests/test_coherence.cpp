#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>

#include "zcool/coherence.hpp"
#include "zcool/constants.hpp"
#include "zcool/rng.hpp"

using namespace zcool;

namespace {

NoiseTrace sampled(double dt, double duration, const std::function<double(double)>& f) {
    NoiseTrace tr;
    const int n = static_cast<int>(duration / dt);
    for (int k = 0; k < n; ++k) {
        tr.time_s.push_back(k * dt);
        tr.amplitude.push_back(f(k * dt));
    }
    return tr;
}

}  // namespace

TEST_CASE("Allan deviation of a constant signal is zero") {
    const auto tr = sampled(1e-3, 30.0, [](double) { return 2.5; });
    for (const auto& p : allan_deviation(tr, {0.01, 0.1, 1.0}).points)
        CHECK(p.sigma == doctest::Approx(0.0));
}

TEST_CASE("white noise shows the tau^-1/2 Allan slope") {
    Rng rng(99);
    const auto tr = sampled(1e-3, 120.0, [&](double) { return rng.normal(0.0, 1.0); });
    std::vector<double> taus{0.01, 0.0316, 0.1, 0.316, 1.0};
    const auto curve = allan_deviation(tr, taus);
    // log-log least squares slope
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(curve.points.size());
    for (const auto& p : curve.points) {
        const double lx = std::log10(p.tau_s), ly = std::log10(p.sigma);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(std::abs(slope + 0.5) < 0.1);
}

TEST_CASE("linear drift gives sigma = d tau / sqrt(2)") {
    const double d = 0.35;
    const auto tr = sampled(1e-3, 60.0, [&](double t) { return d * t; });
    for (double tau : {0.1, 0.5, 2.0}) {
        const auto curve = allan_deviation(tr, {tau});
        CHECK(curve.points[0].sigma ==
              doctest::Approx(d * tau / std::sqrt(2.0)).epsilon(0.02));
    }
}

TEST_CASE("sinusoid shows the local Allan maximum near half its period") {
    const double T = 1.0;
    const auto tr = sampled(1e-3, 60.0, [&](double t) {
        return std::sin(constants::two_pi * t / T);
    });
    const auto c = allan_deviation(tr, {T / 10.0, T / 2.0, T});
    CHECK(c.points[1].sigma > c.points[2].sigma);
    CHECK(c.points[1].sigma > c.points[0].sigma);
}

TEST_CASE("Allan estimator rejects out-of-range taus") {
    const auto tr = sampled(1e-2, 10.0, [](double t) { return t; });
    CHECK_THROWS_AS(static_cast<void>(allan_deviation(tr, {1e-2})),
                    std::invalid_argument);  // below 2 dt
    CHECK_THROWS_AS(static_cast<void>(allan_deviation(tr, {5.0})),
                    std::invalid_argument);  // above duration/3
    NoiseTrace bad;
    bad.time_s = {0.0};
    bad.amplitude = {1.0};
    CHECK_THROWS_AS(static_cast<void>(allan_deviation(bad, {0.1})),
                    std::invalid_argument);
}

TEST_CASE("normalized and overlapping variants") {
    Rng rng(5);
    const auto tr = sampled(1e-3, 30.0, [&](double) { return 4.0 + rng.normal(0, 0.2); });
    const auto plain = allan_deviation(tr, {0.1});
    const auto norm = allan_deviation(tr, {0.1}, true);
    CHECK(norm.points[0].sigma ==
          doctest::Approx(plain.points[0].sigma / 4.0).epsilon(0.01));
    const auto over = allan_deviation(tr, {0.1}, false, true);
    CHECK(over.points[0].sigma ==
          doctest::Approx(plain.points[0].sigma).epsilon(0.15));
}

TEST_CASE("single-term coherence prediction reduces to the closed form") {
    ShiftBudget b;
    b.terms = {{"carrier", 125e3, 10e6}};
    const double sigma = 1.43e-3;
    const double omega = constants::two_pi * 125e3;
    const double delta = constants::two_pi * 10e6;
    const double closed = 8.0 * std::sqrt(2.0) * delta / (omega * omega * sigma);
    CHECK(predict_coherence_time_s(b, sigma, 0.0) ==
          doctest::Approx(closed).epsilon(1e-9));
}

TEST_CASE("coherence-time scaling laws") {
    ShiftBudget b = ShiftBudget::cooling_cycle_default();
    const double t0 = predict_coherence_time_s(b, 1e-3, 0.7);
    CHECK(predict_coherence_time_s(b.scaled(2.0, 1.0), 1e-3, 0.7) ==
          doctest::Approx(t0 / 4.0).epsilon(1e-12));
    CHECK(predict_coherence_time_s(b.scaled(1.0, 2.0), 1e-3, 0.7) ==
          doctest::Approx(2.0 * t0).epsilon(1e-12));
    CHECK(predict_coherence_time_s(b, 2e-3, 0.7) ==
          doctest::Approx(t0 / 2.0).epsilon(1e-12));
}

TEST_CASE("coherence predictor flags zero noise as infinite") {
    CHECK_THROWS_AS(
        static_cast<void>(predict_coherence_time_s(ShiftBudget::cooling_cycle_default(),
                                                   0.0, 0.7)),
        InfiniteCoherence);
}

TEST_CASE("cycle budget reproduces the measured coherence window") {
    const ShiftBudget b = ShiftBudget::cooling_cycle_default();
    const double t1 = predict_coherence_time_s(b, 0.143e-2, 0.70);
    const double t2 = predict_coherence_time_s(b, 0.071e-2, 0.70);
    CHECK(t1 == doctest::Approx(0.596).epsilon(0.05));
    CHECK(t2 == doctest::Approx(1.145).epsilon(0.05));
}

TEST_CASE("echo with zero noise stays at unit fidelity") {
    NoiseSpec noise;
    noise.kind = NoiseKind::shot_gaussian;
    noise.sigma = 0.0;
    EchoConfig cfg;
    cfg.shots = 50;
    const auto res = simulate_spin_echo({10e-3, 2.95e-3},
                                        ShiftBudget::cooling_cycle_default(), noise,
                                        {0.1, 0.4, 1.0}, cfg);
    for (const auto& p : res.points) CHECK(p.fidelity == doctest::Approx(1.0));
}

TEST_CASE("echo cancels a static light shift exactly") {
    NoiseSpec noise;
    noise.kind = NoiseKind::constant;
    noise.sigma = 0.02;  // 2% static intensity error
    EchoConfig cfg;
    cfg.shots = 50;
    const auto res = simulate_spin_echo({10e-3, 2.95e-3},
                                        ShiftBudget::cooling_cycle_default(), noise,
                                        {0.1, 0.5, 1.5}, cfg);
    for (const auto& p : res.points)
        CHECK(std::abs(p.fidelity - 1.0) < 1e-9);
}

TEST_CASE("shot-gaussian echo matches the analytic Gaussian decay") {
    NoiseSpec noise;
    noise.kind = NoiseKind::shot_gaussian;
    noise.sigma = 1.43e-3;
    const EchoSchedule sched{10e-3, 2.95e-3};
    const ShiftBudget b = ShiftBudget::cooling_cycle_default();
    EchoConfig cfg;
    cfg.shots = 4000;
    cfg.seed = 31;
    std::vector<double> waits{0.2, 0.4, 0.6, 0.8, 1.0};
    const auto res = simulate_spin_echo(sched, b, noise, waits, cfg);
    const double shift = b.total_shift_hz();
    for (const auto& p : res.points) {
        const double tau_on = p.tau_s * (sched.burst_s / sched.period_s);
        const double arg = constants::pi * shift * tau_on * noise.sigma;
        const double expect = 0.5 * (1.0 + std::exp(-0.5 * arg * arg));
        CHECK(std::abs(p.fidelity - expect) < 3.0 * std::max(p.err, 1e-4));
    }
    // fitted 1/e time consistent with the closed-form prediction
    REQUIRE(res.one_over_e_time_s.has_value());
    const double pred = predict_coherence_time_s(b, noise.sigma, sched.duty());
    CHECK(*res.one_over_e_time_s == doctest::Approx(pred).epsilon(0.06));
}

TEST_CASE("decay rate scales quadratically with Rabi and linearly with 1/detuning") {
    NoiseSpec noise;
    noise.kind = NoiseKind::shot_gaussian;
    noise.sigma = 1.43e-3;
    const EchoSchedule sched{10e-3, 2.95e-3};
    EchoConfig cfg;
    cfg.shots = 1500;
    cfg.seed = 7;

    const auto rabi = decay_rate_sweep(SweepVariable::rabi,
                                       {0.5, 0.75, 1.0, 1.25, 1.5, 2.0},
                                       ShiftBudget::cooling_cycle_default(), noise,
                                       sched, cfg);
    CHECK(rabi.r2 >= 0.95);
    // the quadratic coefficient dominates the linear one at unit scale
    CHECK(std::abs(rabi.fit_coeffs[2]) > std::abs(rabi.fit_coeffs[1]));

    const auto det = decay_rate_sweep(SweepVariable::detuning,
                                      {0.5, 0.75, 1.0, 1.5, 2.0, 3.0},
                                      ShiftBudget::cooling_cycle_default(), noise,
                                      sched, cfg);
    CHECK(det.r2 >= 0.95);

    NoiseSpec off;
    off.kind = NoiseKind::shot_gaussian;
    off.sigma = 0.0;
    const auto quiet = decay_rate_sweep(SweepVariable::rabi, {0.5, 1.0, 1.5, 2.0},
                                        ShiftBudget::cooling_cycle_default(), off,
                                        sched, cfg);
    for (const auto& p : quiet.points) CHECK(p.rate_per_s == doctest::Approx(0.0));
}

TEST_CASE("decay sweep needs at least four points") {
    NoiseSpec noise;
    noise.kind = NoiseKind::shot_gaussian;
    CHECK_THROWS_AS(static_cast<void>(decay_rate_sweep(
                        SweepVariable::rabi, {1.0, 2.0},
                        ShiftBudget::cooling_cycle_default(), noise,
                        {10e-3, 2.95e-3}, EchoConfig{})),
                    std::invalid_argument);
}

TEST_CASE("random-walk noise calibration hits the Allan anchors") {
    NoiseSpec spec;
    spec.kind = NoiseKind::random_walk;
    spec.anchors = {{1.0, 1.43e-3}, {0.1, 0.71e-3}};
    spec.sample_period_s = 0.01;
    const auto cal = calibrate_noise(spec, 77);
    const auto tr = synthesize_trace(cal, 600.0, 1234);
    const auto curve = allan_deviation(tr, {0.1, 1.0});
    CHECK(curve.points[0].sigma == doctest::Approx(0.71e-3).epsilon(0.10));
    CHECK(curve.points[1].sigma == doctest::Approx(1.43e-3).epsilon(0.10));
}

TEST_CASE("scattered-photon bound") {
    const auto r = scatter_absorption(297e-9, 5e-6, 1000.0);

    // 6-figure agreement with an in-test evaluation of the formula
    const double lam_bar = 297e-9 / constants::two_pi;
    const double expect = 6.0 * constants::pi * lam_bar * lam_bar /
                          (4.0 * constants::pi * 5e-6 * 5e-6);
    CHECK(r.photons_per_pulse == doctest::Approx(expect).epsilon(1e-6));

    // published bound and the per-second rate at 10 pulses / 10 ms
    CHECK(r.photons_per_pulse == doctest::Approx(1.34e-4).epsilon(0.005));
    CHECK(r.photons_per_s == doctest::Approx(0.134).epsilon(0.005));

    // inverse-square in the spacing
    const auto far = scatter_absorption(297e-9, 50e-6, 1000.0);
    CHECK(far.photons_per_pulse ==
          doctest::Approx(r.photons_per_pulse / 100.0).epsilon(1e-9));

    CHECK_THROWS_AS(static_cast<void>(scatter_absorption(297e-9, 0.0, 1.0)),
                    std::invalid_argument);
}

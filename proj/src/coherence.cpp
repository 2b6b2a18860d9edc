#include "zcool/coherence.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "zcool/constants.hpp"
#include "zcool/rng.hpp"

namespace zcool {

void NoiseTrace::validate() const {
    if (time_s.size() != amplitude.size())
        throw std::invalid_argument("noise trace: time/amplitude size mismatch");
    if (time_s.size() < 2)
        throw std::invalid_argument("noise trace: need at least 2 samples");
    for (size_t i = 1; i < time_s.size(); ++i)
        if (time_s[i] <= time_s[i - 1])
            throw std::invalid_argument("noise trace: timestamps must strictly increase");
}

AllanCurve allan_deviation(const NoiseTrace& trace, const std::vector<double>& taus,
                           bool normalized, bool overlapping) {
    trace.validate();
    const double duration = trace.duration_s();
    const double mean_dt = duration / static_cast<double>(trace.time_s.size() - 1);
    const double t0 = trace.time_s.front();

    double mean_amp = 0.0;
    if (normalized) {
        mean_amp = std::accumulate(trace.amplitude.begin(), trace.amplitude.end(), 0.0) /
                   static_cast<double>(trace.amplitude.size());
        if (mean_amp == 0.0)
            throw std::invalid_argument("allan_deviation: zero mean amplitude, "
                                        "cannot normalize");
    }

    AllanCurve curve;
    curve.normalized = normalized;
    for (double tau : taus) {
        if (tau < 2.0 * mean_dt)
            throw std::invalid_argument("allan_deviation: tau below twice the mean "
                                        "sample spacing");
        if (tau > duration / 3.0)
            throw std::invalid_argument("allan_deviation: tau above duration/3");

        double acc = 0.0;
        int pairs = 0;
        if (!overlapping) {
            // consecutive non-overlapping time bins of width tau
            const int n_bins = static_cast<int>(std::floor(duration / tau));
            if (n_bins < 3)
                throw std::invalid_argument("allan_deviation: fewer than 3 bins at tau");
            std::vector<double> mean(n_bins, 0.0);
            std::vector<int> count(n_bins, 0);
            for (size_t i = 0; i < trace.time_s.size(); ++i) {
                const int b = static_cast<int>(std::floor((trace.time_s[i] - t0) / tau));
                if (b < 0 || b >= n_bins) continue;
                mean[b] += trace.amplitude[i];
                ++count[b];
            }
            for (int b = 0; b < n_bins; ++b) {
                if (count[b] == 0)
                    throw std::invalid_argument("allan_deviation: empty bin at tau");
                mean[b] /= count[b];
            }
            for (int b = 0; b + 1 < n_bins; ++b) {
                const double d = mean[b + 1] - mean[b];
                acc += d * d;
                ++pairs;
            }
        } else {
            // overlapping estimator: windows of m samples at every offset
            const int n = static_cast<int>(trace.amplitude.size());
            const int m = std::max(1, static_cast<int>(std::round(tau / mean_dt)));
            if (n < 3 * m)
                throw std::invalid_argument("allan_deviation: fewer than 3 bins at tau");
            std::vector<double> prefix(n + 1, 0.0);
            for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + trace.amplitude[i];
            for (int j = 0; j + 2 * m <= n; ++j) {
                const double y1 = (prefix[j + m] - prefix[j]) / m;
                const double y2 = (prefix[j + 2 * m] - prefix[j + m]) / m;
                acc += (y2 - y1) * (y2 - y1);
                ++pairs;
            }
        }
        double sigma = std::sqrt(0.5 * acc / pairs);
        if (normalized) sigma /= std::abs(mean_amp);
        curve.points.push_back({tau, sigma});
    }
    return curve;
}

double ShiftBudget::total_shift_hz() const {
    double s = 0.0;
    for (const auto& t : terms) {
        if (t.detuning_hz == 0.0)
            throw std::invalid_argument("shift budget term '" + t.label +
                                        "' has zero detuning");
        s += t.rabi_hz * t.rabi_hz / (4.0 * t.detuning_hz);
    }
    return s;
}

ShiftBudget ShiftBudget::scaled(double rabi_factor, double detuning_factor) const {
    ShiftBudget b = *this;
    for (auto& t : b.terms) {
        t.rabi_hz *= rabi_factor;
        t.detuning_hz *= detuning_factor;
    }
    return b;
}

ShiftBudget ShiftBudget::cooling_cycle_default() {
    const double near = 10e6, far = 30e6;
    ShiftBudget b;
    b.terms = {
        {"carrier_shelve_plus_near", 125e3, near},
        {"carrier_shelve_minus_near", 125e3, near},
        {"axial_com_sb_shelve_plus_near", 100e3, near},
        {"axial_com_sb_shelve_minus_near", 100e3, near},
        {"other_axial_sb_near", 50e3, near},
        {"radial_sb_near", 10e3, near},
        {"carrier_shelve_plus_far", 125e3, far},
        {"carrier_shelve_minus_far", 125e3, far},
        {"axial_com_sb_shelve_plus_far", 100e3, far},
        {"axial_com_sb_shelve_minus_far", 100e3, far},
        {"other_axial_sb_far", 50e3, far},
        {"radial_sb_far", 10e3, far},
    };
    return b;
}

double predict_coherence_time_s(const ShiftBudget& budget, double sigma_eps, double duty) {
    if (sigma_eps < 0.0)
        throw std::invalid_argument("predict_coherence_time: sigma_eps must be >= 0");
    if (sigma_eps == 0.0) throw InfiniteCoherence();
    if (duty < 0.0 || duty >= 1.0)
        throw std::invalid_argument("predict_coherence_time: duty must be in [0,1)");
    const double shift_hz = std::abs(budget.total_shift_hz());
    if (shift_hz == 0.0) throw InfiniteCoherence();
    // decay exp(-(sigma^2/2) (pi S tau_on)^2); 1/e at tau_on = sqrt(2)/(pi S sigma)
    const double tau_on = std::sqrt(2.0) / (constants::pi * shift_hz * sigma_eps);
    return tau_on / (1.0 - duty);
}

// ---------------------------------------------------------------------------
// Noise synthesis

CalibratedNoise calibrate_noise(const NoiseSpec& spec, uint64_t seed) {
    if (spec.kind == NoiseKind::shot_gaussian || spec.kind == NoiseKind::constant)
        return {spec.sigma, 0.0, spec.sample_period_s};
    if (spec.anchors.size() < 2)
        throw std::invalid_argument("calibrate_noise: need two Allan anchor points");

    const double T = spec.sample_period_s;
    const auto& a0 = spec.anchors[0];
    const auto& a1 = spec.anchors[1];

    // Measure the unit responses of the white and walk components at the
    // anchor taus, then solve the 2x2 linear system in the variances.
    const double duration = 8.0 * std::max(a0.tau_s, a1.tau_s) * 8.0;
    auto response = [&](double white, double walk, double tau) {
        CalibratedNoise unit{white, walk, T};
        NoiseTrace tr = synthesize_trace(unit, duration, derive_seed(seed, 0xA11A));
        return allan_deviation(tr, {tau}).points[0].sigma;
    };
    const double w0 = response(1.0, 0.0, a0.tau_s), w1 = response(1.0, 0.0, a1.tau_s);
    const double r0 = response(0.0, 1.0, a0.tau_s), r1 = response(0.0, 1.0, a1.tau_s);

    // sigma^2(tau) = white^2 w(tau)^2 + walk^2 r(tau)^2
    const double det = w0 * w0 * r1 * r1 - w1 * w1 * r0 * r0;
    double white2 = (a0.sigma * a0.sigma * r1 * r1 - a1.sigma * a1.sigma * r0 * r0) / det;
    double walk2 = (a1.sigma * a1.sigma * w0 * w0 - a0.sigma * a0.sigma * w1 * w1) / det;
    white2 = std::max(white2, 0.0);
    walk2 = std::max(walk2, 0.0);
    return {std::sqrt(white2), std::sqrt(walk2), T};
}

NoiseTrace synthesize_trace(const CalibratedNoise& noise, double duration_s, uint64_t seed) {
    Rng rng(seed);
    const int n = static_cast<int>(std::ceil(duration_s / noise.period_s));
    NoiseTrace tr;
    tr.time_s.reserve(n);
    tr.amplitude.reserve(n);
    double walk = 0.0;
    for (int k = 0; k < n; ++k) {
        walk += rng.normal(0.0, noise.walk_step_sigma);
        tr.time_s.push_back(k * noise.period_s);
        tr.amplitude.push_back(walk + rng.normal(0.0, noise.white_sigma));
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Spin echo

namespace {

struct NoiseStream {
    CalibratedNoise cal;
    Rng rng;
    double walk = 0.0;

    explicit NoiseStream(const CalibratedNoise& c, uint64_t seed) : cal(c), rng(seed) {}

    double next() {
        walk += rng.normal(0.0, cal.walk_step_sigma);
        return walk + rng.normal(0.0, cal.white_sigma);
    }
};

struct LinearFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

LinearFit weighted_linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& w) {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    LinearFit f;
    const double det = sw * sxx - sx * sx;
    if (det == 0.0) return f;
    f.slope = (sw * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    double ss_res = 0, ss_tot = 0;
    const double ybar = sy / sw;
    for (size_t i = 0; i < x.size(); ++i) {
        const double fit = f.slope * x[i] + f.intercept;
        ss_res += w[i] * (y[i] - fit) * (y[i] - fit);
        ss_tot += w[i] * (y[i] - ybar) * (y[i] - ybar);
    }
    f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

}  // namespace

EchoResult simulate_spin_echo(const EchoSchedule& schedule, const ShiftBudget& budget,
                              const NoiseSpec& noise, const std::vector<double>& wait_times_s,
                              const EchoConfig& cfg) {
    for (double t : wait_times_s)
        if (t <= 0.0)
            throw std::invalid_argument("simulate_spin_echo: wait times must be positive");
    if (schedule.burst_s > schedule.period_s)
        throw std::invalid_argument("simulate_spin_echo: burst longer than period");

    const double shift_hz = budget.total_shift_hz();
    const CalibratedNoise cal = calibrate_noise(noise, cfg.seed);
    NoiseStream stream(cal, derive_seed(cfg.seed, 0xEC40));

    EchoResult res;
    for (size_t iw = 0; iw < wait_times_s.size(); ++iw) {
        // snap the wait to an even number of cooling periods
        const int half = std::max(1, static_cast<int>(std::round(
                                          wait_times_s[iw] / (2.0 * schedule.period_s))));
        const double tau = 2.0 * half * schedule.period_s;
        const double tau_on = 2.0 * half * schedule.burst_s;

        double sum = 0.0, sumsq = 0.0;
        for (int shot = 0; shot < cfg.shots; ++shot) {
            double dphi;
            if (noise.kind == NoiseKind::shot_gaussian) {
                const double eps = stream.rng.normal(0.0, noise.sigma);
                dphi = constants::pi * shift_hz * tau_on * eps;
            } else if (noise.kind == NoiseKind::constant) {
                // static intensity error: identical accumulation in both arms
                const double arm = half * noise.sigma;
                dphi = constants::two_pi * shift_hz * schedule.burst_s * (arm - arm);
            } else {
                double arm1 = 0.0, arm2 = 0.0;
                for (int k = 0; k < half; ++k) arm1 += stream.next();
                for (int k = 0; k < half; ++k) arm2 += stream.next();
                // relative phase between the two symmetric delay periods
                dphi = constants::two_pi * shift_hz * schedule.burst_s * (arm2 - arm1);
            }
            double contrast = std::cos(dphi);
            if (cfg.background_tau_s > 0.0) {
                const double x = tau / cfg.background_tau_s;
                contrast *= std::exp(-x * x);
            }
            const double fid = 0.5 * (1.0 + contrast);
            sum += fid;
            sumsq += fid * fid;
        }
        const double mean = sum / cfg.shots;
        const double var = std::max(0.0, sumsq / cfg.shots - mean * mean);
        res.points.push_back({tau, mean, std::sqrt(var / cfg.shots)});
    }

    // Gaussian fit on the contrast: ln C = ln A - (tau / tau_c)^2
    std::vector<double> x, y, w;
    for (const auto& p : res.points) {
        const double c = 2.0 * p.fidelity - 1.0;
        if (c <= 0.02) continue;
        x.push_back(p.tau_s * p.tau_s);
        y.push_back(std::log(c));
        const double sc = std::max(2.0 * p.err, 1e-9);
        w.push_back(c * c / (sc * sc));  // delta-method weight for ln C
    }
    if (x.size() >= 2) {
        const LinearFit f = weighted_linear_fit(x, y, w);
        if (f.slope < 0.0) {
            res.one_over_e_time_s = 1.0 / std::sqrt(-f.slope);
            res.fit_amplitude = std::exp(f.intercept);
        }
    }
    return res;
}

DecaySweepResult decay_rate_sweep(SweepVariable variable, const std::vector<double>& factors,
                                  const ShiftBudget& base, const NoiseSpec& noise,
                                  const EchoSchedule& schedule, const EchoConfig& cfg) {
    if (factors.size() < 4)
        throw std::invalid_argument("decay_rate_sweep: need at least 4 sweep values");

    DecaySweepResult out;
    const double sigma_ref = noise.kind == NoiseKind::shot_gaussian
                                 ? noise.sigma
                                 : (noise.anchors.empty() ? 1e-3 : noise.anchors[0].sigma);
    for (size_t i = 0; i < factors.size(); ++i) {
        const double f = factors[i];
        if (f <= 0.0)
            throw std::invalid_argument("decay_rate_sweep: factors must be positive");
        const ShiftBudget b = variable == SweepVariable::rabi ? base.scaled(f, 1.0)
                                                              : base.scaled(1.0, f);
        double rate = 0.0;
        if (sigma_ref > 0.0) {
            // center the wait grid on the predicted 1/e time
            const double tc = predict_coherence_time_s(b, sigma_ref, schedule.duty());
            std::vector<double> waits;
            for (double u = 0.3; u <= 1.51; u += 0.15) waits.push_back(u * tc);
            EchoConfig c = cfg;
            c.seed = derive_seed(cfg.seed, 0x5EED + i);
            const EchoResult echo = simulate_spin_echo(schedule, b, noise, waits, c);
            if (!echo.one_over_e_time_s)
                throw std::runtime_error("decay_rate_sweep: echo fit failed at factor " +
                                         std::to_string(f));
            rate = 1.0 / *echo.one_over_e_time_s;
        }
        out.points.push_back({f, rate});
    }

    // quadratic in the Rabi factor, or linear in the inverse detuning factor
    const int order = variable == SweepVariable::rabi ? 2 : 1;
    std::vector<double> xs;
    for (const auto& p : out.points)
        xs.push_back(variable == SweepVariable::rabi ? p.value : 1.0 / p.value);

    Eigen::MatrixXd design(out.points.size(), order + 1);
    Eigen::VectorXd rhs(out.points.size());
    for (size_t i = 0; i < out.points.size(); ++i) {
        double v = 1.0;
        for (int k = 0; k <= order; ++k) {
            design(static_cast<int>(i), k) = v;
            v *= xs[i];
        }
        rhs(static_cast<int>(i)) = out.points[i].rate_per_s;
    }
    Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd fit = design * coef;
    const double ybar = rhs.mean();
    const double ss_res = (rhs - fit).squaredNorm();
    const double ss_tot = (rhs.array() - ybar).matrix().squaredNorm();
    out.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    for (int k = 0; k <= order; ++k) out.fit_coeffs.push_back(coef(k));
    return out;
}

ScatterResult scatter_absorption(double wavelength_m, double spacing_m,
                                 double pulses_per_s) {
    if (spacing_m <= 0.0)
        throw std::invalid_argument("scatter_absorption: spacing must be > 0");
    const double reduced = wavelength_m / constants::two_pi;
    const double per_pulse =
        6.0 * constants::pi * reduced * reduced / (4.0 * constants::pi * spacing_m * spacing_m);
    return {per_pulse, per_pulse * pulses_per_s};
}

}  // namespace zcool

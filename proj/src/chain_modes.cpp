#include "zcool/chain_modes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace zcool {

void TrapConfig::validate() const {
    if (n_ions < 1) throw std::invalid_argument("trap.n_ions must be >= 1");
    if (axial_com_freq_hz <= 0 || radial_com_freq_hz <= 0)
        throw std::invalid_argument("trap frequencies must be > 0");
    if (n_ions > 1 && axial_com_freq_hz >= radial_com_freq_hz)
        throw std::invalid_argument(
            "trap.axial_com_freq_hz must be below radial_com_freq_hz (linear chain)");
    if (ion_mass_kg <= 0) throw std::invalid_argument("trap.ion_mass_kg must be > 0");
    if (laser_wavelength_m <= 0)
        throw std::invalid_argument("trap.laser_wavelength_m must be > 0");
}

std::vector<double> equilibrium_positions(const TrapConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_ions;
    if (n == 1) return {0.0};

    // uniform-spacing ansatz, scaled to the known n=2 spacing
    Eigen::VectorXd u(n);
    const double span = 0.62996052494743658 * 2.0 * std::pow(n / 2.0, 0.56);
    for (int i = 0; i < n; ++i)
        u[i] = -span / 2.0 + span * i / (n - 1.0);

    const int max_iter = 200;
    const double tol = 1e-12;
    double residual = 0.0;
    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::VectorXd f = u;
        Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d = u[i] - u[j];
                f[i] -= (d > 0 ? 1.0 : -1.0) / (d * d);
                const double c = 2.0 / std::pow(std::abs(d), 3);
                jac(i, i) += c;
                jac(i, j) -= c;
            }
        }
        residual = f.cwiseAbs().maxCoeff();
        if (residual < tol) break;
        Eigen::VectorXd step = jac.partialPivLu().solve(-f);
        // damp if the step would reorder ions
        double scale = 1.0;
        for (int k = 0; k < 8; ++k) {
            Eigen::VectorXd trial = u + scale * step;
            std::sort(trial.data(), trial.data() + n);
            bool ordered = true;
            for (int i = 1; i < n; ++i)
                if (trial[i] - trial[i - 1] < 1e-6) ordered = false;
            if (ordered) break;
            scale *= 0.5;
        }
        u += scale * step;
    }
    if (residual >= 1e-10)
        throw std::runtime_error("equilibrium_positions: Newton iteration did not converge, "
                                 "final residual " + std::to_string(residual));

    std::vector<double> out(u.data(), u.data() + n);
    std::sort(out.begin(), out.end());
    // symmetrize: positions are antisymmetric about the trap center
    for (int i = 0; i < n / 2; ++i) {
        const double v = 0.5 * (out[n - 1 - i] - out[i]);
        out[i] = -v;
        out[n - 1 - i] = v;
    }
    if (n % 2 == 1) out[n / 2] = 0.0;
    return out;
}

namespace {

// Dimensionless axial Hessian in units of M * omega_ax^2; COM eigenvalue 1.
Eigen::MatrixXd axial_hessian(const std::vector<double>& u) {
    const int n = static_cast<int>(u.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        a(i, i) = 1.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d3 = std::pow(std::abs(u[i] - u[j]), 3);
            a(i, i) += 2.0 / d3;
            a(i, j) = -2.0 / d3;
        }
    }
    return a;
}

// Transverse Hessian: alpha^2 on the diagonal minus half the interaction part.
Eigen::MatrixXd radial_hessian(const std::vector<double>& u, double alpha) {
    const int n = static_cast<int>(u.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        b(i, i) = alpha * alpha;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d3 = std::pow(std::abs(u[i] - u[j]), 3);
            b(i, i) -= 1.0 / d3;
            b(i, j) = 1.0 / d3;
        }
    }
    return b;
}

void fix_column_signs(Eigen::MatrixXd& v) {
    for (int m = 0; m < v.cols(); ++m) {
        double s = v.col(m).sum();
        if (std::abs(s) < 1e-9) {
            for (int i = 0; i < v.rows(); ++i) {
                if (std::abs(v(i, m)) > 1e-9) {
                    s = v(i, m);
                    break;
                }
            }
        }
        if (s < 0) v.col(m) = -v.col(m);
    }
}

}  // namespace

ModeStructure normal_modes(const TrapConfig& cfg, Axis axis) {
    const auto u = equilibrium_positions(cfg);
    const int n = cfg.n_ions;

    ModeStructure out;
    out.axis = axis;
    out.frequencies_hz.resize(n);
    out.participation.resize(n, n);

    if (axis == Axis::axial) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(axial_hessian(u));
        // ascending eigenvalues: COM (lambda = 1) first
        for (int m = 0; m < n; ++m)
            out.frequencies_hz[m] = cfg.axial_com_freq_hz * std::sqrt(es.eigenvalues()[m]);
        out.participation = es.eigenvectors();
    } else {
        const double alpha = cfg.radial_com_freq_hz / cfg.axial_com_freq_hz;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(radial_hessian(u, alpha));
        for (int m = 0; m < n; ++m) {
            const double mu = es.eigenvalues()[n - 1 - m];  // descending: COM first
            if (mu <= 0.0)
                throw std::runtime_error(
                    "normal_modes: radial mode " + std::to_string(n - 1 - m) +
                    " has negative squared frequency (zig-zag structural instability); "
                    "raise radial_com_freq_hz or lower axial_com_freq_hz");
            out.frequencies_hz[m] = cfg.axial_com_freq_hz * std::sqrt(mu);
            out.participation.col(m) = es.eigenvectors().col(n - 1 - m);
        }
    }
    fix_column_signs(out.participation);
    out.lamb_dicke = lamb_dicke_factors(cfg, out);
    return out;
}

double lamb_dicke_single(double freq_hz, double mass_kg, double wavelength_m,
                         double projection) {
    const double k = constants::two_pi / wavelength_m;
    const double omega = constants::two_pi * freq_hz;
    return k * projection * std::sqrt(constants::hbar / (2.0 * mass_kg * omega));
}

Eigen::MatrixXd lamb_dicke_factors(const TrapConfig& cfg, const ModeStructure& modes) {
    const int n = cfg.n_ions;
    const double proj =
        modes.axis == Axis::axial ? cfg.axial_projection : cfg.radial_projection;
    Eigen::MatrixXd eta(n, static_cast<int>(modes.frequencies_hz.size()));
    for (int m = 0; m < eta.cols(); ++m) {
        const double single =
            lamb_dicke_single(modes.frequencies_hz[m], cfg.ion_mass_kg,
                              cfg.laser_wavelength_m, proj);
        for (int i = 0; i < n; ++i) eta(i, m) = single * modes.participation(i, m);
    }
    return eta;
}

std::string mode_name(Axis axis, int mode, int n_ions) {
    if (mode == 0) return "com";
    if (mode == 1) return "tilt";
    if (axis == Axis::radial && mode == n_ions - 1) return "zigzag";
    return "order" + std::to_string(mode + 1);
}

}  // namespace zcool

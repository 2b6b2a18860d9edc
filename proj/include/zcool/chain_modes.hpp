#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "zcool/constants.hpp"

namespace zcool {

enum class Axis { axial, radial };

struct TrapConfig {
    int n_ions = 5;
    double axial_com_freq_hz = 330e3;
    double radial_com_freq_hz = 1.0e6;  // higher-frequency radial axis
    double ion_mass_kg = constants::yb171_mass_kg;
    double laser_wavelength_m = constants::quadrupole_wavelength_m;
    // k-vector projections of the 45-degree beam onto the trap axis and the
    // probed radial axis; axial/radial = 1.4 with the defaults.
    double axial_projection = 0.70710678118654752;
    double radial_projection = 0.5;

    void validate() const;
};

// Normal-mode structure of one chain axis. Mode index 0 is always the COM:
// axial frequencies are sorted ascending (COM lowest), radial descending
// (COM highest).
struct ModeStructure {
    Axis axis = Axis::radial;
    std::vector<double> frequencies_hz;  // one per mode, in the order above
    Eigen::MatrixXd participation;       // participation(ion, mode), orthonormal columns
    Eigen::MatrixXd lamb_dicke;          // eta(ion, mode)
};

// Dimensionless equilibrium positions (units of the Coulomb length scale),
// sorted ascending, antisymmetric about 0. Damped Newton from the
// uniform-spacing ansatz; residual < 1e-10 or throws with the residual.
std::vector<double> equilibrium_positions(const TrapConfig& cfg);

ModeStructure normal_modes(const TrapConfig& cfg, Axis axis);

// eta(ion, mode) = k * projection * sqrt(hbar / (2 M * 2pi nu_m)) * b(ion, mode)
Eigen::MatrixXd lamb_dicke_factors(const TrapConfig& cfg, const ModeStructure& modes);

// Single-ion Lamb-Dicke factor for a mode at nu_hz with the given projection.
double lamb_dicke_single(double freq_hz, double mass_kg, double wavelength_m,
                         double projection);

std::string mode_name(Axis axis, int mode, int n_ions);

}  // namespace zcool

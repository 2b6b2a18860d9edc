#pragma once

namespace zcool::constants {

inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double h_planck = 6.62607015e-34;   // J s
inline constexpr double k_boltzmann = 1.380649e-23;  // J/K
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg

// 171Yb+ defaults used throughout the toolkit
inline constexpr double yb171_mass_kg = 171.0 * atomic_mass_unit;
inline constexpr double quadrupole_wavelength_m = 435e-9;   // S1/2 <-> D3/2
inline constexpr double repump_emission_wavelength_m = 297e-9;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

}  // namespace zcool::constants

#include "trapsim/constants.hpp"

#include <string>

#include "trapsim/errors.hpp"

namespace trapsim::constants {

namespace {

constexpr Constant kRegistry[] = {
    {"k_boltzmann", k_boltzmann, "J/K", "exact", "SI defining constant"},
    {"planck_h", planck_h, "J s", "exact", "SI defining constant"},
    {"hbar", hbar, "J s", "exact", "h / 2 pi"},
    {"speed_of_light", speed_of_light, "m/s", "exact", "SI defining constant"},
    {"elementary_charge", elementary_charge, "C", "exact", "SI defining constant"},
    {"epsilon0", epsilon0, "F/m", "codata", "vacuum permittivity"},
    {"atomic_mass_unit", atomic_mass_unit, "kg", "codata", ""},
    {"coulomb_k", coulomb_k, "N m^2/C^2", "codata", "1/(4 pi eps0)"},

    {"mass_ca40", mass_ca40, "kg", "codata", "AME atomic mass, 40Ca"},
    {"mass_ca44", mass_ca44, "kg", "codata", "AME atomic mass, 44Ca"},
    {"abundance_ca40", abundance_ca40, "", "codata", "natural isotopic abundance"},
    {"abundance_ca44", abundance_ca44, "", "codata", "natural isotopic abundance"},

    {"lambda_423", lambda_423, "m", "measured", "Ca 4s2 -> 4s4p, first photoionization step"},
    {"lambda_397", lambda_397, "m", "measured", "Ca+ S1/2 -> P1/2 cooling line"},
    {"lambda_866", lambda_866, "m", "measured", "Ca+ D3/2 -> P1/2 repumper"},
    {"linewidth_423", linewidth_423, "Hz", "measured", "natural FWHM"},
    {"linewidth_397", linewidth_397, "Hz", "measured", "natural FWHM"},
    {"linewidth_866", linewidth_866, "Hz", "measured", "natural FWHM"},
    {"shift423_ca44", shift423_ca44, "Hz", "measured", "44Ca - 40Ca isotope shift, 423 nm"},
    {"shift397_ca44", shift397_ca44, "Hz", "measured", "44Ca - 40Ca isotope shift, 397 nm"},
    {"shift866_ca44", shift866_ca44, "Hz", "measured", "44Ca - 40Ca isotope shift, 866 nm"},

    {"oven_distance", oven_distance, "m", "measured", "oven mouth to trap hole"},
    {"aperture_side", aperture_side, "m", "measured", "square loading hole side"},
    {"oven_temperature", oven_temperature, "K", "measured", "typical operating point"},
    {"ca_vapor_a", ca_vapor_a, "", "derived", "log10(p/Pa) = A - B/T, solid Ca fit"},
    {"ca_vapor_b", ca_vapor_b, "K", "derived", "log10(p/Pa) = A - B/T, solid Ca fit"},
    {"beam_source_diameter", beam_source_diameter, "m", "measured",
     "emitting spot, from divergence inversion"},

    {"probe_power_423", probe_power_423, "W", "measured", "fluorescence probe"},
    {"probe_diameter_423", probe_diameter_423, "m", "measured", "fluorescence probe"},
    {"probe_crossing_423", probe_crossing_423, "rad", "derived", "perpendicular probe geometry"},

    {"c_geom_doppler", c_geom_doppler, "", "calibrated",
     "divergence -> Doppler width factor; anchored to 50.2 MHz at 2.54 deg, 573 m/s"},
    {"k_transit", k_transit, "", "derived",
     "transit width = k * v / beam radius, flat-top crossing"},

    {"coverage_gamma0", coverage_gamma0, "1/s", "calibrated",
     "per-coolant weakest-mode damping; with coverage_heating_rate tuned so 2 Ca-44 hold 4 Ca-40"},
    {"coverage_heating_rate", coverage_heating_rate, "1/s", "calibrated",
     "anomalous heating the coolants must beat; pair-tuned with coverage_gamma0"},
};

}  // namespace

std::span<const Constant> registry() { return kRegistry; }

double lookup(std::string_view name) {
  for (const auto& c : kRegistry)
    if (c.name == name) return c.value;
  throw config_error("unknown constant: " + std::string(name));
}

}  // namespace trapsim::constants

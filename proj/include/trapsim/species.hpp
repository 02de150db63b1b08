#pragma once

#include <string>
#include <vector>

#include "trapsim/constants.hpp"
#include "trapsim/errors.hpp"

namespace trapsim {

struct Species {
  std::string name;
  double mass = 0;    // kg
  double charge = 0;  // C

  bool operator==(const Species&) const = default;
};

inline Species ca40() {
  return {"Ca40", constants::mass_ca40, constants::elementary_charge};
}
inline Species ca44() {
  return {"Ca44", constants::mass_ca44, constants::elementary_charge};
}

// Per-isotope data used by the spectrum and selectivity models.
// Shifts are relative to Ca-40 (the reference isotope, all zero).
struct Isotope {
  std::string name;
  double mass = 0;        // kg
  double abundance = 0;   // fraction of natural calcium
  double shift_423 = 0;   // Hz
  double shift_397 = 0;   // Hz
  double shift_866 = 0;   // Hz

  Species species() const { return {name, mass, constants::elementary_charge}; }
};

struct IsotopeTable {
  std::vector<Isotope> isotopes;

  const Isotope& find(const std::string& name) const {
    for (const auto& iso : isotopes)
      if (iso.name == name) return iso;
    throw config_error("unknown isotope: " + name);
  }

  void validate() const {
    for (const auto& iso : isotopes) {
      if (iso.abundance < 0.0 || iso.abundance > 1.0)
        throw config_error("isotope " + iso.name + ": abundance outside [0,1]");
      if (iso.mass <= 0.0) throw config_error("isotope " + iso.name + ": non-positive mass");
      if (iso.name == "Ca40" && (iso.shift_423 != 0 || iso.shift_397 != 0 || iso.shift_866 != 0))
        throw config_error("Ca40 is the reference isotope; its shifts must be zero");
    }
  }

  static IsotopeTable natural_ca() {
    IsotopeTable t;
    t.isotopes.push_back({"Ca40", constants::mass_ca40, constants::abundance_ca40, 0, 0, 0});
    t.isotopes.push_back({"Ca44", constants::mass_ca44, constants::abundance_ca44,
                          constants::shift423_ca44, constants::shift397_ca44,
                          constants::shift866_ca44});
    return t;
  }
};

}  // namespace trapsim

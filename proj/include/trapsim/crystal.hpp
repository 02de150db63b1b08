#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "trapsim/species.hpp"

namespace trapsim::crystal {

// Harmonic trap seen by a reference ion: chain axis = z (weakest), radial x, y.
// The axial spring is electrostatic (mass independent as a stiffness); the
// radial springs are pseudopotential-dominated and scale as ref_mass / m.
struct HarmonicTrap {
  double omega_x = 0, omega_y = 0, omega_z = 0;  // rad/s for the reference mass
  double ref_mass = 0;                           // kg
  double charge = 0;                             // C

  void validate() const;
  // Spring constants (J/m^2) for an ion of the given mass.
  double k_axial() const;
  double k_radial_x(double mass) const;
  double k_radial_y(double mass) const;
  double length_scale() const;  // l^3 = q^2 / (4 pi eps0 k_axial)
};

struct Chain {
  HarmonicTrap trap;
  std::vector<Species> ions;   // order along the axis

  int size() const { return static_cast<int>(ions.size()); }
};

// Equilibrium axial positions (m), ascending, by damped Newton on the
// dimensionless force balance.
std::vector<double> equilibrium_positions(const Chain& chain);

struct ModeSet {
  // Mass-weighted normal modes along one Cartesian direction.
  Eigen::VectorXd frequencies;   // rad/s, ascending
  Eigen::MatrixXd vectors;       // column m = mode m, rows = ions (mass-weighted basis)
};

enum class Axis { X, Y, Z };

ModeSet normal_modes(const Chain& chain, Axis axis);

// Per-mode coverage of a coolant set: gamma_m = gamma0 * sum_{i coolant} b_im^2.
// Returns the minimum over modes of all three axes.
double mode_coverage(const Chain& chain, const std::vector<bool>& coolant, double gamma0);
std::vector<double> per_mode_coverage(const ModeSet& modes, const std::vector<bool>& coolant,
                                      double gamma0);

struct CoverageScan {
  int chain_size = 0;
  double best_min_coverage = 0;       // over coolant placements
  std::vector<bool> best_placement;
};

// Best placement of k coolant ions in a chain of N (target isotope elsewhere):
// maximize the minimum mode coverage. Exhaustive for N <= 12, greedy beyond.
CoverageScan best_coverage(const HarmonicTrap& trap, const Species& coolant,
                           const Species& target, int n_total, int n_coolant);

// Capacity scan: how many sympathetically held target ions a fixed number of
// coolant ions can keep cold. n counts target ions, so the chain has
// n + n_coolant ions; for each n the best coolant placement is taken and the
// chain counts as coolable iff its weakest mode is damped faster than the
// heating rate. n_max is the largest coolable n seen before the scan ends —
// at n_cap, or earlier at the linear-chain stability edge.
struct ChainCapacity {
  struct Entry {
    int n_targets = 0;
    int chain_size = 0;
    double min_damping = 0;       // 1/s, weakest mode of the best placement
    bool coolable = false;
    std::vector<bool> placement;  // coolant mask of the best placement
  };
  int n_max = 0;
  std::string limited_by;  // "coverage", "structure", or "scan-cap"
  std::vector<Entry> per_n;
};

ChainCapacity max_coolable_chain(const HarmonicTrap& trap, const Species& coolant, int n_coolant,
                                 const Species& target, double gamma0, double heating_rate,
                                 int n_cap = 12);

}  // namespace trapsim::crystal

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trapsim/crystal.hpp"
#include "trapsim/rng.hpp"
#include "trapsim/species.hpp"

namespace trapsim::cooldyn {

using Vec3 = Eigen::Vector3d;

// Doppler cooling laser: direction k_hat, saturation s, detuning from the
// addressed isotope's rest-frame resonance (Hz, red = negative).
struct CoolingLaser {
  Vec3 k_hat = Vec3(0, 0, -1);
  double wavelength = 0;       // m
  double linewidth_hz = 0;     // natural linewidth Gamma/2pi of the transition
  double saturation = 0;       // s0
  double detuning = 0;         // Hz
  std::string addressed;       // isotope name; empty = all ions

  void validate() const;
};

struct HeatingModel {
  double temperature_rate = 0;  // K/s per axis, electric-field noise proxy
};

struct SimOptions {
  double dt = 0;                // s; <=0 picks T_fastest/100 automatically
  long steps = 0;
  long record_every = 1;
  bool photon_recoil = true;    // sample discrete absorption/emission kicks
  unsigned long long seed = 1;
  unsigned stream = 0;
};

struct Trajectory {
  std::vector<double> time;                 // s
  std::vector<Eigen::MatrixX3d> positions;  // [frame](ion, axis), m
  std::vector<Eigen::MatrixX3d> velocities; // m/s
  std::vector<double> energy;               // total mechanical energy, J
  std::vector<double> scattered;            // photons per frame, addressed ions
};

struct SimReport {
  Trajectory traj;
  double final_temperature = 0;     // K, kinetic over last quarter
  double energy_drift_fraction = 0; // |mean(last 10%) - mean(first 10%)| / E(0)
  double total_scattered = 0;
  double dt_used = 0;
};

// Ions in the harmonic trap of `chain` with mutual Coulomb interaction,
// velocity Verlet. Optional laser applies stochastic photon kicks at the
// Poisson-sampled scattering rate with first-order Doppler shifts; optional
// heating applies Gaussian velocity kicks of variance kB * rate * dt / m.
class Simulator {
 public:
  Simulator(const crystal::Chain& chain, std::optional<CoolingLaser> laser,
            HeatingModel heating, const IsotopeTable& table = IsotopeTable::natural_ca());

  // Start from given positions/velocities (SI). Empty positions = equilibrium.
  SimReport run(const SimOptions& opts, Eigen::MatrixX3d positions = {},
                Eigen::MatrixX3d velocities = {}) const;

  // Thermal initial velocities at temperature T, ions at equilibrium.
  SimReport run_thermal(const SimOptions& opts, double temperature) const;

  double scattering_rate(const Vec3& velocity, const Species& ion,
                         const std::string& isotope_name) const;  // photons/s

  const crystal::Chain& chain() const { return chain_; }

 private:
  SimReport run_impl(const SimOptions& opts, Eigen::MatrixX3d x, Eigen::MatrixX3d v,
                     Philox& rng) const;

  crystal::Chain chain_;
  std::optional<CoolingLaser> laser_;
  HeatingModel heating_;
  IsotopeTable table_;
};

// Doppler temperature hbar * Gamma / (2 kB) for a transition linewidth in Hz.
double doppler_limit(double linewidth_hz);

// Capture + sympathetic-cooling protocol summary: a hot target ion joins a
// cold coolant, both are Doppler-cooled at fixed laser settings; reports time
// to reach the given energy threshold (J) or nullopt if not reached.
struct ProtocolResult {
  bool cooled = false;
  double time_to_threshold = 0;  // s
  double final_temperature = 0;  // K
  double total_scattered = 0;
  // The coolant held its own: its end-of-run temperature stayed below the
  // capture threshold instead of thermalizing up toward the injected energy.
  bool coolant_survived = false;
  double coolant_final_temperature = 0;  // K
};

ProtocolResult sympathetic_capture(const crystal::HarmonicTrap& trap, const Species& coolant,
                                   const Species& target, double target_initial_temperature,
                                   const CoolingLaser& laser, const HeatingModel& heating,
                                   double threshold_temperature, const SimOptions& opts,
                                   const IsotopeTable& table = IsotopeTable::natural_ca());

}  // namespace trapsim::cooldyn

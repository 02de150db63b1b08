#pragma once

#include <string>
#include <vector>

#include "trapsim/rng.hpp"
#include "trapsim/species.hpp"

namespace trapsim::spectra {

// Two-level saturation intensity pi h c Gamma / (3 lambda^3), W/m^2.
double saturation_intensity(double wavelength, double linewidth_hz);

struct LaserParams {
  double wavelength = 0;      // m
  double power = 0;           // W
  double beam_diameter = 0;   // m, intensity taken uniform over the disk
  double linewidth_hz = 0;    // natural linewidth (Hz) of the driven transition

  void validate() const;
  double intensity() const;            // W/m^2
  double saturation_parameter() const; // s = I / I_sat
};

struct BeamConditions {
  double speed = 0;            // m/s, most probable beam speed
  double divergence_full = 0;  // rad, full divergence angle
  double crossing_angle = 0;   // rad, laser vs atomic beam (pi/2 = perpendicular)
};

// Additive Lorentzian width budget (Hz FWHM): natural power-broadened core
// plus transit broadening K_tt * v / (d/2) / (2 pi).
struct WidthBudget {
  double natural = 0;
  double power_broadened = 0;  // Gamma * sqrt(1 + s), includes natural
  double transit = 0;
  double lorentzian_total = 0; // power_broadened + transit
  double doppler_gaussian = 0; // residual Doppler from divergence
};

WidthBudget width_budget(const LaserParams& laser, const BeamConditions& beam);

// Residual first-order Doppler width (Gaussian FWHM, Hz) for a diverging beam
// probed near-perpendicular: C_geom * 2 (v/lambda) sin(theta_full/2).
double doppler_fwhm(double speed, double wavelength, double divergence_full);

struct SpectrumLine {
  std::string isotope;
  double center = 0;     // Hz, offset of line center in the scan frame
  double amplitude = 0;  // peak-proportional weight (abundance)
};

struct SpectrumModel {
  std::vector<SpectrumLine> lines;
  double gaussian_fwhm = 0;    // Hz
  double lorentzian_fwhm = 0;  // Hz
  double baseline = 0;

  double evaluate(double detuning) const;
};

// Fluorescence model for the natural isotope mix on the 423 nm line, detuning
// measured from the reference isotope's line center.
SpectrumModel natural_spectrum(const IsotopeTable& table, const LaserParams& laser,
                               const BeamConditions& beam);

struct SampledSpectrum {
  std::vector<double> detuning;  // Hz
  std::vector<double> signal;
};

SampledSpectrum synthesize(const SpectrumModel& model, double f_min, double f_max, int n_points,
                           double noise_rms, Philox& rng);

// Probability that the first loaded ion is the target isotope when the
// photoionization laser sits at the given detuning: relative excitation rates
// weighted by abundance.
struct SelectivityResult {
  std::vector<std::string> isotope;
  std::vector<double> probability;
  double target_probability = 0;
};

SelectivityResult loading_selectivity(const IsotopeTable& table, const SpectrumModel& model,
                                      double detuning, const std::string& target);

// Expected loading-time ratio non-target/target at the given detuning
// (inverse rate ratio at fixed flux).
double loading_time_ratio(const IsotopeTable& table, const SpectrumModel& model, double detuning,
                          const std::string& target, const std::string& competitor);

}  // namespace trapsim::spectra

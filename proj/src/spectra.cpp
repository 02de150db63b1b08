#include "trapsim/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trapsim/constants.hpp"
#include "trapsim/errors.hpp"
#include "trapsim/voigt.hpp"

namespace trapsim::spectra {

namespace c = trapsim::constants;

double saturation_intensity(double wavelength, double linewidth_hz) {
  if (wavelength <= 0 || linewidth_hz <= 0)
    throw ::trapsim::domain_error("saturation_intensity: wavelength and linewidth must be > 0");
  const double gamma = 2 * M_PI * linewidth_hz;  // rad/s
  return M_PI * c::planck_h * c::speed_of_light * gamma / (3 * std::pow(wavelength, 3));
}

void LaserParams::validate() const {
  if (wavelength <= 0 || power <= 0 || beam_diameter <= 0 || linewidth_hz <= 0)
    throw ::trapsim::domain_error("laser parameters must all be > 0");
}

double LaserParams::intensity() const {
  validate();
  const double r = beam_diameter / 2;
  return power / (M_PI * r * r);
}

double LaserParams::saturation_parameter() const {
  return intensity() / saturation_intensity(wavelength, linewidth_hz);
}

double doppler_fwhm(double speed, double wavelength, double divergence_full) {
  if (speed < 0 || wavelength <= 0 || divergence_full < 0)
    throw ::trapsim::domain_error("doppler_fwhm: bad arguments");
  return c::c_geom_doppler * 2.0 * (speed / wavelength) * std::sin(divergence_full / 2);
}

WidthBudget width_budget(const LaserParams& laser, const BeamConditions& beam) {
  laser.validate();
  if (beam.speed <= 0) throw ::trapsim::domain_error("width_budget: beam speed must be > 0");
  WidthBudget w;
  w.natural = laser.linewidth_hz;
  w.power_broadened = laser.linewidth_hz * std::sqrt(1 + laser.saturation_parameter());
  w.transit = c::k_transit * beam.speed / (laser.beam_diameter / 2);
  w.lorentzian_total = w.power_broadened + w.transit;
  w.doppler_gaussian = doppler_fwhm(beam.speed, laser.wavelength, beam.divergence_full);
  return w;
}

double SpectrumModel::evaluate(double detuning) const {
  double s = baseline;
  for (const auto& line : lines)
    s += line.amplitude * voigt::voigt_profile(detuning - line.center, gaussian_fwhm,
                                               lorentzian_fwhm);
  return s;
}

SpectrumModel natural_spectrum(const IsotopeTable& table, const LaserParams& laser,
                               const BeamConditions& beam) {
  table.validate();
  const WidthBudget w = width_budget(laser, beam);
  // Non-perpendicular crossing shifts every line by the mean first-order
  // Doppler term; the divergence width already sits in the Gaussian part.
  const double common_shift =
      (beam.speed / laser.wavelength) * std::cos(beam.crossing_angle);

  SpectrumModel model;
  model.gaussian_fwhm = w.doppler_gaussian;
  model.lorentzian_fwhm = w.lorentzian_total;
  for (const auto& iso : table.isotopes)
    model.lines.push_back({iso.name, iso.shift_423 + common_shift, iso.abundance});
  return model;
}

SampledSpectrum synthesize(const SpectrumModel& model, double f_min, double f_max, int n_points,
                           double noise_rms, Philox& rng) {
  if (!(f_max > f_min) || n_points < 2)
    throw ::trapsim::domain_error("synthesize: need f_max > f_min and n_points >= 2");
  if (noise_rms < 0) throw ::trapsim::domain_error("synthesize: noise_rms must be >= 0");
  SampledSpectrum out;
  out.detuning.resize(n_points);
  out.signal.resize(n_points);
  for (int i = 0; i < n_points; ++i) {
    out.detuning[i] = f_min + (f_max - f_min) * i / (n_points - 1);
    out.signal[i] = model.evaluate(out.detuning[i]);
    if (noise_rms > 0) out.signal[i] += noise_rms * rng.normal();
  }
  return out;
}

SelectivityResult loading_selectivity(const IsotopeTable& table, const SpectrumModel& model,
                                      double detuning, const std::string& target) {
  table.validate();
  SelectivityResult out;
  double total = 0;
  for (const auto& line : model.lines) {
    const double rate = line.amplitude * voigt::voigt_profile(detuning - line.center,
                                                              model.gaussian_fwhm,
                                                              model.lorentzian_fwhm);
    out.isotope.push_back(line.isotope);
    out.probability.push_back(rate);
    total += rate;
  }
  if (!(total > 0)) throw ::trapsim::domain_error("loading_selectivity: zero total rate");
  bool found = false;
  for (size_t i = 0; i < out.isotope.size(); ++i) {
    out.probability[i] /= total;
    if (out.isotope[i] == target) {
      out.target_probability = out.probability[i];
      found = true;
    }
  }
  if (!found)
    throw ::trapsim::domain_error("loading_selectivity: target '" + target +
                                  "' not in the line list");
  return out;
}

double loading_time_ratio(const IsotopeTable& table, const SpectrumModel& model, double detuning,
                          const std::string& target, const std::string& competitor) {
  const SelectivityResult sel = loading_selectivity(table, model, detuning, target);
  double p_t = -1, p_c = -1;
  for (size_t i = 0; i < sel.isotope.size(); ++i) {
    if (sel.isotope[i] == target) p_t = sel.probability[i];
    if (sel.isotope[i] == competitor) p_c = sel.probability[i];
  }
  if (p_c < 0)
    throw ::trapsim::domain_error("loading_time_ratio: competitor '" + competitor +
                                  "' not in the line list");
  if (!(p_c > 0)) return std::numeric_limits<double>::infinity();
  return p_t / p_c;  // expected time for competitor / time for target
}

}  // namespace trapsim::spectra

#include "trapsim/beamline.hpp"

#include <cmath>

#include "trapsim/constants.hpp"
#include "trapsim/errors.hpp"

namespace trapsim::beamline {

namespace c = trapsim::constants;

double divergence_angle(double r_source, double a_half, double d) {
  if (r_source < 0 || a_half <= 0 || d <= 0)
    throw ::trapsim::domain_error("divergence_angle: need r_source >= 0, a_half > 0, d > 0");
  return 2.0 * std::atan((r_source + a_half) / d);
}

double source_radius_for_divergence(double theta_full, double a_half, double d) {
  if (theta_full <= 0 || a_half <= 0 || d <= 0)
    throw ::trapsim::domain_error("source_radius_for_divergence: all arguments must be > 0");
  const double r = d * std::tan(theta_full / 2) - a_half;
  if (r < 0)
    throw ::trapsim::domain_error(
        "requested divergence is below the point-source limit for this geometry");
  return r;
}

double beam_speed_pdf(double v, double mass, double temperature) {
  if (v < 0) return 0;
  const double alpha = mass / (2 * c::k_boltzmann * temperature);
  // normalization: integral v^3 exp(-alpha v^2) dv = 1/(2 alpha^2)
  return 2 * alpha * alpha * v * v * v * std::exp(-alpha * v * v);
}

double beam_speed_cdf(double v, double mass, double temperature) {
  if (v <= 0) return 0;
  const double alpha = mass / (2 * c::k_boltzmann * temperature);
  const double av2 = alpha * v * v;
  return 1.0 - std::exp(-av2) * (1.0 + av2);
}

double beam_most_probable_speed(double mass, double temperature) {
  return std::sqrt(3 * c::k_boltzmann * temperature / mass);
}

double beam_mean_speed(double mass, double temperature) {
  return std::sqrt(9 * M_PI * c::k_boltzmann * temperature / (8 * mass));
}

double vapor_pressure(double temperature) {
  if (temperature < c::ca_vapor_tmin || temperature > c::ca_vapor_tmax)
    throw ::trapsim::domain_error("vapor_pressure: fit valid for " +
                                  std::to_string(c::ca_vapor_tmin) + ".." +
                                  std::to_string(c::ca_vapor_tmax) + " K, got " +
                                  std::to_string(temperature));
  return std::pow(10.0, c::ca_vapor_a - c::ca_vapor_b / temperature);
}

void BeamGeometry::validate() const {
  if (source_radius < 0 || aperture_half <= 0 || distance <= 0)
    throw ::trapsim::domain_error(
        "beam geometry: need source_radius >= 0, aperture_half > 0, distance > 0");
}

BeamSampler::BeamSampler(const BeamGeometry& geom, double mass, double temperature)
    : geom_(geom), mass_(mass), temperature_(temperature) {
  geom_.validate();
  if (mass <= 0 || temperature <= 0)
    throw ::trapsim::domain_error("beam sampler: mass and temperature must be > 0");

  // Inverse CDF at uniform probability knots, found by bisection on the
  // closed-form CDF once at construction.
  constexpr int kKnots = 4096;
  cdf_grid_.resize(kKnots + 1);
  const double vmax = 8 * beam_most_probable_speed(mass, temperature);
  for (int i = 0; i <= kKnots; ++i) {
    const double u = static_cast<double>(i) / kKnots;
    double lo = 0, hi = vmax;
    for (int it = 0; it < 64; ++it) {
      const double mid = 0.5 * (lo + hi);
      (beam_speed_cdf(mid, mass, temperature) < u ? lo : hi) = mid;
    }
    cdf_grid_[i] = 0.5 * (lo + hi);
  }
  cdf_grid_.front() = 0;
}

double BeamSampler::draw_speed(Philox& rng) const {
  const double u = rng.uniform() * (cdf_grid_.size() - 1);
  const size_t i = std::min(static_cast<size_t>(u), cdf_grid_.size() - 2);
  const double f = u - static_cast<double>(i);
  return cdf_grid_[i] + f * (cdf_grid_[i + 1] - cdf_grid_[i]);
}

BeamSample BeamSampler::draw(Philox& rng) const {
  // Uniform point on the source disk, uniform point in the square aperture:
  // the chord fixes the direction; speed rides along it.
  const double rho = geom_.source_radius * std::sqrt(rng.uniform());
  const double phi = rng.uniform(0, 2 * M_PI);
  const Eigen::Vector2d src(rho * std::cos(phi), rho * std::sin(phi));
  const Eigen::Vector2d exit(rng.uniform(-geom_.aperture_half, geom_.aperture_half),
                             rng.uniform(-geom_.aperture_half, geom_.aperture_half));

  Eigen::Vector3d dir(exit.x() - src.x(), exit.y() - src.y(), geom_.distance);
  dir.normalize();
  BeamSample s;
  s.velocity = draw_speed(rng) * dir;
  s.exit_offset = exit;
  return s;
}

}  // namespace trapsim::beamline

#pragma once

#include <Eigen/Core>

#include "trapsim/rng.hpp"

namespace trapsim::beamline {

// Effusive-beam geometry: circular source of radius r_source a distance d
// below a square aperture of half-side a_half. Angles are full divergence.
double divergence_angle(double r_source, double a_half, double d);  // rad
// Inverse of the above in r_source: source radius reproducing a measured
// full divergence for fixed aperture and distance.
double source_radius_for_divergence(double theta_full, double a_half, double d);

// Flux-weighted Maxwell-Boltzmann speed distribution f(v) ~ v^3 exp(-m v^2 / 2 k T).
double beam_speed_pdf(double v, double mass, double temperature);
double beam_speed_cdf(double v, double mass, double temperature);  // closed form
double beam_most_probable_speed(double mass, double temperature);  // sqrt(3 k T / m)
double beam_mean_speed(double mass, double temperature);

// Ca vapor pressure, Pa, from log10(p/Pa) = A - B/T. Valid 450..700 K.
double vapor_pressure(double temperature);

struct BeamSample {
  Eigen::Vector3d velocity;       // m/s; +z = source -> aperture axis, x/y transverse
  Eigen::Vector2d exit_offset;    // m, position in the aperture plane
};

struct BeamGeometry {
  double source_radius = 0;   // m
  double aperture_half = 0;   // m, half-side of square exit hole
  double distance = 0;        // m, source plane to aperture plane

  void validate() const;
  double full_divergence() const { return divergence_angle(source_radius, aperture_half, distance); }
};

class BeamSampler {
 public:
  BeamSampler(const BeamGeometry& geom, double mass, double temperature);

  // Speed from the flux-weighted distribution by tabulated inverse CDF;
  // direction from a uniformly drawn source point to a uniformly drawn
  // aperture point (rejection-free ray construction).
  BeamSample draw(Philox& rng) const;
  double draw_speed(Philox& rng) const;

  const BeamGeometry& geometry() const { return geom_; }

 private:
  BeamGeometry geom_;
  double mass_, temperature_;
  std::vector<double> cdf_grid_;   // speeds at uniform CDF knots
};

}  // namespace trapsim::beamline

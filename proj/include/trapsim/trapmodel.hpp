#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "trapsim/errors.hpp"
#include "trapsim/species.hpp"

namespace trapsim::trapmodel {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rectangular electrode patch in the plane z = 0. The gapless-plane model
// treats everything outside the listed patches as grounded conductor.
// sign = -1 marks a cutout: the patch area is removed from the like-labeled
// electrode and held at ground (the through-hole model).
struct RectPatch {
  std::string label;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;  // m
  int sign = +1;

  double area() const { return (x2 - x1) * (y2 - y1); }
  bool contains(const RectPatch& inner) const {
    return inner.x1 >= x1 && inner.x2 <= x2 && inner.y1 >= y1 && inner.y2 <= y2;
  }
};

struct ElectrodeLayout {
  std::vector<RectPatch> patches;
  double hole_x = 0, hole_y = 0;  // m

  void validate() const;
  std::vector<std::string> dc_labels() const;  // unique non-RF, non-cutout labels
  ElectrodeLayout without_cutouts() const;
  // Same layout with every cutout replaced by a square of the given side
  // centered on (hole_x, hole_y). side = 0 removes the hole entirely.
  ElectrodeLayout with_hole_size(double side) const;
  bool mirror_symmetric_x(double tol = 1e-12) const;
};

struct TrapDrive {
  double rf_voltage = 0;  // V, amplitude
  double rf_omega = 0;    // rad/s
  std::map<std::string, double> dc_voltages;

  // Every DC label present, defaulting absent ones to 0; unknown labels rejected.
  void validate_against(const ElectrodeLayout& layout) const;
  TrapDrive with_defaults(const ElectrodeLayout& layout) const;
};

struct SecularResult {
  Vec3 center = Vec3::Zero();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // rad/s, ascending eigenvalue order
  Mat3 axes = Mat3::Identity();                     // columns = principal axes
  Mat3 hessian = Mat3::Zero();                      // J/m^2, of the total potential
  double xz_rotation_deg = 0;                       // x-like axis vs surface x axis
};

// Dimensionless basis potential of a unit-voltage patch in a grounded plane:
// the solid angle the patch subtends from p, divided by 2*pi, times sign.
double patch_potential(const RectPatch& patch, const Vec3& p);
Vec3 patch_gradient(const RectPatch& patch, const Vec3& p);    // 1/m
Mat3 patch_hessian(const RectPatch& patch, const Vec3& p);     // 1/m^2

// DC potential in volts. Cutouts subtract their patch's contribution at the
// electrode's voltage (grounded-aperture hole model).
double dc_potential(const ElectrodeLayout&, const TrapDrive&, const Vec3& p);
Vec3 dc_gradient(const ElectrodeLayout&, const TrapDrive&, const Vec3& p);
Mat3 dc_hessian(const ElectrodeLayout&, const TrapDrive&, const Vec3& p);

// RF basis: potential per volt of RF amplitude (label "RF").
double rf_basis_potential(const ElectrodeLayout&, const Vec3& p);
Vec3 rf_basis_gradient(const ElectrodeLayout&, const Vec3& p);
Mat3 rf_basis_hessian(const ElectrodeLayout&, const Vec3& p);

// Time-averaged pseudopotential q^2 |grad V_rf|^2 / (4 m Omega^2), joules.
double pseudopotential(const ElectrodeLayout&, const TrapDrive&, double mass, double charge,
                       const Vec3& p);
Vec3 pseudopotential_gradient(const ElectrodeLayout&, const TrapDrive&, double mass,
                              double charge, const Vec3& p);

// Total trap energy for the ion: pseudopotential + q * V_dc, joules.
double total_potential(const ElectrodeLayout&, const TrapDrive&, double mass, double charge,
                       const Vec3& p);
Vec3 total_gradient(const ElectrodeLayout&, const TrapDrive&, double mass, double charge,
                    const Vec3& p);
// Central finite differences of the analytic gradient, symmetrized.
Mat3 total_hessian(const ElectrodeLayout&, const TrapDrive&, double mass, double charge,
                   const Vec3& p, double step = 2e-9);

struct NewtonOptions {
  int max_iterations = 120;
  // |grad| threshold as a fraction of charge * (1 V / 100 um)
  double grad_tol_fraction = 1e-12;
};

Vec3 find_trap_center(const ElectrodeLayout&, const TrapDrive&, const Species&,
                      const Vec3& initial_guess, const NewtonOptions& = {});

SecularResult secular_analysis(const ElectrodeLayout&, const TrapDrive&, const Species&,
                               const Vec3& initial_guess, const NewtonOptions& = {});

// Height of the escape barrier straight above the trap center, joules:
// max over z > z_center of U_total minus U_total at the center. The vertical
// is the shallow direction of a surface trap, so this is the trap depth that
// an injected atom's kinetic energy is compared against.
double vertical_trap_depth(const ElectrodeLayout&, const TrapDrive&, const Species&,
                           const Vec3& center);

// Max |V_with_hole - V_without_hole| over a 50 um cube centered on the hole
// axis at the given height, for each hole size. Monotone in hole size.
std::vector<std::pair<double, double>> hole_distortion_scan(const ElectrodeLayout&,
                                                            const TrapDrive&,
                                                            const std::vector<double>& hole_sizes,
                                                            double height);

}  // namespace trapsim::trapmodel

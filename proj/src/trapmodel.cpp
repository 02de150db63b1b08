#include "trapsim/trapmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "trapsim/constants.hpp"

namespace trapsim::trapmodel {

namespace {

constexpr double kInv2Pi = 0.15915494309189533577;

// One corner term of the gapless-plane solid-angle sum:
// F(a,b,z) = atan(a b / (z r)), r = sqrt(a^2+b^2+z^2).
// Partials are exact; Sa = a^2+z^2 and Sb = b^2+z^2 never vanish for z > 0.
struct Corner {
  double F, Fa, Fb, Fz;
  double Faa, Fab, Faz, Fbb, Fbz, Fzz;
};

inline Corner corner_terms(double a, double b, double z) {
  const double r2 = a * a + b * b + z * z;
  const double r = std::sqrt(r2);
  const double Sa = a * a + z * z;
  const double Sb = b * b + z * z;
  const double ab = a * b;

  Corner c;
  c.F = std::atan2(ab, z * r);  // atan2 keeps the branch right for large |ab|
  c.Fa = b * z / (r * Sa);
  c.Fb = a * z / (r * Sb);
  c.Fz = -ab * (r2 + z * z) / (r * Sa * Sb);

  const double r3 = r * r2;
  c.Faa = -ab * z * (Sa + 2 * r2) / (r3 * Sa * Sa);
  c.Fbb = -ab * z * (Sb + 2 * r2) / (r3 * Sb * Sb);
  c.Fab = z / r3;
  c.Faz = b * (Sa * (a * a + b * b) - 2 * z * z * r2) / (r3 * Sa * Sa);
  c.Fbz = a * (Sb * (a * a + b * b) - 2 * z * z * r2) / (r3 * Sb * Sb);
  c.Fzz = -(ab * z / (r * Sa * Sb)) * (4.0 - (r2 + z * z) * (1.0 / r2 + 2.0 / Sa + 2.0 / Sb));
  return c;
}

inline void require_above_plane(const Vec3& p) {
  if (!(p.z() > 0))
    throw ::trapsim::domain_error("field point must lie above the electrode plane (z > 0), got z = " +
                                  std::to_string(p.z()));
}

template <typename Fn>
void for_corners(const RectPatch& patch, const Vec3& p, Fn&& fn) {
  const double xs[2] = {patch.x1, patch.x2};
  const double ys[2] = {patch.y1, patch.y2};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double s = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      fn(s, xs[i] - p.x(), ys[j] - p.y());
    }
}

bool overlap_open(const RectPatch& u, const RectPatch& v) {
  return u.x1 < v.x2 && v.x1 < u.x2 && u.y1 < v.y2 && v.y1 < u.y2;
}

}  // namespace

void ElectrodeLayout::validate() const {
  std::vector<std::string> errs;
  for (const auto& p : patches) {
    if (p.label.empty()) errs.push_back("patch with empty label");
    if (!(p.x2 > p.x1) || !(p.y2 > p.y1))
      errs.push_back("patch '" + p.label + "' has non-positive extent");
    if (p.sign != 1 && p.sign != -1)
      errs.push_back("patch '" + p.label + "' has sign " + std::to_string(p.sign));
  }
  for (size_t i = 0; i < patches.size(); ++i)
    for (size_t j = i + 1; j < patches.size(); ++j)
      if (patches[i].sign == patches[j].sign && overlap_open(patches[i], patches[j]))
        errs.push_back("patches '" + patches[i].label + "' and '" + patches[j].label +
                       "' overlap");
  for (const auto& c : patches) {
    if (c.sign != -1) continue;
    bool housed = false;
    for (const auto& p : patches)
      if (p.sign == +1 && p.label == c.label && p.contains(c)) housed = true;
    if (!housed)
      errs.push_back("cutout '" + c.label + "' is not inside an electrode of the same label");
  }
  if (!errs.empty()) {
    std::ostringstream os;
    os << "invalid layout (" << errs.size() << " problem" << (errs.size() > 1 ? "s" : "") << "):";
    for (const auto& e : errs) os << "\n  - " << e;
    throw structural_error(os.str());
  }
}

std::vector<std::string> ElectrodeLayout::dc_labels() const {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& p : patches)
    if (p.sign == +1 && p.label != "RF" && seen.insert(p.label).second) out.push_back(p.label);
  return out;
}

ElectrodeLayout ElectrodeLayout::without_cutouts() const {
  ElectrodeLayout out = *this;
  out.patches.erase(std::remove_if(out.patches.begin(), out.patches.end(),
                                   [](const RectPatch& p) { return p.sign == -1; }),
                    out.patches.end());
  return out;
}

ElectrodeLayout ElectrodeLayout::with_hole_size(double side) const {
  if (side < 0) throw ::trapsim::domain_error("hole side must be >= 0");
  std::string label;
  for (const auto& p : patches)
    if (p.sign == -1) {
      label = p.label;
      break;
    }
  ElectrodeLayout out = without_cutouts();
  if (side == 0) return out;
  if (label.empty()) {
    for (const auto& p : out.patches)
      if (p.sign == +1 && p.x1 < hole_x && hole_x < p.x2 && p.y1 < hole_y && hole_y < p.y2)
        label = p.label;
    if (label.empty())
      throw structural_error("no electrode under the hole center to cut the hole from");
  }
  const double h = side / 2;
  out.patches.push_back({label, hole_x - h, hole_x + h, hole_y - h, hole_y + h, -1});
  out.validate();
  return out;
}

bool ElectrodeLayout::mirror_symmetric_x(double tol) const {
  auto mirrored = [&](const RectPatch& p) {
    RectPatch m = p;
    m.x1 = 2 * hole_x - p.x2;
    m.x2 = 2 * hole_x - p.x1;
    return m;
  };
  std::vector<bool> used(patches.size(), false);
  for (size_t i = 0; i < patches.size(); ++i) {
    const RectPatch m = mirrored(patches[i]);
    bool found = false;
    for (size_t j = 0; j < patches.size(); ++j) {
      if (used[j] || patches[j].sign != m.sign) continue;
      if (std::abs(patches[j].x1 - m.x1) < tol && std::abs(patches[j].x2 - m.x2) < tol &&
          std::abs(patches[j].y1 - m.y1) < tol && std::abs(patches[j].y2 - m.y2) < tol) {
        used[j] = found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

void TrapDrive::validate_against(const ElectrodeLayout& layout) const {
  const auto labels = layout.dc_labels();
  std::vector<std::string> errs;
  for (const auto& [label, v] : dc_voltages) {
    (void)v;
    if (std::find(labels.begin(), labels.end(), label) == labels.end())
      errs.push_back("dc voltage for unknown electrode '" + label + "'");
  }
  if (rf_voltage < 0) errs.push_back("rf_voltage must be >= 0");
  if (rf_voltage > 0 && !(rf_omega > 0)) errs.push_back("rf_omega must be > 0 when RF is driven");
  if (!errs.empty()) {
    std::ostringstream os;
    os << "invalid drive:";
    for (const auto& e : errs) os << "\n  - " << e;
    throw config_error(os.str());
  }
}

TrapDrive TrapDrive::with_defaults(const ElectrodeLayout& layout) const {
  validate_against(layout);
  TrapDrive out = *this;
  for (const auto& label : layout.dc_labels())
    out.dc_voltages.emplace(label, 0.0);  // no-op where already set
  return out;
}

double patch_potential(const RectPatch& patch, const Vec3& p) {
  require_above_plane(p);
  double sum = 0;
  for_corners(patch, p, [&](double s, double a, double b) {
    sum += s * corner_terms(a, b, p.z()).F;
  });
  return patch.sign * kInv2Pi * sum;
}

Vec3 patch_gradient(const RectPatch& patch, const Vec3& p) {
  require_above_plane(p);
  Vec3 g = Vec3::Zero();
  for_corners(patch, p, [&](double s, double a, double b) {
    const Corner c = corner_terms(a, b, p.z());
    g.x() += -s * c.Fa;
    g.y() += -s * c.Fb;
    g.z() += s * c.Fz;
  });
  return patch.sign * kInv2Pi * g;
}

Mat3 patch_hessian(const RectPatch& patch, const Vec3& p) {
  require_above_plane(p);
  Mat3 h = Mat3::Zero();
  for_corners(patch, p, [&](double s, double a, double b) {
    const Corner c = corner_terms(a, b, p.z());
    h(0, 0) += s * c.Faa;
    h(1, 1) += s * c.Fbb;
    h(2, 2) += s * c.Fzz;
    h(0, 1) += s * c.Fab;
    h(0, 2) += -s * c.Faz;
    h(1, 2) += -s * c.Fbz;
  });
  h(1, 0) = h(0, 1);
  h(2, 0) = h(0, 2);
  h(2, 1) = h(1, 2);
  return patch.sign * kInv2Pi * h;
}

namespace {

template <typename Per>
void for_dc(const ElectrodeLayout& layout, const TrapDrive& drive, Per&& per) {
  for (const auto& p : layout.patches) {
    if (p.label == "RF") continue;
    const auto it = drive.dc_voltages.find(p.label);
    const double v = (it == drive.dc_voltages.end()) ? 0.0 : it->second;
    if (v != 0.0) per(p, v);
  }
}

}  // namespace

double dc_potential(const ElectrodeLayout& layout, const TrapDrive& drive, const Vec3& p) {
  double v = 0;
  for_dc(layout, drive, [&](const RectPatch& patch, double volts) {
    v += volts * patch_potential(patch, p);
  });
  return v;
}

Vec3 dc_gradient(const ElectrodeLayout& layout, const TrapDrive& drive, const Vec3& p) {
  Vec3 g = Vec3::Zero();
  for_dc(layout, drive, [&](const RectPatch& patch, double volts) {
    g += volts * patch_gradient(patch, p);
  });
  return g;
}

Mat3 dc_hessian(const ElectrodeLayout& layout, const TrapDrive& drive, const Vec3& p) {
  Mat3 h = Mat3::Zero();
  for_dc(layout, drive, [&](const RectPatch& patch, double volts) {
    h += volts * patch_hessian(patch, p);
  });
  return h;
}

double rf_basis_potential(const ElectrodeLayout& layout, const Vec3& p) {
  double v = 0;
  for (const auto& patch : layout.patches)
    if (patch.label == "RF") v += patch_potential(patch, p);
  return v;
}

Vec3 rf_basis_gradient(const ElectrodeLayout& layout, const Vec3& p) {
  Vec3 g = Vec3::Zero();
  for (const auto& patch : layout.patches)
    if (patch.label == "RF") g += patch_gradient(patch, p);
  return g;
}

Mat3 rf_basis_hessian(const ElectrodeLayout& layout, const Vec3& p) {
  Mat3 h = Mat3::Zero();
  for (const auto& patch : layout.patches)
    if (patch.label == "RF") h += patch_hessian(patch, p);
  return h;
}

namespace {

double pseudo_kappa(const TrapDrive& drive, double mass, double charge) {
  if (!(drive.rf_omega > 0)) throw ::trapsim::domain_error("rf_omega must be > 0");
  const double qv = charge * drive.rf_voltage;
  return qv * qv / (4.0 * mass * drive.rf_omega * drive.rf_omega);
}

}  // namespace

double pseudopotential(const ElectrodeLayout& layout, const TrapDrive& drive, double mass,
                       double charge, const Vec3& p) {
  const Vec3 g = rf_basis_gradient(layout, p);
  return pseudo_kappa(drive, mass, charge) * g.squaredNorm();
}

Vec3 pseudopotential_gradient(const ElectrodeLayout& layout, const TrapDrive& drive, double mass,
                              double charge, const Vec3& p) {
  const Vec3 g = rf_basis_gradient(layout, p);
  const Mat3 h = rf_basis_hessian(layout, p);
  return 2.0 * pseudo_kappa(drive, mass, charge) * (h * g);
}

double total_potential(const ElectrodeLayout& layout, const TrapDrive& drive, double mass,
                       double charge, const Vec3& p) {
  double u = charge * dc_potential(layout, drive, p);
  if (drive.rf_voltage > 0) u += pseudopotential(layout, drive, mass, charge, p);
  return u;
}

Vec3 total_gradient(const ElectrodeLayout& layout, const TrapDrive& drive, double mass,
                    double charge, const Vec3& p) {
  Vec3 g = charge * dc_gradient(layout, drive, p);
  if (drive.rf_voltage > 0) g += pseudopotential_gradient(layout, drive, mass, charge, p);
  return g;
}

Mat3 total_hessian(const ElectrodeLayout& layout, const TrapDrive& drive, double mass,
                   double charge, const Vec3& p, double step) {
  Mat3 h;
  for (int k = 0; k < 3; ++k) {
    Vec3 dp = Vec3::Zero();
    dp(k) = step;
    const Vec3 gp = total_gradient(layout, drive, mass, charge, p + dp);
    const Vec3 gm = total_gradient(layout, drive, mass, charge, p - dp);
    h.col(k) = (gp - gm) / (2 * step);
  }
  return 0.5 * (h + h.transpose());
}

namespace {

std::string fmt_force(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", f);
  return buf;
}

}  // namespace

Vec3 find_trap_center(const ElectrodeLayout& layout, const TrapDrive& drive,
                      const Species& species, const Vec3& initial_guess,
                      const NewtonOptions& opts) {
  layout.validate();
  drive.validate_against(layout);
  const double tol = opts.grad_tol_fraction * species.charge * 1e4;  // q * (1 V / 100 um)
  constexpr double kMaxStep = 100e-6;

  Vec3 p = initial_guess;
  Vec3 g = total_gradient(layout, drive, species.mass, species.charge, p);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    if (g.norm() < tol) return p;
    const Mat3 h = total_hessian(layout, drive, species.mass, species.charge, p);
    Vec3 dx = h.fullPivLu().solve(-g);
    if (!dx.allFinite() || dx.norm() == 0) dx = -g.normalized() * 1e-6;
    if (dx.norm() > kMaxStep) dx *= kMaxStep / dx.norm();

    const double g0 = g.norm();
    auto backtrack = [&](const Vec3& dir, Vec3& p_out, Vec3& g_out) {
      double t = 1.0;
      for (;;) {
        p_out = p + t * dir;
        g_out = total_gradient(layout, drive, species.mass, species.charge, p_out);
        if (g_out.norm() < g0) return true;
        if (t < 1e-8) return false;
        t *= 0.5;
      }
    };

    Vec3 p_new, g_new;
    bool ok = backtrack(dx, p_new, g_new);
    if (!ok) {
      // Newton direction failed (saddle-dominated Hessian); fall back to
      // steepest descent on |grad| before giving up.
      const Vec3 sd = -g.normalized() * std::min(kMaxStep, dx.norm());
      ok = backtrack(sd, p_new, g_new);
    }
    if (!ok)
      throw convergence_error("trap center search stalled at |grad| = " + fmt_force(g0) +
                              " N after " + std::to_string(iter) + " iterations");
    p = p_new;
    g = g_new;
  }
  if (g.norm() < tol) return p;
  throw convergence_error("trap center search did not converge in " +
                          std::to_string(opts.max_iterations) +
                          " iterations (|grad| = " + fmt_force(g.norm()) + " N)");
}

SecularResult secular_analysis(const ElectrodeLayout& layout, const TrapDrive& drive,
                               const Species& species, const Vec3& initial_guess,
                               const NewtonOptions& opts) {
  SecularResult out;
  out.center = find_trap_center(layout, drive, species, initial_guess, opts);
  out.hessian = total_hessian(layout, drive, species.mass, species.charge, out.center);

  Eigen::SelfAdjointEigenSolver<Mat3> es(out.hessian);
  if (es.info() != Eigen::Success) throw convergence_error("hessian eigendecomposition failed");
  for (int i = 0; i < 3; ++i) {
    const double lam = es.eigenvalues()(i);
    if (!(lam > 0))
      throw ::trapsim::domain_error("stationary point is not confining (curvature " +
                                    fmt_force(lam) + " J/m^2 along axis " +
                                    std::to_string(i) + ")");
    out.omega(i) = std::sqrt(lam / species.mass);
  }
  out.axes = es.eigenvectors();

  int ix = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(out.axes(0, i)) > std::abs(out.axes(0, ix))) ix = i;
  Vec3 v = out.axes.col(ix);
  if (v.x() < 0) v = -v;
  out.xz_rotation_deg = std::atan2(v.z(), v.x()) * 180.0 / M_PI;
  return out;
}

double vertical_trap_depth(const ElectrodeLayout& layout, const TrapDrive& drive,
                           const Species& sp, const Vec3& center) {
  if (!(center.z() > 0)) throw ::trapsim::domain_error("trap depth: center must be above the plane");
  const TrapDrive filled = drive.with_defaults(layout);
  const double u0 = total_potential(layout, filled, sp.mass, sp.charge, center);

  // Coarse scan up to ~20 ion heights: the pseudopotential barrier above the
  // null is broad, so a fine uniform grid plus parabolic refinement is ample.
  const int n = 4000;
  const double z1 = 20.0 * center.z();
  double best = -1e300;
  int best_i = -1;
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) {
    const double z = center.z() + (z1 - center.z()) * (i + 1) / n;
    u[i] = total_potential(layout, filled, sp.mass, sp.charge, {center.x(), center.y(), z});
    if (u[i] > best) {
      best = u[i];
      best_i = i;
    }
  }
  if (best_i <= 0 || best_i >= n - 1)
    throw convergence_error("trap depth: no interior barrier found above the center");
  // parabolic peak through the three bracketing samples
  const double a = u[best_i - 1], b = u[best_i], c = u[best_i + 1];
  const double denom = a - 2 * b + c;
  double u_peak = b;
  if (denom < 0) u_peak = b - (a - c) * (a - c) / (8 * denom);
  const double depth = u_peak - u0;
  if (!(depth > 0)) throw convergence_error("trap depth: barrier not above the center energy");
  return depth;
}

std::vector<std::pair<double, double>> hole_distortion_scan(const ElectrodeLayout& layout,
                                                            const TrapDrive& drive,
                                                            const std::vector<double>& hole_sizes,
                                                            double height) {
  if (!(height > 0)) throw ::trapsim::domain_error("scan height must be > 0");
  const ElectrodeLayout solid = layout.with_hole_size(0);
  const TrapDrive filled = drive.with_defaults(layout);

  constexpr double kCube = 50e-6;
  constexpr int kN = 9;
  std::vector<Vec3> grid;
  grid.reserve(kN * kN * kN);
  for (int i = 0; i < kN; ++i)
    for (int j = 0; j < kN; ++j)
      for (int k = 0; k < kN; ++k)
        grid.emplace_back(layout.hole_x - kCube / 2 + kCube * i / (kN - 1),
                          layout.hole_y - kCube / 2 + kCube * j / (kN - 1),
                          height - kCube / 2 + kCube * k / (kN - 1));

  std::vector<double> solid_v(grid.size());
  for (size_t m = 0; m < grid.size(); ++m) solid_v[m] = dc_potential(solid, filled, grid[m]);

  std::vector<std::pair<double, double>> out;
  for (double side : hole_sizes) {
    const ElectrodeLayout holed = layout.with_hole_size(side);
    double worst = 0;
    for (size_t m = 0; m < grid.size(); ++m)
      worst = std::max(worst, std::abs(dc_potential(holed, filled, grid[m]) - solid_v[m]));
    out.emplace_back(side, worst);
  }
  return out;
}

}  // namespace trapsim::trapmodel

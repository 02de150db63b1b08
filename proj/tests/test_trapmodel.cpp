#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "trapsim/constants.hpp"
#include "trapsim/trapmodel.hpp"

using namespace trapsim;
using namespace trapsim::trapmodel;

namespace {

const RectPatch kPatch{"P", -60e-6, 90e-6, -150e-6, 40e-6, +1};

const Vec3 kPoints[] = {
    {0, 0, 30e-6},        {10e-6, -20e-6, 80e-6},  {200e-6, 50e-6, 120e-6},
    {-300e-6, 0, 200e-6}, {40e-6, 400e-6, 300e-6}, {0, -140e-6, 15e-6},
};

// Dirichlet Green's function of the half space: a unit-voltage patch in a
// grounded plane produces phi(p) = (z / 2 pi) * Int dA / |p - p'|^3.
// The y integral is elementary, so quadrature only runs over x.
double quadrature_potential(const RectPatch& q, const Vec3& p) {
  const double z = p.z();
  auto inner = [&](double x) {
    const double dx2 = (x - p.x()) * (x - p.x());
    auto antider = [&](double y) {
      const double b = y - p.y();
      return b / ((dx2 + z * z) * std::sqrt(dx2 + b * b + z * z));
    };
    return antider(q.y2) - antider(q.y1);
  };
  const double v = oracle::integrate(inner, q.x1, q.x2, 1e-14);
  return q.sign * z / (2 * M_PI) * v;
}

}  // namespace

TEST_CASE("patch potential matches the half-space quadrature") {
  for (const auto& p : kPoints) {
    const double got = patch_potential(kPatch, p);
    const double want = quadrature_potential(kPatch, p);
    CHECK(got == doctest::Approx(want).epsilon(1e-8));
  }
}

TEST_CASE("patch potential is a solid angle: bounds and limits") {
  CHECK(patch_potential(kPatch, {10e-6, -30e-6, 1e-9}) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(patch_potential(kPatch, {500e-6, 500e-6, 1e-9}) == doctest::Approx(0.0).epsilon(1e-6));
  for (const auto& p : kPoints) {
    const double v = patch_potential(kPatch, p);
    CHECK(v > 0);
    CHECK(v < 1);
  }
  // far field ~ area / (2 pi r^2) from directly above
  const Vec3 far(0, 0, 0.1);
  CHECK(patch_potential(kPatch, far) ==
        doctest::Approx(kPatch.area() / (2 * M_PI * far.z() * far.z())).epsilon(1e-3));
  CHECK_THROWS_AS(patch_potential(kPatch, {0, 0, -1e-6}), trapsim::domain_error);
}

TEST_CASE("analytic gradient and hessian match finite differences") {
  for (const auto& p : kPoints) {
    const Vec3 g = patch_gradient(kPatch, p);
    const Vec3 g_fd = oracle::fd_gradient(
        [&](const Vec3& q) { return patch_potential(kPatch, q); }, p, 2e-10);
    CHECK((g - g_fd).norm() < 1e-6 * g.norm() + 1e-8);

    const Mat3 h = patch_hessian(kPatch, p);
    const Mat3 h_fd = oracle::fd_hessian(
        [&](const Vec3& q) { return patch_potential(kPatch, q); }, p, 5e-9);
    CHECK((h - h_fd).norm() < 1e-5 * h.norm() + 1e-3);
  }
}

TEST_CASE("patch potential is harmonic (Laplace) and hessian symmetric") {
  for (const auto& p : kPoints) {
    const Mat3 h = patch_hessian(kPatch, p);
    CHECK(std::abs(h.trace()) < 1e-10 * h.norm());
    CHECK((h - h.transpose()).norm() == 0.0);
  }
}

TEST_CASE("axis potential above a centered square has the closed form") {
  // phi(z) = (2/pi) atan(a^2 / (z sqrt(2 a^2 + z^2))) for a square of
  // half-side a, evaluated on its axis.
  const double a = 20e-6;
  const RectPatch sq{"S", -a, a, -a, a, +1};
  for (double z : {20e-6, 60e-6, 200e-6, 1e-3}) {
    const double want = (2 / M_PI) * std::atan(a * a / (z * std::sqrt(2 * a * a + z * z)));
    CHECK(patch_potential(sq, {0, 0, z}) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("cutout model is exactly linear superposition") {
  auto loaded = fixtures::canonical();
  const auto& layout = loaded.layout;
  TrapDrive drive;
  drive.dc_voltages = {{"Center", 1.0}};

  const ElectrodeLayout solid = layout.without_cutouts();
  RectPatch hole;
  bool found = false;
  for (const auto& p : layout.patches)
    if (p.sign == -1) {
      hole = p;
      found = true;
    }
  REQUIRE(found);

  for (const auto& p : kPoints) {
    const double with_hole = dc_potential(layout, drive, p);
    const double without = dc_potential(solid, drive, p);
    const double hole_term = patch_potential(hole, p);  // sign -1 already applied
    CHECK(with_hole - without == doctest::Approx(hole_term).epsilon(1e-12));
  }

  // 1 V on the holed electrode, 200 um above the hole center: the difference
  // against the solid electrode equals the axis closed form, ~6.3 mV.
  const Vec3 above(layout.hole_x, layout.hole_y, 200e-6);
  const double diff = dc_potential(solid, drive, above) - dc_potential(layout, drive, above);
  const double a = 20e-6, z = 200e-6;
  const double want = (2 / M_PI) * std::atan(a * a / (z * std::sqrt(2 * a * a + z * z)));
  CHECK(diff == doctest::Approx(want).epsilon(1e-12));
  CHECK(diff == doctest::Approx(6.30e-3).epsilon(0.01));
}

TEST_CASE("hole distortion grows monotonically with hole size") {
  auto loaded = fixtures::canonical();
  const std::vector<double> sizes = {10e-6, 20e-6, 40e-6, 60e-6, 80e-6};
  const auto scan = hole_distortion_scan(loaded.layout, loaded.drive, sizes, 200e-6);
  REQUIRE(scan.size() == sizes.size());
  for (size_t i = 1; i < scan.size(); ++i) CHECK(scan[i].second > scan[i - 1].second);
  CHECK(scan.front().second > 0);
}

TEST_CASE("rf null sits at sqrt(ab) for long rails") {
  auto loaded = fixtures::canonical();
  const double expect = std::sqrt(105e-6 * 381e-6);
  // scan |grad phi_rf| along the hole axis
  double best_z = 0, best = 1e300;
  for (double z = 120e-6; z < 300e-6; z += 0.05e-6) {
    const double g = rf_basis_gradient(loaded.layout, {0, 0, z}).norm();
    if (g < best) {
      best = g;
      best_z = z;
    }
  }
  CHECK(best_z == doctest::Approx(expect).epsilon(0.02));
}

TEST_CASE("pseudopotential gradient matches finite differences") {
  auto loaded = fixtures::canonical();
  const Species ion = ca40();
  for (const Vec3 p : {Vec3(5e-6, 10e-6, 150e-6), Vec3(-20e-6, 0, 220e-6)}) {
    const Vec3 g = pseudopotential_gradient(loaded.layout, loaded.drive, ion.mass, ion.charge, p);
    const Vec3 g_fd = oracle::fd_gradient(
        [&](const Vec3& q) {
          return pseudopotential(loaded.layout, loaded.drive, ion.mass, ion.charge, q);
        },
        p, 1e-9);
    CHECK((g - g_fd).norm() < 1e-6 * g.norm() + 1e-30);
  }
}

TEST_CASE("trap center: gradient vanishes, grid search agrees") {
  auto loaded = fixtures::canonical();
  const Species ion = ca40();
  const Vec3 guess(0, 0, 200e-6);
  const Vec3 center = find_trap_center(loaded.layout, loaded.drive, ion, guess);

  const double tol = 1e-12 * ion.charge * 1e4;
  CHECK(total_gradient(loaded.layout, loaded.drive, ion.mass, ion.charge, center).norm() < tol);

  // coarse grid search oracle around the guess
  Vec3 best = guess;
  double ubest = 1e300;
  for (double x = -10e-6; x <= 10e-6; x += 1e-6)
    for (double y = -10e-6; y <= 10e-6; y += 2e-6)
      for (double z = 180e-6; z <= 220e-6; z += 1e-6) {
        const double u = total_potential(loaded.layout, loaded.drive, ion.mass, ion.charge,
                                         {x, y, z});
        if (u < ubest) {
          ubest = u;
          best = {x, y, z};
        }
      }
  CHECK((center - best).norm() < 2e-6);  // within one grid cell
}

TEST_CASE("secular frequencies match an independent value-based hessian") {
  auto loaded = fixtures::canonical();
  const Species ion = ca40();
  const auto sec = secular_analysis(loaded.layout, loaded.drive, ion, {0, 0, 200e-6});

  for (int i = 0; i < 3; ++i) CHECK(sec.omega(i) > 0);

  // oracle: second differences of the *potential values* (the library
  // differentiates the analytic gradient instead)
  const Mat3 h_fd = oracle::fd_hessian(
      [&](const Vec3& q) {
        return total_potential(loaded.layout, loaded.drive, ion.mass, ion.charge, q);
      },
      sec.center, 4e-8);
  Eigen::SelfAdjointEigenSolver<Mat3> es(h_fd);
  for (int i = 0; i < 3; ++i) {
    const double w = std::sqrt(es.eigenvalues()(i) / ion.mass);
    CHECK(sec.omega(i) == doctest::Approx(w).epsilon(1e-5));
  }

  // symmetric drive: principal axes aligned with the surface frame
  CHECK(std::abs(sec.xz_rotation_deg) < 0.01);
}

TEST_CASE("pure-rf secular frequencies scale as 1/m") {
  auto loaded = fixtures::canonical();
  TrapDrive rf_only = loaded.drive;
  rf_only.dc_voltages.clear();

  // same field point for both masses: the hessian scales by q^2 V^2 / (4 m W^2)
  const Vec3 p(0, 0, std::sqrt(105e-6 * 381e-6));
  const Species a = ca40(), b = ca44();
  const Mat3 ha = total_hessian(loaded.layout, rf_only, a.mass, a.charge, p);
  const Mat3 hb = total_hessian(loaded.layout, rf_only, b.mass, b.charge, p);
  Eigen::SelfAdjointEigenSolver<Mat3> ea(ha), eb(hb);
  for (int i = 0; i < 3; ++i) {
    const double la = ea.eigenvalues()(i), lb = eb.eigenvalues()(i);
    if (la <= 0 || lb <= 0) continue;  // rf node direction has ~zero curvature
    const double wa = std::sqrt(la / a.mass), wb = std::sqrt(lb / b.mass);
    CHECK(wa / wb == doctest::Approx(b.mass / a.mass).epsilon(1e-9));
  }
}

TEST_CASE("layout validation rejects bad geometry with collected errors") {
  ElectrodeLayout bad;
  bad.patches.push_back({"A", 0, -1e-6, 0, 1e-6, +1});          // inverted x
  bad.patches.push_back({"B", 0, 1e-6, 0, 1e-6, +1});           // zero y extent
  bad.patches.push_back({"C", 0, 5e-6, 0, 5e-6, +1});
  bad.patches.push_back({"C", 2e-6, 8e-6, 2e-6, 8e-6, +1});     // overlaps C
  bad.patches.push_back({"D", 0, 1e-6, 0, 1e-6, -1});           // orphan cutout
  try {
    bad.validate();
    FAIL("expected structural_error");
  } catch (const structural_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("A") != std::string::npos);
    CHECK(msg.find("B") != std::string::npos);
    CHECK(msg.find("overlap") != std::string::npos);
    CHECK(msg.find("D") != std::string::npos);
  }
}

TEST_CASE("drive validation: unknown electrode names are rejected") {
  auto loaded = fixtures::canonical();
  TrapDrive d = loaded.drive;
  d.dc_voltages["Norwhere"] = 1.0;
  CHECK_THROWS_AS(d.validate_against(loaded.layout), config_error);
  CHECK_THROWS_AS([&] {
    TrapDrive bad = loaded.drive;
    bad.rf_voltage = -5;
    bad.validate_against(loaded.layout);
  }(), config_error);
}

TEST_CASE("canonical layout is mirror symmetric about the hole") {
  auto loaded = fixtures::canonical();
  CHECK(loaded.layout.mirror_symmetric_x(1e-12));
}

TEST_CASE("vertical trap depth: barrier above the null, exact rf scaling") {
  auto loaded = fixtures::canonical();
  const Species sp = ca40();
  const auto sec = secular_analysis(loaded.layout, loaded.drive, sp, {0, 0, 200e-6});
  const double depth = vertical_trap_depth(loaded.layout, loaded.drive, sp, sec.center);

  // Surface traps at this drive sit in the tens-of-meV range.
  const double depth_mev = depth / constants::elementary_charge * 1e3;
  CHECK(depth_mev > 10.0);
  CHECK(depth_mev < 500.0);

  // Independent coarse scan with a different grid must find the same barrier.
  double best = -1e300;
  for (int i = 1; i <= 1500; ++i) {
    const double z = sec.center.z() * (1.0 + 25.0 * i / 1500.0);
    best = std::max(best, total_potential(loaded.layout, loaded.drive, sp.mass, sp.charge,
                                          {sec.center.x(), sec.center.y(), z}));
  }
  const double u0 = total_potential(loaded.layout, loaded.drive, sp.mass, sp.charge, sec.center);
  CHECK(depth == doctest::Approx(best - u0).epsilon(1e-3));

  // Pure-rf depth scales exactly as amplitude squared and inversely with mass
  // (the barrier location does not move, so the ratio is clean).
  TrapDrive rf_only = loaded.drive;
  for (auto& [k, v] : rf_only.dc_voltages) v = 0;
  const Vec3 null_pt = find_trap_center(loaded.layout, rf_only, sp, {0, 0, 200e-6});
  const double d1 = vertical_trap_depth(loaded.layout, rf_only, sp, null_pt);
  TrapDrive stronger = rf_only;
  stronger.rf_voltage *= 1.3;
  const double d2 = vertical_trap_depth(loaded.layout, stronger, sp, null_pt);
  CHECK(d2 / d1 == doctest::Approx(1.3 * 1.3).epsilon(1e-9));
  const double d44 = vertical_trap_depth(loaded.layout, rf_only, ca44(), null_pt);
  CHECK(d1 / d44 == doctest::Approx(ca44().mass / ca40().mass).epsilon(1e-9));

  CHECK_THROWS_AS(vertical_trap_depth(loaded.layout, loaded.drive, sp, {0, 0, -1e-6}),
                  domain_error);
}

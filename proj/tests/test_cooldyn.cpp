#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "trapsim/constants.hpp"
#include "trapsim/cooldyn.hpp"
#include "trapsim/crystal.hpp"
#include "trapsim/errors.hpp"
#include "trapsim/species.hpp"

using namespace trapsim;
using namespace trapsim::cooldyn;
namespace c = trapsim::constants;

namespace {

crystal::HarmonicTrap reference_trap() {
  crystal::HarmonicTrap t;
  t.omega_x = 2 * M_PI * 2.0e6;
  t.omega_y = 2 * M_PI * 2.1e6;
  t.omega_z = 2 * M_PI * 0.6e6;
  t.ref_mass = ca40().mass;
  t.charge = c::elementary_charge;
  return t;
}

crystal::Chain chain_of(const std::vector<Species>& ions) {
  crystal::Chain ch;
  ch.trap = reference_trap();
  ch.ions = ions;
  return ch;
}

CoolingLaser red_397() {
  CoolingLaser l;
  l.k_hat = Vec3(1, 1, 1).normalized();  // overlaps all three axes
  l.wavelength = c::lambda_397;
  l.linewidth_hz = c::linewidth_397;
  l.saturation = 0.3;
  l.detuning = -0.5 * c::linewidth_397;
  l.addressed = "Ca40";
  return l;
}

}  // namespace

TEST_CASE("doppler limit of the cooling transition") {
  const double td = doppler_limit(c::linewidth_397);
  CHECK(td == doctest::Approx(c::planck_h * c::linewidth_397 / (2 * c::k_boltzmann)));
  CHECK(td * 1e3 == doctest::Approx(0.518).epsilon(2e-3));
  CHECK_THROWS_AS(doppler_limit(0), domain_error);
}

TEST_CASE("scattering rate: lineshape, saturation, and Doppler pulling") {
  Simulator sim(chain_of({ca40()}), red_397(), {});
  const auto laser = red_397();

  // At rest and on resonance the rate is pi Gamma s / (1 + s).
  CoolingLaser resonant = laser;
  resonant.detuning = 0;
  Simulator sim0(chain_of({ca40()}), resonant, {});
  const double r0 = sim0.scattering_rate(Vec3::Zero(), ca40(), "Ca40");
  CHECK(r0 == doctest::Approx(M_PI * laser.linewidth_hz * laser.saturation /
                              (1 + laser.saturation)).epsilon(1e-12));

  // Half-detuned: rate drops by the Lorentzian factor.
  const double rhalf = sim.scattering_rate(Vec3::Zero(), ca40(), "Ca40");
  CHECK(rhalf == doctest::Approx(M_PI * laser.linewidth_hz * laser.saturation /
                                 (2 + laser.saturation)).epsilon(1e-12));

  // An ion moving against the beam is pulled toward resonance when
  // red-detuned (2 m/s ~ 5 MHz Doppler, inside the 10.8 MHz detuning).
  const Vec3 toward = -2.0 * laser.k_hat;  // v . k_hat < 0
  CHECK(sim.scattering_rate(toward, ca40(), "Ca40") > rhalf);
  CHECK(sim.scattering_rate(-toward, ca40(), "Ca40") < rhalf);

  // The velocity that exactly cancels the detuning maximizes the rate.
  const double v_match = laser.detuning * laser.wavelength;  // v.k_hat = detuning * lambda
  const Vec3 vm = v_match * laser.k_hat;
  const double rmax = sim.scattering_rate(vm, ca40(), "Ca40");
  CHECK(rmax == doctest::Approx(M_PI * laser.linewidth_hz * laser.saturation /
                                (1 + laser.saturation)).epsilon(1e-9));

  // Saturation: the rate approaches pi Gamma from below.
  CoolingLaser bright = resonant;
  bright.saturation = 1e6;
  Simulator simb(chain_of({ca40()}), bright, {});
  CHECK(simb.scattering_rate(Vec3::Zero(), ca40(), "Ca40") ==
        doctest::Approx(M_PI * laser.linewidth_hz).epsilon(1e-5));

  // Isotope shift moves Ca44 far off resonance for a laser tuned to Ca40.
  const double r44 = sim.scattering_rate(Vec3::Zero(), ca44(), "Ca44");
  CHECK(r44 < 1e-3 * rhalf);
}

TEST_CASE("free oscillation conserves energy over long runs") {
  Simulator sim(chain_of({ca40(), ca40()}), std::nullopt, {});

  const auto eq = crystal::equilibrium_positions(sim.chain());
  Eigen::MatrixX3d x = Eigen::MatrixX3d::Zero(2, 3);
  x(0, 2) = eq[0] + 40e-9;
  x(1, 2) = eq[1] - 35e-9;
  x(0, 0) = 50e-9;
  x(1, 1) = -45e-9;

  SimOptions opts;
  opts.steps = 100000;
  opts.record_every = 100;
  opts.dt = 0;  // automatic: ~180 steps per fastest period
  const SimReport rep = sim.run(opts, x);

  CHECK(rep.dt_used > 0);
  CHECK(rep.energy_drift_fraction < 1e-6);
  // Velocity Verlet is symplectic: the energy error stays bounded, so the
  // instantaneous extremes are also close to the initial energy.
  const double e0 = rep.traj.energy.front();
  double emin = e0, emax = e0;
  for (double e : rep.traj.energy) {
    emin = std::min(emin, e);
    emax = std::max(emax, e);
  }
  CHECK((emax - emin) / std::abs(e0) < 1e-4);
}

TEST_CASE("normal-mode frequencies show up in the simulated motion") {
  Simulator sim(chain_of({ca40(), ca40()}), std::nullopt, {});
  const auto eq = crystal::equilibrium_positions(sim.chain());
  const auto trap = reference_trap();

  SimOptions opts;
  opts.dt = 2.0e-9;
  opts.steps = 32767;  // 32768 recorded frames including t = 0
  opts.record_every = 1;

  auto dominant_hz = [&](const Eigen::MatrixX3d& x0, int ion, int axis) {
    const SimReport rep = sim.run(opts, x0);
    std::vector<double> series;
    series.reserve(rep.traj.velocities.size());
    for (const auto& v : rep.traj.velocities) series.push_back(v(ion, axis));
    return oracle::dominant_frequency(series) / opts.dt;  // cycles/sample -> Hz
  };

  Eigen::MatrixX3d x = Eigen::MatrixX3d::Zero(2, 3);
  x(0, 2) = eq[0];
  x(1, 2) = eq[1];

  // Axial stretch: +-d along z, sqrt(3) w_z.
  Eigen::MatrixX3d xs = x;
  xs(0, 2) -= 60e-9;
  xs(1, 2) += 60e-9;
  const double f_stretch = dominant_hz(xs, 0, 2);
  CHECK(f_stretch ==
        doctest::Approx(std::sqrt(3.0) * trap.omega_z / (2 * M_PI)).epsilon(0.01));

  // Axial center of mass: bare w_z.
  Eigen::MatrixX3d xc = x;
  xc(0, 2) += 60e-9;
  xc(1, 2) += 60e-9;
  CHECK(dominant_hz(xc, 0, 2) == doctest::Approx(trap.omega_z / (2 * M_PI)).epsilon(0.01));

  // Transverse rocking: sqrt(w_x^2 - w_z^2).
  Eigen::MatrixX3d xr = x;
  xr(0, 0) += 60e-9;
  xr(1, 0) -= 60e-9;
  const double f_rock_expect =
      std::sqrt(trap.omega_x * trap.omega_x - trap.omega_z * trap.omega_z) / (2 * M_PI);
  CHECK(dominant_hz(xr, 0, 0) == doctest::Approx(f_rock_expect).epsilon(0.01));
}

TEST_CASE("single ion cools to near the Doppler limit") {
  Simulator sim(chain_of({ca40()}), red_397(), {});
  const double td = doppler_limit(c::linewidth_397);

  SimOptions opts;
  opts.steps = 60000;  // ~165 us, >> the ~11 us velocity damping time
  opts.record_every = 50;

  double mean_t = 0;
  const int n_seeds = 20;
  for (int s = 0; s < n_seeds; ++s) {
    opts.seed = 314159;
    opts.stream = static_cast<unsigned>(s);
    const SimReport rep = sim.run_thermal(opts, 2e-3);
    mean_t += rep.final_temperature;
    CHECK(rep.total_scattered > 0);
  }
  mean_t /= n_seeds;
  CHECK(mean_t < 2 * td);
  CHECK(mean_t > 0.2 * td);  // recoil keeps it from freezing out entirely
}

TEST_CASE("same seed, same trajectory; different stream diverges") {
  Simulator sim(chain_of({ca40(), ca44()}), red_397(), {2e-4});
  SimOptions opts;
  opts.steps = 4000;
  opts.record_every = 40;
  opts.seed = 99;
  opts.stream = 7;

  const SimReport a = sim.run_thermal(opts, 1e-3);
  const SimReport b = sim.run_thermal(opts, 1e-3);
  REQUIRE(a.traj.energy.size() == b.traj.energy.size());
  CHECK(a.traj.energy == b.traj.energy);
  CHECK(a.total_scattered == b.total_scattered);
  bool same_positions = true;
  for (size_t k = 0; k < a.traj.positions.size(); ++k)
    same_positions = same_positions && a.traj.positions[k] == b.traj.positions[k];
  CHECK(same_positions);

  opts.stream = 8;
  const SimReport d = sim.run_thermal(opts, 1e-3);
  CHECK(a.traj.energy != d.traj.energy);
}

TEST_CASE("monotone responses: heating rate and detuning sign") {
  // Pure heating random walk: temperature grows linearly with the rate.
  SimOptions opts;
  opts.steps = 20000;
  opts.record_every = 100;
  opts.seed = 5;

  double prev = -1;
  for (double rate : {0.5, 2.0, 8.0}) {
    Simulator sim(chain_of({ca40()}), std::nullopt, {rate});
    const SimReport rep = sim.run(opts);
    CHECK(rep.final_temperature > prev);
    prev = rep.final_temperature;
  }

  // Red detuning cools, blue detuning heats, from the same start.
  auto run_detuned = [&](double detuning) {
    CoolingLaser l = red_397();
    l.detuning = detuning;
    Simulator sim(chain_of({ca40()}), l, {});
    SimOptions o;
    o.steps = 40000;
    o.record_every = 100;
    o.seed = 17;
    return sim.run_thermal(o, 1e-3).final_temperature;
  };
  const double t_red = run_detuned(-0.5 * c::linewidth_397);
  const double t_blue = run_detuned(+0.5 * c::linewidth_397);
  CHECK(t_red < 1e-3);
  CHECK(t_blue > 5 * t_red);
}

TEST_CASE("thermal initialization matches the requested temperature") {
  Simulator sim(chain_of({ca40(), ca40(), ca40()}), std::nullopt, {});
  SimOptions opts;
  opts.steps = 10;
  opts.record_every = 10;

  const double T = 5e-3;
  double ke_sum = 0;
  const int n_rep = 64;
  for (int s = 0; s < n_rep; ++s) {
    opts.seed = 1234;
    opts.stream = static_cast<unsigned>(s);
    const SimReport rep = sim.run_thermal(opts, T);
    const auto& v0 = rep.traj.velocities.front();
    for (int i = 0; i < 3; ++i)
      ke_sum += 0.5 * ca40().mass * v0.row(i).squaredNorm();
  }
  // 9 quadratic dof per repetition.
  const double expect = n_rep * 4.5 * c::k_boltzmann * T;
  const double sigma = std::sqrt(n_rep * 4.5) * c::k_boltzmann * T;
  CHECK(std::abs(ke_sum - expect) < 4 * sigma);

  CHECK_THROWS_AS(sim.run_thermal(opts, -1e-3), domain_error);
}

TEST_CASE("trajectory bookkeeping and option validation") {
  Simulator sim(chain_of({ca40()}), std::nullopt, {});
  SimOptions opts;
  opts.steps = 1000;
  opts.record_every = 250;
  opts.dt = 3e-9;
  const SimReport rep = sim.run(opts);
  REQUIRE(rep.traj.time.size() == 5);  // t = 0 plus four windows
  CHECK(rep.traj.time[1] - rep.traj.time[0] == doctest::Approx(250 * 3e-9));
  CHECK(rep.dt_used == 3e-9);
  CHECK(rep.traj.positions.size() == rep.traj.energy.size());

  SimOptions bad = opts;
  bad.steps = 0;
  CHECK_THROWS_AS(sim.run(bad), domain_error);
  bad = opts;
  bad.record_every = 0;
  CHECK_THROWS_AS(sim.run(bad), domain_error);

  crystal::Chain empty;
  empty.trap = reference_trap();
  CHECK_THROWS_AS(Simulator(empty, std::nullopt, {}), domain_error);
  CHECK_THROWS_AS(Simulator(chain_of({ca40()}), std::nullopt, {-1.0}), domain_error);

  CoolingLaser bad_laser = red_397();
  bad_laser.addressed = "Ca48";
  CHECK_THROWS_AS(Simulator(chain_of({ca40()}), bad_laser, {}), config_error);
}

TEST_CASE("sympathetic capture cools a hot heavy ion through the coolant") {
  // The Ca44-dominated radial mode couples to the cooled Ca40 only through
  // the Coulomb cross term, so it damps ~20x slower than a directly addressed
  // ion; drive hard and give the protocol a full millisecond.
  auto laser = red_397();
  laser.saturation = 1.0;
  SimOptions opts;
  opts.steps = 400000;
  opts.record_every = 50;
  opts.seed = 271828;

  // One cold Ca40, one Ca44 entering at 50 mK; laser only talks to Ca40.
  const ProtocolResult res = sympathetic_capture(reference_trap(), ca40(), ca44(), 50e-3,
                                                 laser, {}, 5e-3, opts);
  REQUIRE(res.cooled);
  CHECK(res.time_to_threshold > 0);
  CHECK(res.final_temperature < 5e-3);
  CHECK(res.total_scattered > 0);
  CHECK(res.coolant_survived);
  CHECK(res.coolant_final_temperature < 5e-3);

  // Determinism of the full protocol.
  const ProtocolResult again = sympathetic_capture(reference_trap(), ca40(), ca44(), 50e-3,
                                                   laser, {}, 5e-3, opts);
  CHECK(again.cooled == res.cooled);
  CHECK(again.time_to_threshold == res.time_to_threshold);
  CHECK(again.final_temperature == res.final_temperature);

  // A tighter threshold can only take longer to reach.
  const ProtocolResult tight = sympathetic_capture(reference_trap(), ca40(), ca44(), 50e-3,
                                                   laser, {}, 2e-3, opts);
  if (tight.cooled) CHECK(tight.time_to_threshold >= res.time_to_threshold);

  CHECK_THROWS_AS(sympathetic_capture(reference_trap(), ca40(), ca44(), 50e-3, laser, {}, -1.0,
                                      opts),
                  domain_error);
}

TEST_CASE("capture of an already-cold ion is immediate") {
  auto laser = red_397();
  laser.saturation = 1.0;
  SimOptions opts;
  opts.steps = 20000;
  opts.record_every = 10;
  opts.seed = 99;

  const ProtocolResult res = sympathetic_capture(reference_trap(), ca40(), ca44(), 0.0, laser,
                                                 {}, 5e-3, opts);
  CHECK(res.cooled);
  CHECK(res.time_to_threshold < 10e-6);
  CHECK(res.coolant_survived);
  CHECK(res.coolant_final_temperature < 5e-3);
}

TEST_CASE("capture probability falls with injection energy") {
  // Fixed step budget, rising injection temperature, 100 seeds per rung:
  // the fraction that reaches the threshold in time must not increase.
  auto laser = red_397();
  laser.saturation = 1.0;
  SimOptions opts;
  opts.steps = 60000;
  opts.record_every = 50;

  const double temps[] = {10e-3, 100e-3, 1.0};
  int captured[3] = {0, 0, 0};
  for (int e = 0; e < 3; ++e)
    for (int s = 0; s < 100; ++s) {
      opts.seed = 1000 + s;
      const ProtocolResult r = sympathetic_capture(reference_trap(), ca40(), ca44(), temps[e],
                                                   laser, {}, 5e-3, opts);
      captured[e] += r.cooled ? 1 : 0;
    }
  INFO("captured/100 at 10 mK / 100 mK / 1 K: " << captured[0] << " " << captured[1] << " "
                                                << captured[2]);
  CHECK(captured[0] >= captured[1]);
  CHECK(captured[1] >= captured[2]);
  CHECK(captured[0] > 80);  // cold injections almost always stick
  CHECK(captured[2] < 20);  // a 1 K ion rarely sheds its energy in 0.3 ms
}

#include "trapsim/cooldyn.hpp"

#include <algorithm>
#include <cmath>

#include "trapsim/constants.hpp"
#include "trapsim/errors.hpp"

namespace trapsim::cooldyn {

namespace c = trapsim::constants;

double doppler_limit(double linewidth_hz) {
  if (!(linewidth_hz > 0)) throw ::trapsim::domain_error("doppler_limit: linewidth must be > 0");
  return c::planck_h * linewidth_hz / (2 * c::k_boltzmann);
}

void CoolingLaser::validate() const {
  if (!(wavelength > 0) || !(linewidth_hz > 0))
    throw ::trapsim::domain_error("cooling laser: wavelength and linewidth must be > 0");
  if (saturation < 0) throw ::trapsim::domain_error("cooling laser: saturation must be >= 0");
  if (k_hat.norm() == 0) throw ::trapsim::domain_error("cooling laser: k_hat must be nonzero");
}

namespace {

double transition_shift(const Isotope& iso, double wavelength) {
  auto near = [&](double lambda) { return std::abs(wavelength - lambda) < 10e-9; };
  if (near(c::lambda_423)) return iso.shift_423;
  if (near(c::lambda_397)) return iso.shift_397;
  if (near(c::lambda_866)) return iso.shift_866;
  return 0;
}

}  // namespace

Simulator::Simulator(const crystal::Chain& chain, std::optional<CoolingLaser> laser,
                     HeatingModel heating, const IsotopeTable& table)
    : chain_(chain), laser_(std::move(laser)), heating_(heating), table_(table) {
  chain_.trap.validate();
  if (chain_.ions.empty()) throw ::trapsim::domain_error("simulator: empty chain");
  if (laser_) {
    laser_->validate();
    laser_->k_hat.normalize();
    if (!laser_->addressed.empty()) table_.find(laser_->addressed);  // throws if unknown
  }
  if (heating_.temperature_rate < 0)
    throw ::trapsim::domain_error("simulator: heating rate must be >= 0");
}

double Simulator::scattering_rate(const Vec3& velocity, const Species& ion,
                                  const std::string& isotope_name) const {
  if (!laser_) return 0;
  (void)ion;
  double rest_offset = 0;  // laser detuning is quoted against the addressed isotope
  if (!laser_->addressed.empty()) {
    const double shift_addressed = transition_shift(table_.find(laser_->addressed),
                                                    laser_->wavelength);
    const double shift_ion = transition_shift(table_.find(isotope_name), laser_->wavelength);
    rest_offset = shift_addressed - shift_ion;
  }
  const double doppler = velocity.dot(laser_->k_hat) / laser_->wavelength;
  const double delta = laser_->detuning + rest_offset - doppler;  // Hz
  const double s = laser_->saturation;
  const double gamma = laser_->linewidth_hz;
  const double norm_det = 2 * delta / gamma;
  return M_PI * gamma * s / (1 + s + norm_det * norm_det);
}

namespace {

struct Workspace {
  std::vector<double> kx, ky, kz_mass;  // per-ion spring constants and masses
  std::vector<double> mass;
  double kc_q2 = 0;
};

Eigen::MatrixX3d forces(const Workspace& w, const Eigen::MatrixX3d& x) {
  const long n = x.rows();
  Eigen::MatrixX3d f(n, 3);
  for (long i = 0; i < n; ++i) {
    f(i, 0) = -w.kx[static_cast<size_t>(i)] * x(i, 0);
    f(i, 1) = -w.ky[static_cast<size_t>(i)] * x(i, 1);
    f(i, 2) = -w.kz_mass[static_cast<size_t>(i)] * x(i, 2);
  }
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) {
      const Eigen::RowVector3d d = x.row(i) - x.row(j);
      const double r2 = d.squaredNorm();
      const double r = std::sqrt(r2);
      const Eigen::RowVector3d fc = w.kc_q2 * d / (r2 * r);
      f.row(i) += fc;
      f.row(j) -= fc;
    }
  return f;
}

double potential_energy(const Workspace& w, const Eigen::MatrixX3d& x) {
  const long n = x.rows();
  double u = 0;
  for (long i = 0; i < n; ++i)
    u += 0.5 * (w.kx[static_cast<size_t>(i)] * x(i, 0) * x(i, 0) +
                w.ky[static_cast<size_t>(i)] * x(i, 1) * x(i, 1) +
                w.kz_mass[static_cast<size_t>(i)] * x(i, 2) * x(i, 2));
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) u += w.kc_q2 / (x.row(i) - x.row(j)).norm();
  return u;
}

}  // namespace

SimReport Simulator::run(const SimOptions& opts, Eigen::MatrixX3d positions,
                         Eigen::MatrixX3d velocities) const {
  Philox rng(opts.seed, opts.stream);
  return run_impl(opts, std::move(positions), std::move(velocities), rng);
}

SimReport Simulator::run_thermal(const SimOptions& opts, double temperature) const {
  if (temperature < 0) throw ::trapsim::domain_error("run_thermal: temperature must be >= 0");
  Philox rng(opts.seed, opts.stream);
  const long n = chain_.size();
  Eigen::MatrixX3d v(n, 3);
  for (long i = 0; i < n; ++i) {
    const double sigma =
        std::sqrt(c::k_boltzmann * temperature / chain_.ions[static_cast<size_t>(i)].mass);
    for (int a = 0; a < 3; ++a) v(i, a) = sigma * rng.normal();
  }
  return run_impl(opts, {}, std::move(v), rng);
}

SimReport Simulator::run_impl(const SimOptions& opts, Eigen::MatrixX3d x, Eigen::MatrixX3d v,
                              Philox& rng) const {
  const long n = chain_.size();
  if (opts.steps <= 0) throw ::trapsim::domain_error("run: steps must be > 0");
  if (opts.record_every <= 0) throw ::trapsim::domain_error("run: record_every must be > 0");

  if (x.rows() == 0) {
    const auto eq = crystal::equilibrium_positions(chain_);
    x = Eigen::MatrixX3d::Zero(n, 3);
    for (long i = 0; i < n; ++i) x(i, 2) = eq[static_cast<size_t>(i)];
  }
  if (v.rows() == 0) v = Eigen::MatrixX3d::Zero(n, 3);
  if (x.rows() != n || v.rows() != n)
    throw ::trapsim::domain_error("run: positions/velocities must have one row per ion");

  Workspace w;
  w.kc_q2 = c::coulomb_k * chain_.trap.charge * chain_.trap.charge;
  for (const auto& ion : chain_.ions) {
    w.mass.push_back(ion.mass);
    w.kx.push_back(chain_.trap.k_radial_x(ion.mass));
    w.ky.push_back(chain_.trap.k_radial_y(ion.mass));
    w.kz_mass.push_back(chain_.trap.k_axial());
  }

  double dt = opts.dt;
  if (dt <= 0) {
    double omega_max = 0;
    for (long i = 0; i < n; ++i) {
      const double m = w.mass[static_cast<size_t>(i)];
      omega_max = std::max({omega_max, std::sqrt(w.kx[static_cast<size_t>(i)] / m),
                            std::sqrt(w.ky[static_cast<size_t>(i)] / m),
                            std::sqrt(w.kz_mass[static_cast<size_t>(i)] / m)});
    }
    // sqrt(3) headroom for Coulomb stiffening of the highest chain mode
    dt = 2 * M_PI / (omega_max * std::sqrt(3.0) * 100.0);
  }

  SimReport rep;
  rep.dt_used = dt;
  const long frames = opts.steps / opts.record_every + 1;
  rep.traj.time.reserve(frames);
  rep.traj.energy.reserve(frames);

  auto record = [&](long step, double scattered_in_window) {
    rep.traj.time.push_back(step * dt);
    rep.traj.positions.push_back(x);
    rep.traj.velocities.push_back(v);
    double ke = 0;
    for (long i = 0; i < n; ++i)
      ke += 0.5 * w.mass[static_cast<size_t>(i)] * v.row(i).squaredNorm();
    rep.traj.energy.push_back(ke + potential_energy(w, x));
    rep.traj.scattered.push_back(scattered_in_window);
  };

  Eigen::MatrixX3d f = forces(w, x);
  double window_photons = 0;
  record(0, 0);

  for (long step = 1; step <= opts.steps; ++step) {
    for (long i = 0; i < n; ++i) {
      const double h = 0.5 * dt / w.mass[static_cast<size_t>(i)];
      v.row(i) += h * f.row(i);
    }
    x += dt * v;
    f = forces(w, x);
    for (long i = 0; i < n; ++i) {
      const double h = 0.5 * dt / w.mass[static_cast<size_t>(i)];
      v.row(i) += h * f.row(i);
    }

    if (laser_ && opts.photon_recoil) {
      for (long i = 0; i < n; ++i) {
        const auto& ion = chain_.ions[static_cast<size_t>(i)];
        if (!laser_->addressed.empty() && ion.name != laser_->addressed) continue;
        const double rate = scattering_rate(v.row(i).transpose(), ion, ion.name);
        const long nph = rate > 0 ? rng.poisson(rate * dt) : 0;
        const double v_rec = c::planck_h / (ion.mass * laser_->wavelength);
        for (long p = 0; p < nph; ++p)
          v.row(i) += v_rec * (laser_->k_hat + rng.isotropic_direction()).transpose();
        window_photons += static_cast<double>(nph);
      }
    }
    if (heating_.temperature_rate > 0) {
      for (long i = 0; i < n; ++i) {
        const double sigma = std::sqrt(c::k_boltzmann * heating_.temperature_rate * dt /
                                       w.mass[static_cast<size_t>(i)]);
        for (int a = 0; a < 3; ++a) v(i, a) += sigma * rng.normal();
      }
    }

    if (step % opts.record_every == 0) {
      record(step, window_photons);
      rep.total_scattered += window_photons;
      window_photons = 0;
    }
  }

  const size_t nf = rep.traj.energy.size();
  const size_t tail = std::max<size_t>(1, nf / 4);
  double tsum = 0;
  for (size_t k = nf - tail; k < nf; ++k) {
    double ke = 0;
    for (long i = 0; i < n; ++i)
      ke += 0.5 * w.mass[static_cast<size_t>(i)] * rep.traj.velocities[k].row(i).squaredNorm();
    tsum += 2 * ke / (3 * n * c::k_boltzmann);
  }
  rep.final_temperature = tsum / tail;

  const size_t head = std::max<size_t>(1, nf / 10);
  double e_head = 0, e_tail = 0;
  for (size_t k = 0; k < head; ++k) e_head += rep.traj.energy[k];
  for (size_t k = nf - head; k < nf; ++k) e_tail += rep.traj.energy[k];
  e_head /= head;
  e_tail /= head;
  const double e0 = std::abs(rep.traj.energy.front());
  rep.energy_drift_fraction = std::abs(e_tail - e_head) / (e0 > 0 ? e0 : 1.0);
  return rep;
}

ProtocolResult sympathetic_capture(const crystal::HarmonicTrap& trap, const Species& coolant,
                                   const Species& target, double target_initial_temperature,
                                   const CoolingLaser& laser, const HeatingModel& heating,
                                   double threshold_temperature, const SimOptions& opts,
                                   const IsotopeTable& table) {
  if (threshold_temperature <= 0)
    throw ::trapsim::domain_error("sympathetic_capture: threshold temperature must be > 0");
  crystal::Chain chain;
  chain.trap = trap;
  chain.ions = {coolant, target};
  Simulator sim(chain, laser, heating, table);

  const auto eq = crystal::equilibrium_positions(chain);
  Eigen::MatrixX3d x = Eigen::MatrixX3d::Zero(2, 3);
  x(0, 2) = eq[0];
  x(1, 2) = eq[1];
  Eigen::MatrixX3d v = Eigen::MatrixX3d::Zero(2, 3);
  Philox init_rng(opts.seed, opts.stream + 1000003u);  // separate stream for initial conditions
  const double sigma = std::sqrt(c::k_boltzmann * target_initial_temperature / target.mass);
  for (int a = 0; a < 3; ++a) v(1, a) = sigma * init_rng.normal();

  const SimReport rep = sim.run(opts, x, v);

  ProtocolResult out;
  out.final_temperature = rep.final_temperature;
  out.total_scattered = rep.total_scattered;

  // sliding-window kinetic temperature; window ~2% of frames, at least 8
  const size_t nf = rep.traj.velocities.size();
  const size_t win = std::max<size_t>(8, nf / 50);
  const double m0 = coolant.mass, m1 = target.mass;
  std::vector<double> t_inst(nf);
  for (size_t k = 0; k < nf; ++k) {
    const double ke = 0.5 * m0 * rep.traj.velocities[k].row(0).squaredNorm() +
                      0.5 * m1 * rep.traj.velocities[k].row(1).squaredNorm();
    t_inst[k] = 2 * ke / (3 * 2 * c::k_boltzmann);
  }
  double acc = 0;
  for (size_t k = 0; k < nf; ++k) {
    acc += t_inst[k];
    if (k >= win) acc -= t_inst[k - win];
    if (k + 1 >= win && acc / win < threshold_temperature) {
      out.cooled = true;
      out.time_to_threshold = rep.traj.time[k];
      break;
    }
  }

  const size_t tail_q = std::max<size_t>(1, nf / 4);
  double t_cool = 0;
  for (size_t k = nf - tail_q; k < nf; ++k)
    t_cool += m0 * rep.traj.velocities[k].row(0).squaredNorm() / (3 * c::k_boltzmann);
  out.coolant_final_temperature = t_cool / tail_q;
  out.coolant_survived = out.coolant_final_temperature < threshold_temperature;
  return out;
}

}  // namespace trapsim::cooldyn

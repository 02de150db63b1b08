#include "trapsim/crystal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "trapsim/constants.hpp"
#include "trapsim/errors.hpp"

namespace trapsim::crystal {

namespace c = trapsim::constants;

void HarmonicTrap::validate() const {
  if (!(omega_x > 0 && omega_y > 0 && omega_z > 0))
    throw ::trapsim::domain_error("harmonic trap: all frequencies must be > 0");
  if (!(ref_mass > 0)) throw ::trapsim::domain_error("harmonic trap: ref_mass must be > 0");
  if (charge == 0) throw ::trapsim::domain_error("harmonic trap: charge must be nonzero");
  if (!(omega_z < omega_x && omega_z < omega_y))
    throw structural_error(
        "harmonic trap: axial frequency must be the weakest for a linear chain");
}

double HarmonicTrap::k_axial() const { return ref_mass * omega_z * omega_z; }

double HarmonicTrap::k_radial_x(double mass) const {
  // pseudopotential stiffness: omega scales 1/m, so k scales ref_mass/m
  return ref_mass * omega_x * omega_x * (ref_mass / mass);
}

double HarmonicTrap::k_radial_y(double mass) const {
  return ref_mass * omega_y * omega_y * (ref_mass / mass);
}

double HarmonicTrap::length_scale() const {
  return std::cbrt(c::coulomb_k * charge * charge / k_axial());
}

namespace {

// Dimensionless equilibrium u_i (positions / length_scale): damped Newton on
// grad E, E = sum u^2/2 + sum_{i<j} 1/|u_i - u_j|.
std::vector<double> dimensionless_equilibrium(int n) {
  if (n < 1) throw ::trapsim::domain_error("chain size must be >= 1");
  if (n == 1) return {0.0};

  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u(i) = 1.26 * (i - 0.5 * (n - 1));

  auto grad = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd g = v;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double d = v(i) - v(j);
        g(i) -= (d > 0 ? 1.0 : -1.0) / (d * d);
      }
    return g;
  };
  auto hess = [&](const Eigen::VectorXd& v) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double d3 = std::pow(std::abs(v(i) - v(j)), 3);
        h(i, i) += 2.0 / d3;
        h(i, j) -= 2.0 / d3;
      }
    return h;
  };

  Eigen::VectorXd g = grad(u);
  for (int it = 0; it < 200; ++it) {
    if (g.norm() < 1e-13 * n) break;
    const Eigen::VectorXd du = hess(u).ldlt().solve(-g);
    double t = 1.0;
    for (;;) {
      Eigen::VectorXd u_try = u + t * du;
      std::sort(u_try.data(), u_try.data() + n);
      const Eigen::VectorXd g_try = grad(u_try);
      if (g_try.norm() < g.norm() || t < 1e-10) {
        u = u_try;
        g = g_try;
        break;
      }
      t *= 0.5;
    }
  }
  if (g.norm() >= 1e-10 * n)
    throw convergence_error("chain equilibrium search did not converge for n = " +
                            std::to_string(n));
  return {u.data(), u.data() + n};
}

}  // namespace

std::vector<double> equilibrium_positions(const Chain& chain) {
  chain.trap.validate();
  const double l = chain.trap.length_scale();
  auto u = dimensionless_equilibrium(chain.size());
  for (auto& v : u) v *= l;
  return u;
}

ModeSet normal_modes(const Chain& chain, Axis axis) {
  chain.trap.validate();
  const int n = chain.size();
  const auto u = dimensionless_equilibrium(n);
  const double kz = chain.trap.k_axial();

  // Dimensionless Coulomb coupling B: B_ii = sum 1/|u_ij|^3, B_ij = -1/|u_ij|^3.
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d3 = std::pow(std::abs(u[i] - u[j]), 3);
      B(i, i) += 1.0 / d3;
      B(i, j) -= 1.0 / d3;
    }

  Eigen::MatrixXd K(n, n);
  if (axis == Axis::Z) {
    K = kz * (Eigen::MatrixXd::Identity(n, n) + 2.0 * B);
  } else {
    K = -kz * B;
    for (int i = 0; i < n; ++i) {
      const double m = chain.ions[static_cast<size_t>(i)].mass;
      K(i, i) += (axis == Axis::X) ? chain.trap.k_radial_x(m) : chain.trap.k_radial_y(m);
    }
  }

  Eigen::VectorXd inv_sqrt_m(n);
  for (int i = 0; i < n; ++i)
    inv_sqrt_m(i) = 1.0 / std::sqrt(chain.ions[static_cast<size_t>(i)].mass);
  const Eigen::MatrixXd D = inv_sqrt_m.asDiagonal() * K * inv_sqrt_m.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
  if (es.info() != Eigen::Success) throw convergence_error("mode eigendecomposition failed");

  ModeSet out;
  out.frequencies.resize(n);
  for (int m = 0; m < n; ++m) {
    const double lam = es.eigenvalues()(m);
    if (lam <= 0)
      throw structural_error(
          "chain is not stable along the requested axis (linear-to-zigzag transition?)");
    out.frequencies(m) = std::sqrt(lam);
  }
  out.vectors = es.eigenvectors();
  return out;
}

std::vector<double> per_mode_coverage(const ModeSet& modes, const std::vector<bool>& coolant,
                                      double gamma0) {
  const long n = modes.frequencies.size();
  if (static_cast<long>(coolant.size()) != n)
    throw ::trapsim::domain_error("coolant mask size must match chain size");
  std::vector<double> out(static_cast<size_t>(n));
  for (long m = 0; m < n; ++m) {
    double s = 0;
    for (long i = 0; i < n; ++i)
      if (coolant[static_cast<size_t>(i)]) s += modes.vectors(i, m) * modes.vectors(i, m);
    out[static_cast<size_t>(m)] = gamma0 * s;
  }
  return out;
}

double mode_coverage(const Chain& chain, const std::vector<bool>& coolant, double gamma0) {
  double worst = std::numeric_limits<double>::infinity();
  for (Axis ax : {Axis::X, Axis::Y, Axis::Z}) {
    const ModeSet modes = normal_modes(chain, ax);
    for (double g : per_mode_coverage(modes, coolant, gamma0)) worst = std::min(worst, g);
  }
  return worst;
}

CoverageScan best_coverage(const HarmonicTrap& trap, const Species& coolant,
                           const Species& target, int n_total, int n_coolant) {
  if (n_total < 1 || n_coolant < 0 || n_coolant > n_total)
    throw ::trapsim::domain_error("best_coverage: need 0 <= n_coolant <= n_total");
  CoverageScan out;
  out.chain_size = n_total;
  out.best_min_coverage = -1;

  auto evaluate = [&](const std::vector<bool>& mask) {
    Chain chain;
    chain.trap = trap;
    for (int i = 0; i < n_total; ++i)
      chain.ions.push_back(mask[static_cast<size_t>(i)] ? coolant : target);
    const double cov = mode_coverage(chain, mask, 1.0);
    if (cov > out.best_min_coverage) {
      out.best_min_coverage = cov;
      out.best_placement = mask;
    }
  };

  if (n_total <= 12) {
    std::vector<int> idx(static_cast<size_t>(n_coolant));
    std::iota(idx.begin(), idx.end(), 0);
    // iterate combinations
    for (;;) {
      std::vector<bool> m(static_cast<size_t>(n_total), false);
      for (int i : idx) m[static_cast<size_t>(i)] = true;
      evaluate(m);
      int k = n_coolant - 1;
      while (k >= 0 && idx[static_cast<size_t>(k)] == n_total - n_coolant + k) --k;
      if (k < 0) break;
      ++idx[static_cast<size_t>(k)];
      for (int j = k + 1; j < n_coolant; ++j)
        idx[static_cast<size_t>(j)] = idx[static_cast<size_t>(j - 1)] + 1;
    }
  } else {
    std::vector<bool> mask(static_cast<size_t>(n_total), false);
    for (int placed = 0; placed < n_coolant; ++placed) {
      int best_slot = -1;
      double best = -1;
      for (int s = 0; s < n_total; ++s) {
        if (mask[static_cast<size_t>(s)]) continue;
        auto m = mask;
        m[static_cast<size_t>(s)] = true;
        Chain chain;
        chain.trap = trap;
        for (int i = 0; i < n_total; ++i)
          chain.ions.push_back(m[static_cast<size_t>(i)] ? coolant : target);
        const double cov = mode_coverage(chain, m, 1.0);
        if (cov > best) {
          best = cov;
          best_slot = s;
        }
      }
      mask[static_cast<size_t>(best_slot)] = true;
    }
    evaluate(mask);
  }
  return out;
}

ChainCapacity max_coolable_chain(const HarmonicTrap& trap, const Species& coolant, int n_coolant,
                                 const Species& target, double gamma0, double heating_rate,
                                 int n_cap) {
  if (!(gamma0 > 0) || heating_rate < 0)
    throw ::trapsim::domain_error("max_coolable_chain: need gamma0 > 0 and heating_rate >= 0");
  if (n_coolant < 0 || n_cap < 1)
    throw ::trapsim::domain_error("max_coolable_chain: need n_coolant >= 0 and n_cap >= 1");
  ChainCapacity out;
  out.limited_by = "coverage";
  for (int n = 1; n <= n_cap; ++n) {
    CoverageScan scan;
    try {
      scan = best_coverage(trap, coolant, target, n + n_coolant, n_coolant);
    } catch (const ::trapsim::structural_error&) {
      if (out.n_max == 0)
        throw ::trapsim::structural_error(
            "max_coolable_chain: the linear chain breaks up before any coolable length");
      out.limited_by = "structure";
      return out;
    }
    ChainCapacity::Entry e;
    e.n_targets = n;
    e.chain_size = n + n_coolant;
    e.min_damping = gamma0 * scan.best_min_coverage;
    e.coolable = e.min_damping > heating_rate;
    e.placement = scan.best_placement;
    if (e.coolable) out.n_max = n;
    out.per_n.push_back(std::move(e));
  }
  if (out.n_max == n_cap) out.limited_by = "scan-cap";
  return out;
}

}  // namespace trapsim::crystal

#include "trapsim/lmfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "trapsim/errors.hpp"
#include "trapsim/voigt.hpp"

namespace trapsim::lmfit {

namespace {

Eigen::VectorXd residuals(const ModelFn& model, const std::vector<double>& x,
                          const std::vector<double>& y, const Eigen::VectorXd& p) {
  Eigen::VectorXd r(x.size());
  for (size_t i = 0; i < x.size(); ++i) r(static_cast<long>(i)) = y[i] - model(x[i], p);
  return r;
}

Eigen::VectorXd project(Eigen::VectorXd p, const std::vector<double>& lower) {
  if (!lower.empty())
    for (long j = 0; j < p.size(); ++j)
      if (std::isfinite(lower[static_cast<size_t>(j)]))
        p(j) = std::max(p(j), lower[static_cast<size_t>(j)]);
  return p;
}

}  // namespace

FitResult levmar(const ModelFn& model, const std::vector<double>& x,
                 const std::vector<double>& y, const Eigen::VectorXd& initial,
                 const FitOptions& opts) {
  const long np = initial.size();
  const long n = static_cast<long>(x.size());
  if (x.size() != y.size()) throw ::trapsim::domain_error("levmar: x/y size mismatch");
  if (!opts.fixed.empty() && static_cast<long>(opts.fixed.size()) != np)
    throw ::trapsim::domain_error("levmar: fixed mask size mismatch");
  if (!opts.lower.empty() && static_cast<long>(opts.lower.size()) != np)
    throw ::trapsim::domain_error("levmar: lower bound size mismatch");
  if (!opts.step_scale.empty() && static_cast<long>(opts.step_scale.size()) != np)
    throw ::trapsim::domain_error("levmar: step_scale size mismatch");

  std::vector<long> free;
  for (long j = 0; j < np; ++j)
    if (opts.fixed.empty() || !opts.fixed[static_cast<size_t>(j)]) free.push_back(j);
  const long nf = static_cast<long>(free.size());
  if (nf == 0) throw ::trapsim::domain_error("levmar: no free parameters");
  if (n < nf) throw ::trapsim::domain_error("levmar: fewer points than free parameters");

  auto fd_step = [&](const Eigen::VectorXd& p, long j) {
    const double scale = opts.step_scale.empty()
                             ? std::max(std::abs(p(j)), 1.0)
                             : std::max(std::abs(p(j)), opts.step_scale[static_cast<size_t>(j)]);
    return 1e-7 * scale;
  };
  auto jacobian = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd J(n, nf);
    for (long k = 0; k < nf; ++k) {
      const long j = free[static_cast<size_t>(k)];
      const double h = fd_step(p, j);
      Eigen::VectorXd pp = p, pm = p;
      pp(j) += h;
      pm(j) -= h;
      pp = project(pp, opts.lower);
      pm = project(pm, opts.lower);
      const double span = pp(j) - pm(j);
      for (long i = 0; i < n; ++i)
        J(i, k) = (model(x[static_cast<size_t>(i)], pp) - model(x[static_cast<size_t>(i)], pm)) /
                  span;
    }
    return J;
  };

  FitResult res;
  Eigen::VectorXd p = project(initial, opts.lower);
  Eigen::VectorXd r = residuals(model, x, y, p);
  double chi2 = r.squaredNorm();
  double lambda = opts.lambda0;

  Eigen::MatrixXd J;
  bool refresh = true;
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    if (refresh) {
      J = jacobian(p);
      refresh = false;
    }
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;

    Eigen::MatrixXd Ad = A;
    for (long k = 0; k < nf; ++k) {
      const double d = A(k, k) > 0 ? A(k, k) : 1.0;
      Ad(k, k) += lambda * d;
    }
    const Eigen::VectorXd delta = Ad.ldlt().solve(g);
    if (!delta.allFinite()) {
      lambda = std::min(lambda * 4, 1e12);
      continue;
    }

    Eigen::VectorXd p_try = p;
    for (long k = 0; k < nf; ++k) p_try(free[static_cast<size_t>(k)]) += delta(k);
    p_try = project(p_try, opts.lower);
    const Eigen::VectorXd r_try = residuals(model, x, y, p_try);
    const double chi2_try = r_try.squaredNorm();

    if (chi2_try <= chi2) {  // non-strict: an exact fit yields a zero-gain step
      double step = 0;
      for (long k = 0; k < nf; ++k) {
        const long j = free[static_cast<size_t>(k)];
        step = std::max(step, std::abs(p_try(j) - p(j)) / std::max(std::abs(p(j)), fd_step(p, j)));
      }
      const double gain = (chi2 - chi2_try) / std::max(chi2, 1e-300);
      p = p_try;
      r = r_try;
      chi2 = chi2_try;
      lambda = std::max(lambda / 3, 1e-14);
      refresh = true;
      if (gain < opts.ftol || step < opts.xtol) {
        res.converged = true;
        break;
      }
    } else {
      lambda = lambda * 4;
      if (lambda > 1e12) break;  // stuck; report best point, not converged
    }
  }

  res.params = p;
  res.chi2 = chi2;
  res.stderrs = Eigen::VectorXd::Zero(np);
  const long dof = n - nf;
  if (dof > 0) {
    J = jacobian(p);
    const Eigen::MatrixXd A = J.transpose() * J;
    // Equilibrate before inverting: parameter scales differ by many orders
    // of magnitude (Hz vs dimensionless), and raw J'J overflows the
    // double-precision condition limit even when the fit is well posed.
    Eigen::VectorXd d(nf);
    for (long k = 0; k < nf; ++k) d(k) = A(k, k) > 0 ? 1.0 / std::sqrt(A(k, k)) : 1.0;
    const Eigen::MatrixXd As = d.asDiagonal() * A * d.asDiagonal();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(As);
    if (lu.isInvertible()) {
      const Eigen::MatrixXd cov_s = lu.inverse();
      for (long k = 0; k < nf; ++k) {
        const double v = cov_s(k, k) * d(k) * d(k) * (chi2 / dof);
        res.stderrs(free[static_cast<size_t>(k)]) = v > 0 ? std::sqrt(v) : 0;
      }
    }
  }
  return res;
}

VoigtFit fit_voigt(const std::vector<double>& detuning, const std::vector<double>& signal,
                   const VoigtFitOptions& opts) {
  if (detuning.size() != signal.size() || detuning.size() < 8)
    throw ::trapsim::domain_error("fit_voigt: need matching x/y with >= 8 points");

  // Seed from the data: peak position, half-maximum width, edge baseline.
  const size_t n = signal.size();
  double base = 0.5 * (signal.front() + signal.back());
  size_t ipk = 0;
  for (size_t i = 1; i < n; ++i)
    if (signal[i] > signal[ipk]) ipk = i;
  const double peak = signal[ipk] - base;
  if (!(peak > 0)) throw ::trapsim::domain_error("fit_voigt: no peak above the edge baseline");

  const double half = base + peak / 2;
  auto cross = [&](int dir) {
    size_t i = ipk;
    while (true) {
      const size_t next = i + static_cast<size_t>(dir);
      if (next >= n) return detuning[i];
      if (signal[next] < half) {
        const double t = (signal[i] - half) / (signal[i] - signal[next]);
        return detuning[i] + t * (detuning[next] - detuning[i]);
      }
      i = next;
    }
  };
  const double fwhm_est = std::max(std::abs(cross(+1) - cross(-1)),
                                   2 * std::abs(detuning[1] - detuning[0]));

  Eigen::VectorXd p0(5);
  p0 << detuning[ipk], 0.35 * fwhm_est, 0.65 * fwhm_est, peak * fwhm_est * 1.2, base;
  if (opts.fix_gaussian && opts.fix_lorentzian)
    throw ::trapsim::domain_error("fit_voigt: cannot fix both widths");
  if (opts.fix_gaussian) {
    p0(1) = fwhm_est;
    p0(2) = 0;
  }
  if (opts.fix_lorentzian) {
    p0(1) = 0;
    p0(2) = fwhm_est;
  }

  ModelFn model = [](double x, const Eigen::VectorXd& p) {
    const double lor = std::max(p(1), 0.0);
    const double gau = std::max(p(2), 0.0);
    if (lor == 0 && gau == 0) return p(4);
    return p(4) + p(3) * voigt::voigt_profile(x - p(0), gau, lor);
  };

  FitOptions fo;
  fo.fixed = {false, opts.fix_lorentzian, opts.fix_gaussian, false, false};
  const double inf = std::numeric_limits<double>::infinity();
  fo.lower = {-inf, 0.0, 0.0, 0.0, -inf};
  fo.step_scale = {fwhm_est, fwhm_est, fwhm_est, std::abs(p0(3)), std::max(peak, 1e-30)};

  const FitResult fr = levmar(model, detuning, signal, p0, fo);

  VoigtFit out;
  out.center = fr.params(0);
  out.lorentzian_fwhm = fr.params(1);
  out.gaussian_fwhm = fr.params(2);
  out.amplitude = fr.params(3);
  out.baseline = fr.params(4);
  out.center_err = fr.stderrs(0);
  out.lorentzian_err = fr.stderrs(1);
  out.gaussian_err = fr.stderrs(2);
  out.chi2 = fr.chi2;
  out.converged = fr.converged;
  return out;
}

}  // namespace trapsim::lmfit

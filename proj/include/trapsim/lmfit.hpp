#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace trapsim::lmfit {

// Model: y = f(x, params). Residuals are (data - model), unweighted.
using ModelFn = std::function<double(double x, const Eigen::VectorXd& params)>;

struct FitOptions {
  int max_iterations = 200;
  double ftol = 1e-12;          // relative chi^2 improvement
  double xtol = 1e-12;          // relative step size
  double lambda0 = 1e-3;        // initial damping
  std::vector<bool> fixed;      // per-parameter freeze mask (empty = all free)
  std::vector<double> lower;    // per-parameter lower bounds (empty = none)
  std::vector<double> step_scale;  // typical magnitudes for FD steps (empty = |p| or 1)
};

struct FitResult {
  Eigen::VectorXd params;
  Eigen::VectorXd stderrs;      // sqrt(diag of covariance)
  double chi2 = 0;
  int iterations = 0;
  bool converged = false;
};

FitResult levmar(const ModelFn& model, const std::vector<double>& x,
                 const std::vector<double>& y, const Eigen::VectorXd& initial,
                 const FitOptions& opts = {});

// Voigt line fit: params = {center, lorentzian_fwhm, gaussian_fwhm, amplitude, baseline}.
// amplitude multiplies the area-normalized profile.
struct VoigtFit {
  double center = 0, lorentzian_fwhm = 0, gaussian_fwhm = 0, amplitude = 0, baseline = 0;
  double center_err = 0, lorentzian_err = 0, gaussian_err = 0;
  double chi2 = 0;
  bool converged = false;
};

struct VoigtFitOptions {
  bool fix_gaussian = false;
  bool fix_lorentzian = false;
};

VoigtFit fit_voigt(const std::vector<double>& detuning, const std::vector<double>& signal,
                   const VoigtFitOptions& opts = {});

}  // namespace trapsim::lmfit

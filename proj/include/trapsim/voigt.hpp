#pragma once

#include <complex>

namespace trapsim::voigt {

// Faddeeva function w(z) = exp(-z^2) erfc(-iz), rational approximation
// accurate to ~1e-8 relative over the upper half plane.
std::complex<double> faddeeva(std::complex<double> z);

// Area-normalized Voigt profile as a function of detuning (Hz), parameterized
// by Gaussian and Lorentzian FWHM (Hz). Either width may be zero (reduces to
// the pure counterpart); both zero is a domain error.
double voigt_profile(double detuning, double gaussian_fwhm, double lorentzian_fwhm);

double lorentzian_profile(double detuning, double fwhm);
double gaussian_profile(double detuning, double fwhm);

// FWHM of the Voigt profile (Olivero-Longbothum approximation, <0.02%).
double voigt_fwhm(double gaussian_fwhm, double lorentzian_fwhm);

}  // namespace trapsim::voigt

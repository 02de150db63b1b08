#include "trapsim/voigt.hpp"

#include <cmath>

#include "trapsim/errors.hpp"

namespace trapsim::voigt {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kSqrt2Pi = 2.5066282746310005024;
constexpr double kFwhmToSigma = 0.42466090014400952136;  // 1 / (2 sqrt(2 ln 2))

// Rational approximation of w(z) on the upper half plane: real pole shift L
// and polynomial coefficients from a 40-term Fourier expansion of
// exp(-x^2) under the map Z = (L + iz)/(L - iz). Relative error < 1e-8
// for Im(z) >= 0.
constexpr double kL = 5.3182958969449885;
constexpr double kA[40] = {
    2.899624509389705,       2.6160541527618597,      2.201513794878312,
    1.7253830848179779,      1.2563815675765133,      0.8472174576593815,
    0.5266528988277086,      0.2998943799615006,      0.15504263802479504,
    0.07182361779074328,     0.02920291647124188,     0.010048186242783535,
    0.002705405633073729,    0.000439807015986967,    -3.939363145483805e-05,
    -5.5913092642348794e-05, -1.8007447144723407e-05, -1.066013898416273e-06,
    1.4835661133172014e-06,  5.912136953029057e-07,   1.419864237295343e-08,
    -6.351773483015411e-08,  -1.8315616834296834e-08, 3.249746582945079e-09,
    3.017780425551564e-09,   2.1085990731251058e-10,  -3.5632350403602684e-10,
    -9.055138860958323e-11,  3.4727420938907015e-11,  1.771418567386718e-11,
    -2.7277735625830245e-12, -2.90771851041427e-12,   1.203330952919568e-13,
    4.5341448909434655e-13,  1.3778224047664046e-14,  -7.071088022159408e-14,
    -5.231716366324404e-15,  1.1519170220749485e-14,  1.201674910759281e-15,
    -1.7356980998791865e-15};

std::complex<double> faddeeva_upper(std::complex<double> z) {
  const std::complex<double> iz(-z.imag(), z.real());
  const std::complex<double> den = kL - iz;
  const std::complex<double> Z = (kL + iz) / den;
  std::complex<double> p = kA[39];
  for (int k = 38; k >= 0; --k) p = p * Z + kA[k];
  return 2.0 * p / (den * den) + (1.0 / kSqrtPi) / den;
}

}  // namespace

std::complex<double> faddeeva(std::complex<double> z) {
  if (z.imag() >= 0) return faddeeva_upper(z);
  // w(z) = 2 exp(-z^2) - conj(w(conj(z))); overflows for deeply negative Im(z).
  const std::complex<double> w = faddeeva_upper(std::conj(z));
  return 2.0 * std::exp(-z * z) - std::conj(w);
}

double lorentzian_profile(double detuning, double fwhm) {
  if (!(fwhm > 0)) throw ::trapsim::domain_error("lorentzian_profile: fwhm must be > 0");
  const double hwhm = fwhm / 2;
  return hwhm / (M_PI * (detuning * detuning + hwhm * hwhm));
}

double gaussian_profile(double detuning, double fwhm) {
  if (!(fwhm > 0)) throw ::trapsim::domain_error("gaussian_profile: fwhm must be > 0");
  const double sigma = fwhm * kFwhmToSigma;
  const double u = detuning / sigma;
  return std::exp(-0.5 * u * u) / (sigma * kSqrt2Pi);
}

double voigt_profile(double detuning, double gaussian_fwhm, double lorentzian_fwhm) {
  if (gaussian_fwhm < 0 || lorentzian_fwhm < 0)
    throw ::trapsim::domain_error("voigt_profile: widths must be >= 0");
  if (gaussian_fwhm == 0 && lorentzian_fwhm == 0)
    throw ::trapsim::domain_error("voigt_profile: at least one width must be > 0");
  if (gaussian_fwhm == 0) return lorentzian_profile(detuning, lorentzian_fwhm);
  if (lorentzian_fwhm == 0) return gaussian_profile(detuning, gaussian_fwhm);

  const double sigma = gaussian_fwhm * kFwhmToSigma;
  const double gamma = lorentzian_fwhm / 2;
  const std::complex<double> z(detuning / (sigma * M_SQRT2), gamma / (sigma * M_SQRT2));
  return faddeeva_upper(z).real() / (sigma * kSqrt2Pi);
}

double voigt_fwhm(double gaussian_fwhm, double lorentzian_fwhm) {
  if (gaussian_fwhm < 0 || lorentzian_fwhm < 0)
    throw ::trapsim::domain_error("voigt_fwhm: widths must be >= 0");
  // Olivero-Longbothum, accurate to ~0.02%
  return 0.5346 * lorentzian_fwhm +
         std::sqrt(0.2166 * lorentzian_fwhm * lorentzian_fwhm + gaussian_fwhm * gaussian_fwhm);
}

}  // namespace trapsim::voigt

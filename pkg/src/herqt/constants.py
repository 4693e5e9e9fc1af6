"""Physical constants and unit helpers (SI throughout: rad/s, m, s)."""

import numpy as np

C = 299792458.0  # speed of light, m/s

TWO_PI = 2.0 * np.pi


def wavelength_to_omega(lam):
    """Vacuum wavelength (m) -> angular frequency (rad/s)."""
    return TWO_PI * C / np.asarray(lam, dtype=float)


def omega_to_wavelength(omega):
    """Angular frequency (rad/s) -> vacuum wavelength (m)."""
    return TWO_PI * C / np.asarray(omega, dtype=float)


def fwhm_wavelength_to_fwhm_omega(fwhm_lam, center_lam):
    """Convert a spectral FWHM in wavelength to FWHM in angular frequency
    at the given carrier (first-order Jacobian)."""
    return TWO_PI * C * fwhm_lam / center_lam**2


# Intensity-FWHM -> standard deviation of the intensity spectrum for a
# Gaussian line: FWHM = 2*sqrt(2 ln 2) * sigma_I.
_FWHM_TO_SIGMA_I = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def fwhm_to_sigma_intensity(fwhm):
    return fwhm * _FWHM_TO_SIGMA_I


# Intensity-FWHM -> standard deviation of the *amplitude* Gaussian
# exp(-x^2 / (2 sigma_a^2)); then |A|^2 has the requested intensity FWHM:
# sigma_a = FWHM / (2 sqrt(ln 2)).
def fwhm_to_sigma_amplitude(fwhm):
    return fwhm / (2.0 * np.sqrt(np.log(2.0)))

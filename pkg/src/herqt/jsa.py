"""Joint spectral amplitude of the FWM pair state and its Schmidt analysis."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from .constants import TWO_PI, fwhm_to_sigma_amplitude, fwhm_wavelength_to_fwhm_omega, \
    wavelength_to_omega
from .dispersion import gvm
from .errors import (
    ConstraintViolationError,
    NonPositiveLengthError,
    OutOfRangeError,
    SvdFailureError,
)
from .phasematching import PhasematchConfig, delta_k

# intensity-FWHM of sinc^2(tau Omega / 2) expressed as a Gaussian-equivalent
# standard deviation: 2 * 1.39156 * (2/tau) / 2.3548 = 2.3636 / tau
_SINC_STD = 2.3636


class PumpShape(Enum):
    GAUSSIAN = "Gaussian"


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform tensor grid over (signal, idler) angular frequencies with
    trapezoid quadrature weights."""

    axis_s: np.ndarray  # (Ns,) rad/s
    axis_i: np.ndarray  # (Ni,) rad/s
    weights_s: np.ndarray
    weights_i: np.ndarray

    def __post_init__(self):
        for ax, w in ((self.axis_s, self.weights_s),
                      (self.axis_i, self.weights_i)):
            if ax.size < 2 or np.any(np.diff(ax) <= 0.0):
                raise ConstraintViolationError("grid axes must be increasing")
            if np.any(w <= 0.0):
                raise ConstraintViolationError("quadrature weights must be > 0")
            h = ax[1] - ax[0]
            ref = np.full(ax.size, h)
            ref[0] = ref[-1] = 0.5 * h
            if not np.allclose(w, ref, rtol=1e-9):
                raise ConstraintViolationError(
                    "weights are not trapezoid weights for this spacing"
                )

    @classmethod
    def regular(cls, center_s, half_span_s, center_i, half_span_i,
                n_s=256, n_i=None):
        n_i = n_s if n_i is None else n_i
        ax_s = np.linspace(center_s - half_span_s, center_s + half_span_s, n_s)
        ax_i = np.linspace(center_i - half_span_i, center_i + half_span_i, n_i)
        return cls(ax_s, ax_i, _trapezoid_weights(ax_s),
                   _trapezoid_weights(ax_i))


def _trapezoid_weights(ax):
    h = ax[1] - ax[0]
    w = np.full(ax.size, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class PumpEnvelope:
    """Gaussian pump spectral amplitude, quoted as intensity FWHM in
    wavelength.  sigma_amplitude = FWHM_intensity / (2 sqrt(ln 2))."""

    center_wavelength: float  # m
    fwhm_wavelength: float  # m
    shape: PumpShape = PumpShape.GAUSSIAN

    def __post_init__(self):
        if self.fwhm_wavelength <= 0.0 or self.center_wavelength <= 0.0:
            raise ConstraintViolationError("pump needs positive center/fwhm")

    @property
    def center_omega(self) -> float:
        return wavelength_to_omega(self.center_wavelength)

    @property
    def sigma_amplitude(self) -> float:
        """Gaussian amplitude width (rad/s)."""
        fwhm_om = fwhm_wavelength_to_fwhm_omega(self.fwhm_wavelength,
                                                self.center_wavelength)
        return fwhm_to_sigma_amplitude(fwhm_om)

    def amplitude(self, omega, weights=None):
        """Spectral amplitude at omega; unit L2 norm when weights given."""
        s = self.sigma_amplitude
        e = np.exp(-((np.asarray(omega, dtype=float) - self.center_omega) ** 2)
                   / (2.0 * s * s))
        if weights is not None:
            e = e / np.sqrt(np.sum(weights * e * e))
        return e


@dataclass(frozen=True)
class JointAmplitude:
    grid: SpectralGrid
    values: np.ndarray  # (Ns, Ni) complex, unit weighted L2 norm
    gain: complex  # physical scale absorbed during normalization


@dataclass(frozen=True)
class SchmidtResult:
    coefficients: np.ndarray  # descending, sums to 1
    signal_modes: np.ndarray  # (n_modes, Ns), orthonormal under weights
    idler_modes: np.ndarray  # (n_modes, Ni)
    K: float  # cooperativity
    purity: float  # 1 / K


def default_grid(cfg: PhasematchConfig, pump: PumpEnvelope, length,
                 omega_s0, omega_i0, n=256, span_sigmas=6.0) -> SpectralGrid:
    """Grid spanning +/- span_sigmas marginal standard deviations around the
    operating point (broad pump-limited arm x sinc-limited arm)."""
    r = gvm(cfg.model, length, pump.center_omega, omega_s0, omega_i0)
    sig = pump.sigma_amplitude
    std_s = np.hypot(sig, _SINC_STD / abs(r.tau_s)) if r.tau_s != 0.0 \
        else np.hypot(sig, sig)
    std_i = np.hypot(sig, _SINC_STD / abs(r.tau_i)) if r.tau_i != 0.0 \
        else np.hypot(sig, sig)
    std_s = min(std_s, np.hypot(sig, sig))
    std_i = min(std_i, np.hypot(sig, sig))
    return SpectralGrid.regular(omega_s0, span_sigmas * std_s,
                                omega_i0, span_sigmas * std_i, n, n)


def build_jsa(cfg: PhasematchConfig, pump: PumpEnvelope, length,
              grid: SpectralGrid, exact_pump_convolution=False,
              n_pump_quadrature=65) -> JointAmplitude:
    """F[j,k] = A(ws_j + wi_k) sinc(L dk / 2) exp(i L dk / 2).

    A is the self-convolution of the Gaussian pump amplitude (sqrt(2) times
    the pump amplitude width, centered at twice the pump carrier); dk is
    evaluated at the monochromatic-pump point w_p = (ws + wi)/2.  With
    exact_pump_convolution the pump line is integrated by quadrature and dk
    is evaluated per pump-frequency pair.
    """
    if length <= 0.0:
        raise NonPositiveLengthError("fiber length must be positive")
    lo, hi = cfg.model.valid_range
    ws = grid.axis_s[:, np.newaxis]
    wi = grid.axis_i[np.newaxis, :]
    if grid.axis_s[0] < lo or grid.axis_s[-1] > hi \
            or grid.axis_i[0] < lo or grid.axis_i[-1] > hi:
        raise OutOfRangeError("grid leaves the dispersion valid_range")

    sig = pump.sigma_amplitude
    wp0 = pump.center_omega
    if not exact_pump_convolution:
        total = ws + wi
        a_env = np.exp(-((total - 2.0 * wp0) ** 2) / (4.0 * sig * sig))
        dk = delta_k(cfg, 0.5 * total, ws, wi)
        x = 0.5 * length * dk
        values = a_env * np.sinc(x / np.pi) * np.exp(1j * x)
    else:
        q = np.linspace(wp0 - 5.0 * sig, wp0 + 5.0 * sig, n_pump_quadrature)
        values = np.zeros((grid.axis_s.size, grid.axis_i.size),
                          dtype=complex)
        k_pair = (cfg.model.propagation_constant(ws)
                  + cfg.model.propagation_constant(wi))
        for wq in q:
            partner = ws + wi - wq  # second pump photon
            amp = pump.amplitude(wq) * pump.amplitude(partner)
            dk = (cfg.model.propagation_constant(wq)
                  + cfg.model.propagation_constant(partner)
                  - k_pair - cfg.phi_nl)
            x = 0.5 * length * dk
            values += amp * np.sinc(x / np.pi) * np.exp(1j * x)
        values *= q[1] - q[0]

    norm2 = np.einsum("j,jk,k->", grid.weights_s,
                      np.abs(values) ** 2, grid.weights_i)
    if norm2 <= 0.0:
        raise ConstraintViolationError("joint amplitude vanishes on the grid")
    gain = np.sqrt(norm2)
    return JointAmplitude(grid=grid, values=values / gain, gain=gain)


def swap_arms(F: JointAmplitude) -> JointAmplitude:
    """Exchange the two generation arms of a joint amplitude.

    The heralding kernel is always built over the first grid axis with the
    detector response on the second; swapping selects which arm is retained
    and which is detected.  The Schmidt spectrum is unchanged.
    """
    g = F.grid
    swapped = SpectralGrid(axis_s=g.axis_i, axis_i=g.axis_s,
                           weights_s=g.weights_i, weights_i=g.weights_s)
    return JointAmplitude(grid=swapped, values=np.ascontiguousarray(F.values.T),
                          gain=F.gain)


def jsi(F: JointAmplitude) -> np.ndarray:
    """Joint spectral intensity |F|^2 (sums to 1 under the grid weights)."""
    return np.abs(F.values) ** 2


def schmidt_decompose(F: JointAmplitude) -> SchmidtResult:
    """Schmidt decomposition via SVD of the quadrature-weighted kernel."""
    g = F.grid
    m = np.sqrt(g.weights_s)[:, np.newaxis] * F.values \
        * np.sqrt(g.weights_i)[np.newaxis, :]
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdFailureError(str(exc)) from exc
    lam = s ** 2
    lam_sum = lam.sum()
    lam = lam / lam_sum
    k_coop = 1.0 / np.sum(lam ** 2)
    signal_modes = (u / np.sqrt(g.weights_s)[:, np.newaxis]).T
    idler_modes = (vh.conj() / np.sqrt(g.weights_i)[np.newaxis, :])
    return SchmidtResult(
        coefficients=lam,
        signal_modes=signal_modes,
        idler_modes=idler_modes,
        K=float(k_coop),
        purity=float(1.0 / k_coop),
    )

"""Heralded-state spectral kernel, heralded purity, and heralding efficiency.

Detecting a single idler photon behind a (possibly flat) spectral filter
projects the signal field onto a mixed single-photon state whose spectral
correlations are captured by the Hermitian kernel

    G(ws', ws'') = sum_k w_k |d(w_k)|^2 F(ws', w_k) F*(ws'', w_k),

with ``|d|^2`` the detector's intensity transmission.  With a flat detector
the eigenvalues of G coincide with the Schmidt coefficients of F, so the
heralded purity Tr(G^2) reduces to the inverse Schmidt number.

When a faint coherent seed co-propagates with the signal, the herald
prepares a photon-added coherent state.  ``heralding_efficiency`` evaluates
the joint detection probability for that target state in a truncated Fock
representation, in a frame displaced by the seed so a small photon-number
cutoff is exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .constants import (
    fwhm_to_sigma_intensity,
    fwhm_wavelength_to_fwhm_omega,
    wavelength_to_omega,
)
from .errors import (
    ConstraintViolationError,
    EmptyOverlapError,
    RankDeficientWarning,
    TruncationUnconvergedError,
)
from .fockspace import FockSpace, annihilation, creation, orthonormalize
from .jsa import JointAmplitude

_MODE_MASS = 0.999
_MAX_MODES = 4


class FilterKind(Enum):
    FLAT = "flat"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class DetectorFilter:
    """Spectral intensity transmission of the heralding detector."""

    kind: FilterKind
    center_wavelength: Optional[float] = None  # m
    fwhm_wavelength: Optional[float] = None  # m, intensity FWHM

    @classmethod
    def flat(cls) -> "DetectorFilter":
        return cls(kind=FilterKind.FLAT)

    @classmethod
    def gaussian(cls, center_wavelength: float,
                 fwhm_wavelength: float) -> "DetectorFilter":
        if center_wavelength <= 0.0 or fwhm_wavelength <= 0.0:
            raise ConstraintViolationError("filter center and width must "
                                           "be positive")
        return cls(kind=FilterKind.GAUSSIAN,
                   center_wavelength=center_wavelength,
                   fwhm_wavelength=fwhm_wavelength)

    def transmission(self, omega) -> np.ndarray:
        """Intensity transmission |d(omega)|^2 on the given frequencies."""
        omega = np.asarray(omega, dtype=float)
        if self.kind is FilterKind.FLAT:
            return np.ones_like(omega)
        center = wavelength_to_omega(self.center_wavelength)
        fwhm = fwhm_wavelength_to_fwhm_omega(self.fwhm_wavelength,
                                             self.center_wavelength)
        sigma = fwhm_to_sigma_intensity(fwhm)
        return np.exp(-0.5 * ((omega - center) / sigma) ** 2)


@dataclass(frozen=True)
class HeraldKernel:
    """Signal-frequency kernel of the heralded single-photon component."""

    axis: np.ndarray  # signal frequencies, rad/s
    weights: np.ndarray  # quadrature weights
    values: np.ndarray  # G[j, k], Hermitian
    herald_weight: float  # trace before normalization
    normalized: bool = True

    def __post_init__(self):
        g = self.values
        scale = float(np.max(np.abs(g)))
        if np.max(np.abs(g - g.conj().T)) > 1e-12 * max(1.0, scale):
            raise ConstraintViolationError("kernel must be Hermitian")
        mu = np.linalg.eigvalsh(self._weighted())
        tr = float(mu.sum())
        if mu.min() < -1e-10 * abs(tr):
            raise ConstraintViolationError(
                f"kernel not positive semidefinite ({mu.min():.3g})")
        if self.normalized and abs(tr - 1.0) > 1e-10:
            raise ConstraintViolationError("normalized kernel must have "
                                           "unit trace under the weights")

    def _weighted(self) -> np.ndarray:
        root = np.sqrt(self.weights)
        return self.values * np.outer(root, root)

    def eigensystem(self) -> Tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (descending) and orthonormal spectral eigenmodes."""
        mu, u = np.linalg.eigh(self._weighted())
        order = np.argsort(mu)[::-1]
        mu = mu[order]
        modes = (u[:, order] / np.sqrt(self.weights)[:, None]).T
        return mu, modes


def herald_kernel(F: JointAmplitude,
                  detector: Optional[DetectorFilter] = None) -> HeraldKernel:
    """Build the heralded-state kernel for a given detector filter.

    The returned kernel is trace-normalized; ``herald_weight`` carries the
    pre-normalization trace (the relative herald probability).
    """
    if detector is None:
        detector = DetectorFilter.flat()
    grid = F.grid
    t = detector.transmission(grid.axis_i)
    g = F.values @ np.diag(grid.weights_i * t) @ F.values.conj().T
    weight = float(np.real(np.sum(grid.weights_s * np.diag(g))))
    if weight < 1e-12:
        raise EmptyOverlapError("detector filter does not overlap the "
                                "idler grid")
    return HeraldKernel(axis=grid.axis_s, weights=grid.weights_s,
                        values=g / weight, herald_weight=weight)


def heralded_purity(kernel: HeraldKernel) -> float:
    """Tr(G^2) of a normalized kernel; 1/K for an unfiltered herald."""
    if not kernel.normalized:
        raise ConstraintViolationError("purity needs a normalized kernel")
    m = kernel._weighted()
    return float(np.real(np.trace(m @ m)))


@dataclass(frozen=True)
class HeraldingEfficiencyResult:
    alpha0: complex
    p_a: float  # herald probability relative to an unfiltered herald
    p_ab: float  # joint probability with target-state detection (eta = 1)
    p_h_over_eta: float

    def __post_init__(self):
        if not 0.0 <= self.p_ab <= self.p_a <= 1.0 + 1e-12:
            raise ConstraintViolationError("probabilities out of order")


def _conditional_fidelity(mu: np.ndarray, coeffs: np.ndarray,
                          alpha0: complex, n_modes: int,
                          cutoff: int, tail_mass: float = 0.0) -> float:
    """Overlap of the heralded state with the ideal photon-added coherent
    state, computed on a truncated Fock space in the seed-displaced frame."""
    space = FockSpace(n_arms=1, n_modes_per_arm=n_modes, cutoff=cutoff)
    vac = np.zeros(space.dim, dtype=complex)
    vac[0] = 1.0
    gammas = alpha0 * coeffs
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    for n, mu_n in enumerate(mu):
        if mu_n == 0.0:
            continue
        v = (creation(space, 0, n) @ vac
             + np.conj(gammas[n]) * vac)
        rho += mu_n * np.outer(v, v.conj())
    a_seed = sum(np.conj(c) * annihilation(space, 0, n)
                 for n, c in enumerate(coeffs))
    psi = a_seed.conj().T @ vac + np.conj(alpha0) * vac
    psi /= np.linalg.norm(psi)
    num = np.real(psi.conj() @ rho @ psi)
    # eigenmodes beyond the retained set carry their photon into modes the
    # target state does not occupy: they add to the trace, not the overlap
    den = np.real(np.trace(rho)) + tail_mass
    return float(num / den)


def heralding_efficiency(F: JointAmplitude, alpha0: complex,
                         detector: Optional[DetectorFilter] = None,
                         coherent_envelope: Optional[np.ndarray] = None,
                         cutoff: int = 3) -> HeraldingEfficiencyResult:
    """Joint probability of a herald click and a detection of the ideal
    heralded state (photon-added coherent, or single photon at alpha0 = 0),
    relative to the herald probability.  Detector efficiency is symbolic:
    the returned ratio is P_H / eta.
    """
    if abs(alpha0) ** 2 > 4.0:
        raise ConstraintViolationError("|alpha0|^2 must be at most 4")
    if detector is None:
        detector = DetectorFilter.flat()
    kernel = herald_kernel(F, detector)
    flat_weight = herald_kernel(F, DetectorFilter.flat()).herald_weight
    p_a = min(1.0, kernel.herald_weight / flat_weight)

    mu, modes = kernel.eigensystem()
    mu = np.clip(mu, 0.0, None)
    n_keep = int(np.searchsorted(np.cumsum(mu), _MODE_MASS) + 1)
    n_keep = min(n_keep, _MAX_MODES, len(mu))
    mu_kept = mu[:n_keep]

    grid_w = kernel.weights
    if coherent_envelope is None:
        seed = modes[0]
    else:
        seed = np.asarray(coherent_envelope, dtype=complex)
        nrm = np.sqrt(np.real(np.sum(grid_w * np.abs(seed) ** 2)))
        if not np.isclose(nrm, 1.0, rtol=1e-8):
            raise ConstraintViolationError("seed envelope must be "
                                           "unit-norm")
    # expand the seed on the retained eigenmodes; a residual component
    # outside their span becomes one extra orthogonal mode (a seed inside
    # the span is the expected case, not a rank problem)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientWarning)
        basis = orthonormalize(list(modes[:n_keep]) + [seed],
                               kernel.axis, grid_w)
    coeffs = np.zeros(basis.n_modes, dtype=complex)
    c_seed = basis.coefficients[-1]
    coeffs[:len(c_seed)] = c_seed
    mu_full = np.zeros(basis.n_modes)
    mu_full[:n_keep] = mu_kept

    tail = max(0.0, float(mu.sum() - mu_kept.sum()))
    fid = _conditional_fidelity(mu_full, coeffs, alpha0,
                                basis.n_modes, cutoff, tail)
    fid_up = _conditional_fidelity(mu_full, coeffs, alpha0,
                                   basis.n_modes, cutoff + 1, tail)
    if abs(fid - fid_up) > 1e-3:
        raise TruncationUnconvergedError(
            f"cutoff sweep moved the result by {abs(fid - fid_up):.3g}")
    return HeraldingEfficiencyResult(alpha0=alpha0, p_a=p_a,
                                     p_ab=p_a * fid, p_h_over_eta=fid)

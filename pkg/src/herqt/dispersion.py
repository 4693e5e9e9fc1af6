"""Fiber dispersion models: propagation constant, group velocity, GVM angle.

The default model for the nonlinear fiber is a fused-silica core with an
air/silica effective cladding, with the core radius and the cladding air
fill as calibration knobs.  ``CALIBRATED_CORE_RADIUS`` and
``CALIBRATED_AIR_FILL`` pin the factorable operating point to a 751.1 nm
pump with a group-velocity-matched idler arm.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import j0, j1, k0e, k1e

from .constants import C, TWO_PI, wavelength_to_omega
from .errors import (
    DegenerateGvmError,
    ModelUnderspecifiedError,
    NonPositiveSlopeError,
    OutOfRangeError,
)

# First zero of J0; the LP01 eigenvalue u lies in (0, min(V, J0_ZERO)).
_J0_ZERO = 2.404825557695773

# Relative step for central finite differences (balances truncation vs
# round-off for double-precision wavenumbers).
FD_RELATIVE_STEP = 1e-6

# Sellmeier coefficients for fused silica (Malitson), wavelength in um.
_SELLMEIER_B = np.array([0.6961663, 0.4079426, 0.8974794])
_SELLMEIER_C2 = np.array([0.0684043, 0.1162414, 9.896161]) ** 2


def silica_index(omega):
    """Refractive index of fused silica at angular frequency omega (rad/s)."""
    lam_um = (TWO_PI * C / np.asarray(omega, dtype=float)) * 1e6
    l2 = lam_um**2
    n2 = 1.0 + sum(b * l2 / (l2 - c2) for b, c2 in zip(_SELLMEIER_B, _SELLMEIER_C2))
    return np.sqrt(n2)


def cladding_index(omega, air_fill):
    """Effective cladding index of an air/silica microstructured cladding.

    Volume-averaged permittivity between air (fraction ``air_fill``) and
    fused silica; air_fill = 1 reduces to a bare strand in air.
    """
    if air_fill >= 1.0:
        return np.ones_like(np.asarray(omega, dtype=float))
    n2 = silica_index(omega) ** 2
    return np.sqrt(air_fill + (1.0 - air_fill) * n2)


def _lp01_eigenvalue(v):
    """Fundamental-mode eigenvalue u for normalized frequency V (vectorized).

    Solves u J1(u)/J0(u) = w K1(w)/K0(w), w = sqrt(V^2 - u^2), by bisection
    on the bracket (0, min(V, j01)) which contains exactly the LP01 root.
    """
    v = np.asarray(v, dtype=float)
    hi = np.minimum(v, _J0_ZERO) * (1.0 - 1e-13)
    lo = np.full_like(hi, 1e-12)

    def f(u):
        w = np.sqrt(np.maximum(v**2 - u**2, 1e-300))
        return u * j1(u) / j0(u) - w * k1e(w) / k0e(w)

    for _ in range(90):
        mid = 0.5 * (lo + hi)
        neg = f(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


class ModelKind(Enum):
    STEP_INDEX_STRAND = "StepIndexStrand"
    TABULATED_BETA = "TabulatedBeta"
    POLYNOMIAL_BETA = "PolynomialBeta"


@dataclass(frozen=True)
class DispersionModel:
    """Propagation constant k(omega) of the nonlinear fiber.

    Immutable after construction; all evaluation methods are pure and accept
    scalars or numpy arrays of angular frequency.
    """

    kind: ModelKind
    valid_range: Tuple[float, float]  # (omega_min, omega_max), rad/s
    core_radius: Optional[float] = None  # m, StepIndexStrand
    air_fill: float = 1.0  # cladding air fraction, StepIndexStrand
    beta_coeffs: Optional[Tuple[float, ...]] = None  # s^n/m, PolynomialBeta
    omega_ref: Optional[float] = None  # rad/s, PolynomialBeta expansion point
    table: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = None
    _interp: Optional[PchipInterpolator] = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        lo, hi = self.valid_range
        if not (np.isfinite(lo) and np.isfinite(hi) and 0.0 < lo < hi):
            raise ModelUnderspecifiedError(f"bad valid_range {self.valid_range}")
        if self.kind is ModelKind.STEP_INDEX_STRAND:
            if self.core_radius is None or self.core_radius <= 0.0:
                raise ModelUnderspecifiedError("StepIndexStrand needs core_radius > 0")
        elif self.kind is ModelKind.POLYNOMIAL_BETA:
            if not self.beta_coeffs or self.omega_ref is None:
                raise ModelUnderspecifiedError(
                    "PolynomialBeta needs beta_coeffs and omega_ref"
                )
        elif self.kind is ModelKind.TABULATED_BETA:
            if self.table is None:
                raise ModelUnderspecifiedError("TabulatedBeta needs a (omega, k) table")
            om, k = (np.asarray(a, dtype=float) for a in self.table)
            if om.size < 4:
                raise ModelUnderspecifiedError("table needs at least 4 samples")
            if np.any(np.diff(om) <= 0.0):
                raise ModelUnderspecifiedError("table omega must be strictly increasing")
            # monotone piecewise-cubic: no spurious group-velocity sign flips
            object.__setattr__(self, "_interp", PchipInterpolator(om, k))

    # ---- constructors -------------------------------------------------

    @classmethod
    def step_index_strand(cls, core_radius, air_fill=1.0,
                          wavelength_range=(0.35e-6, 2.2e-6)):
        """Fused-silica core with an air/silica effective cladding.

        air_fill = 1 is a bare strand in air; smaller values emulate the
        finite air-filling fraction of a microstructured cladding.
        """
        w_lo, w_hi = wavelength_range
        return cls(
            kind=ModelKind.STEP_INDEX_STRAND,
            valid_range=(wavelength_to_omega(w_hi), wavelength_to_omega(w_lo)),
            core_radius=float(core_radius),
            air_fill=float(air_fill),
        )

    @classmethod
    def polynomial(cls, beta_coeffs, omega_ref, valid_range):
        """Taylor model k(w) = sum_n beta_n (w - omega_ref)^n / n!."""
        return cls(
            kind=ModelKind.POLYNOMIAL_BETA,
            valid_range=tuple(valid_range),
            beta_coeffs=tuple(float(b) for b in beta_coeffs),
            omega_ref=float(omega_ref),
        )

    @classmethod
    def tabulated(cls, omega, k):
        om = np.asarray(omega, dtype=float)
        return cls(
            kind=ModelKind.TABULATED_BETA,
            valid_range=(float(om[0]), float(om[-1])),
            table=(tuple(om.tolist()), tuple(np.asarray(k, float).tolist())),
        )

    @classmethod
    def from_csv(cls, path):
        """Two-column CSV (omega_rad_per_s, k_per_m) with a header row."""
        omegas, ks = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if len(header) < 2:
                raise ModelUnderspecifiedError("CSV needs two columns and a header")
            for row in reader:
                if not row or row[0].lstrip().startswith("#"):
                    continue
                omegas.append(float(row[0]))
                ks.append(float(row[1]))
        return cls.tabulated(omegas, ks)

    # ---- evaluation ---------------------------------------------------

    def _check_range(self, omega, margin=0.0):
        om = np.asarray(omega, dtype=float)
        lo, hi = self.valid_range
        lo, hi = lo * (1.0 + margin), hi * (1.0 - margin)
        if np.any(om < lo) or np.any(om > hi):
            raise OutOfRangeError(
                f"omega outside valid range [{lo:.6g}, {hi:.6g}] rad/s"
            )
        return om

    def _k_raw(self, om):
        if self.kind is ModelKind.STEP_INDEX_STRAND:
            n_co = silica_index(om)
            n_cl = cladding_index(om, self.air_fill)
            k0 = om / C
            v = k0 * self.core_radius * np.sqrt(n_co**2 - n_cl**2)
            u = _lp01_eigenvalue(v)
            b = 1.0 - (u / v) ** 2
            n_eff = np.sqrt(n_cl**2 + b * (n_co**2 - n_cl**2))
            return n_eff * k0
        if self.kind is ModelKind.POLYNOMIAL_BETA:
            d = om - self.omega_ref
            out = np.zeros_like(np.asarray(d, dtype=float))
            fact = 1.0
            for n, bn in enumerate(self.beta_coeffs):
                if n > 0:
                    fact *= n
                out = out + bn * d**n / fact
            return out
        return self._interp(om)

    def propagation_constant(self, omega):
        """k(omega) in 1/m."""
        om = self._check_range(omega)
        return self._k_raw(om)

    def group_velocity(self, omega):
        """1/(dk/domega) in m/s.

        Analytic derivative for PolynomialBeta and TabulatedBeta (derivative
        of the interpolant); central finite differences for the strand.
        """
        om = self._check_range(omega, margin=0.0)
        if self.kind is ModelKind.POLYNOMIAL_BETA:
            d = om - self.omega_ref
            slope = np.zeros_like(np.asarray(d, dtype=float))
            fact = 1.0
            for n, bn in enumerate(self.beta_coeffs):
                if n == 0:
                    continue
                fact *= n
                slope = slope + n * bn * d ** (n - 1) / fact
        elif self.kind is ModelKind.TABULATED_BETA:
            slope = self._interp.derivative()(om)
        else:
            h = FD_RELATIVE_STEP * om
            self._check_range(om + h)
            self._check_range(om - h)
            slope = (self._k_raw(om + h) - self._k_raw(om - h)) / (2.0 * h)
        if np.any(slope <= 0.0):
            raise NonPositiveSlopeError("dk/domega <= 0; group velocity undefined")
        return 1.0 / slope


@dataclass(frozen=True)
class GvmResult:
    """Group-delay mismatches and the JSI orientation angle."""

    tau_s: float  # s
    tau_i: float  # s
    theta_si: float  # degrees, in [-90, 90]


def gvm(model: DispersionModel, length, omega_p0, omega_s0, omega_i0) -> GvmResult:
    """Group-delay mismatches tau_mu = L [1/vg(w_p) - 1/vg(w_mu)] and the
    JSI orientation angle theta_si = -arctan(tau_s / tau_i).

    The angle is quadrant-handled so that tau_i = 0 with tau_s != 0 maps to
    +/-90 deg, and is independent of L (the length cancels in the ratio).
    """
    if length <= 0.0:
        raise DegenerateGvmError("fiber length must be positive")
    inv_p = 1.0 / model.group_velocity(omega_p0)
    tau_s = float(length * (inv_p - 1.0 / model.group_velocity(omega_s0)))
    tau_i = float(length * (inv_p - 1.0 / model.group_velocity(omega_i0)))
    if tau_s == 0.0 and tau_i == 0.0:
        raise DegenerateGvmError("tau_s = tau_i = 0; JSI angle undefined")
    theta = -np.degrees(np.arctan2(tau_s, tau_i))
    if theta > 90.0:
        theta -= 180.0
    elif theta < -90.0:
        theta += 180.0
    return GvmResult(tau_s=tau_s, tau_i=tau_i, theta_si=float(theta))


# Calibrated fiber geometry (see tools/calibrate2.py): core radius (m) and
# cladding air fill chosen so that the phasematched pair with a
# group-velocity-matched idler arm at 1.593 um sits at a 751.1 nm pump,
# with the signal-arm walk-off slope placing the heralded-purity
# threshold length near 8.45 cm.
CALIBRATED_CORE_RADIUS = 6.532017858285639e-07
CALIBRATED_AIR_FILL = 0.6811603508372004

# Carrier frequencies (rad/s) of the calibrated operating point.
OMEGA_PUMP_0 = wavelength_to_omega(751.1e-9)
OMEGA_IDLER_0 = 1182455468136321.0  # 1.593 um, group-velocity matched
OMEGA_SIGNAL_0 = 2.0 * OMEGA_PUMP_0 - OMEGA_IDLER_0  # ~491.4 nm

CALIBRATED_WAVELENGTH_RANGE = (0.3e-6, 2.75e-6)


def calibrated_strand() -> DispersionModel:
    """The default calibrated fiber model."""
    return DispersionModel.step_index_strand(
        CALIBRATED_CORE_RADIUS,
        air_fill=CALIBRATED_AIR_FILL,
        wavelength_range=CALIBRATED_WAVELENGTH_RANGE,
    )

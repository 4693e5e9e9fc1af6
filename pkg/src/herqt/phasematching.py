"""FWM phase mismatch maps, zero contours, and the factorable operating point.

The map lives on the (pump frequency, detuning) plane with energy
conservation built in: a grid point (w_p, D) stands for the triple
(w_p, w_s = w_p + D, w_i = w_p - D).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from skimage import measure

from .dispersion import DispersionModel, gvm
from .errors import (
    ConstraintViolationError,
    DegenerateGvmError,
    EmptyScanError,
    NoIntersectionError,
    OutOfRangeError,
)

# |delta_k| below this fraction of 2 k(w_p) counts as "phasematched
# everywhere" and contour extraction is meaningless.
_DEGENERATE_REL_TOL = 1e-12


@dataclass(frozen=True)
class FrequencyScan:
    """A uniformly sampled closed interval of angular frequencies."""

    start: float  # rad/s
    stop: float  # rad/s
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise EmptyScanError("scan needs at least one sample")
        if not self.stop > self.start:
            raise EmptyScanError("scan interval is empty")

    def samples(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class PhasematchConfig:
    model: DispersionModel
    pump_scan: FrequencyScan
    detuning_scan: FrequencyScan
    phi_nl: float = 0.0  # nonlinear phase shift per unit length, 1/m

    def __post_init__(self):
        if self.phi_nl < 0.0:
            raise ConstraintViolationError("phi_nl must be >= 0")
        lo, hi = self.model.valid_range
        extremes = [
            self.pump_scan.start + self.detuning_scan.start,
            self.pump_scan.start - self.detuning_scan.stop,
            self.pump_scan.stop + self.detuning_scan.stop,
            self.pump_scan.stop - self.detuning_scan.start,
            self.pump_scan.start,
            self.pump_scan.stop,
        ]
        if min(extremes) < lo or max(extremes) > hi:
            raise OutOfRangeError(
                "pump/detuning scans reach outside the model valid_range"
            )


@dataclass(frozen=True)
class PhasematchMap:
    """delta_k and theta_si sampled over the (pump, detuning) plane.

    Grids are indexed [detuning, pump].  Contours are polylines in
    physical units, columns (pump frequency, detuning).
    """

    pump_axis: np.ndarray  # (Np,) rad/s
    detuning_axis: np.ndarray  # (Nd,) rad/s
    delta_k: np.ndarray  # (Nd, Np) 1/m
    theta_si: np.ndarray  # (Nd, Np) degrees; NaN where undefined
    contours: Tuple[np.ndarray, ...]
    degenerate_contour: bool = False


def delta_k(cfg: PhasematchConfig, omega_p, omega_s, omega_i):
    """Phase mismatch 2 k(w_p) - k(w_s) - k(w_i) - phi_nl (1/m)."""
    m = cfg.model
    # grouping k_s + k_i first keeps the expression bitwise symmetric in s<->i
    return (
        2.0 * m.propagation_constant(omega_p)
        - (m.propagation_constant(omega_s) + m.propagation_constant(omega_i))
        - cfg.phi_nl
    )


def _theta_grid(model: DispersionModel, omega_p, omega_s, omega_i):
    """Vectorized mirror of dispersion.gvm's angle (tau ratio is
    L-independent, so L = 1 is used)."""
    inv_p = 1.0 / model.group_velocity(omega_p)
    tau_s = inv_p - 1.0 / model.group_velocity(omega_s)
    tau_i = inv_p - 1.0 / model.group_velocity(omega_i)
    theta = -np.degrees(np.arctan2(tau_s, tau_i))
    theta = np.where(theta > 90.0, theta - 180.0, theta)
    theta = np.where(theta < -90.0, theta + 180.0, theta)
    return np.where((tau_s == 0.0) & (tau_i == 0.0), np.nan, theta)


def build_map(cfg: PhasematchConfig, length: float) -> PhasematchMap:
    """Fill the delta_k and theta_si grids and extract delta_k = 0 contours."""
    if length <= 0.0:
        raise ConstraintViolationError("length must be positive")
    if cfg.pump_scan.count < 2 or cfg.detuning_scan.count < 2:
        raise EmptyScanError("map needs at least a 2x2 grid")
    wp = cfg.pump_scan.samples()
    dd = cfg.detuning_scan.samples()
    WP = wp[np.newaxis, :]
    DD = dd[:, np.newaxis]
    ws = WP + DD
    wi = WP - DD

    m = cfg.model
    kp = m.propagation_constant(wp)
    dk = 2.0 * kp[np.newaxis, :] \
        - (m.propagation_constant(ws) + m.propagation_constant(wi)) \
        - cfg.phi_nl
    theta = _theta_grid(m, np.broadcast_to(WP, dk.shape), ws, wi)

    scale = float(np.max(2.0 * np.abs(kp))) + abs(cfg.phi_nl)
    if np.max(np.abs(dk)) < _DEGENERATE_REL_TOL * scale:
        return PhasematchMap(wp, dd, dk, theta, contours=(),
                             degenerate_contour=True)

    polylines = []
    for c in measure.find_contours(dk, 0.0):
        # index space -> physical units (rows are detuning, cols are pump)
        pump = np.interp(c[:, 1], np.arange(wp.size), wp)
        det = np.interp(c[:, 0], np.arange(dd.size), dd)
        polylines.append(np.column_stack([pump, det]))
    return PhasematchMap(wp, dd, dk, theta, contours=tuple(polylines))


def _detuning_on_contour(cfg, omega_p, d_lo, d_hi):
    """Solve delta_k(w_p, D) = 0 for D in [d_lo, d_hi] by bisection."""
    f = lambda d: delta_k(cfg, omega_p, omega_p + d, omega_p - d)  # noqa: E731
    f_lo, f_hi = f(d_lo), f(d_hi)
    if f_lo == 0.0:
        return d_lo
    if f_hi == 0.0:
        return d_hi
    if f_lo * f_hi > 0.0:
        return None
    for _ in range(200):
        mid = 0.5 * (d_lo + d_hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if fm * f_lo < 0.0:
            d_hi = mid
        else:
            d_lo, f_lo = mid, fm
    return 0.5 * (d_lo + d_hi)


def find_operating_point(cfg: PhasematchConfig, target_angle: float,
                         length: float = 1.0):
    """Intersections of the delta_k = 0 contour with theta_si = target.

    Returns a list of (w_p, w_s, w_i) triples, ordered by pump frequency.

    Near group-velocity-matched points the delta_k = 0 set splits into two
    curves only a few Trad/s apart, so following extracted polylines is
    fragile.  Instead the theta_si = target locus is traced directly —
    g = tau_s cos(t) + tau_i sin(t) vanishes exactly on it and is smooth in
    the detuning — and delta_k is root-found by bisection along that locus.
    """
    if not 0.0 <= target_angle <= 90.0:
        raise ConstraintViolationError("target_angle must be in [0, 90] deg")
    t = np.radians(target_angle)
    m = cfg.model
    wp = cfg.pump_scan.samples()
    dd = cfg.detuning_scan.samples()
    if wp.size < 2 or dd.size < 2:
        raise EmptyScanError("operating-point search needs a 2x2 scan")

    def g_fun(omega_p, det):
        p, d = np.broadcast_arrays(np.asarray(omega_p, dtype=float),
                                   np.asarray(det, dtype=float))
        inv = 1.0 / m.group_velocity(np.stack([p, p + d, p - d]))
        tau_s = inv[0] - inv[1]
        tau_i = inv[0] - inv[2]
        return tau_s * np.cos(t) + tau_i * np.sin(t)

    def gvm_detuning(pumps, d_lo, d_hi, iters=40):
        """Vectorized bisection of g = 0 in detuning; NaN where unbracketed."""
        pumps = np.asarray(pumps, dtype=float)
        lo = np.array(d_lo, dtype=float, copy=True)
        hi = np.array(d_hi, dtype=float, copy=True)
        g_lo = g_fun(pumps, lo)
        bad = g_lo * g_fun(pumps, hi) > 0.0
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            same = g_fun(pumps, mid) * g_lo > 0.0
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
            g_lo = np.where(same, g_fun(pumps, lo), g_lo)
        out = 0.5 * (lo + hi)
        return np.where(bad, np.nan, out)

    # locate theta-locus branches: sign changes of g over the scan grid
    # (skipping the degenerate cell at D = 0), refined in one vectorized
    # bisection pass, then chained across pump samples into branches
    step = dd[1] - dd[0]
    d_ok = dd[np.abs(dd) > 0.0]
    G = g_fun(wp[np.newaxis, :], d_ok[:, np.newaxis])  # (Nd', Np)
    cross = np.sign(G[:-1, :]) * np.sign(G[1:, :]) < 0
    trivial = (d_ok[:-1] < 0.0) & (d_ok[1:] >= 0.0)
    cross[trivial, :] = False
    rows, cols = np.nonzero(cross)
    if rows.size:
        roots = gvm_detuning(wp[cols], d_ok[rows], d_ok[rows + 1])
    else:
        roots = np.empty(0)

    branches: List[List[Tuple[float, float]]] = []
    open_tails: List[Tuple[float, int]] = []  # (last detuning, branch index)
    for ci in range(wp.size):
        tails = []
        taken = set()
        for d in roots[cols == ci]:
            if not np.isfinite(d) or abs(d) < 0.5 * abs(step):
                continue
            best = None
            for d_prev, idx in open_tails:
                if idx in taken or abs(d - d_prev) > 3.0 * abs(step):
                    continue
                if best is None or abs(d - d_prev) < abs(d - best[0]):
                    best = (d_prev, idx)
            if best is None:
                branches.append([])
                idx = len(branches) - 1
            else:
                idx = best[1]
                taken.add(idx)
            branches[idx].append((float(wp[ci]), float(d)))
            tails.append((d, idx))
        open_tails = tails

    def dk_on(pump, d):
        pump = np.asarray(pump, dtype=float)
        return np.asarray(delta_k(cfg, pump, pump + d, pump - d), dtype=float)

    # collect delta_k sign-change brackets along every branch, then run a
    # single vectorized bisection in pump frequency over all of them
    br_lo, br_hi = [], []
    hits = []
    for pts in branches:
        pts.sort(key=lambda q: q[0])
        arr = np.asarray(pts)
        vals = dk_on(arr[:, 0], arr[:, 1])
        for j in range(len(pts) - 1):
            if vals[j] == 0.0:
                hits.append(pts[j])
            elif vals[j] * vals[j + 1] < 0.0:
                br_lo.append(pts[j])
                br_hi.append(pts[j + 1])
    if br_lo:
        p_lo = np.array([b[0] for b in br_lo])
        d_lo = np.array([b[1] for b in br_lo])
        p_hi = np.array([b[0] for b in br_hi])
        d_hi = np.array([b[1] for b in br_hi])
        f_lo = dk_on(p_lo, d_lo)
        width = np.abs(d_hi - d_lo) + abs(step)
        for _ in range(64):
            if np.max(np.abs(p_hi - p_lo)) < 1e8:  # ~3e-5 pm in pump
                break
            p_mid = 0.5 * (p_lo + p_hi)
            d_ctr = 0.5 * (d_lo + d_hi)
            d_mid = gvm_detuning(p_mid, d_ctr - width, d_ctr + width)
            f_mid = dk_on(p_mid, d_mid)
            same = f_mid * f_lo > 0.0
            p_lo = np.where(same, p_mid, p_lo)
            d_lo = np.where(same, d_mid, d_lo)
            f_lo = np.where(same, f_mid, f_lo)
            p_hi = np.where(same, p_hi, p_mid)
            d_hi = np.where(same, d_hi, d_mid)
            width = np.maximum(np.abs(d_hi - d_lo), 1e-3 * abs(step))
        for pump, det in zip(0.5 * (p_lo + p_hi), 0.5 * (d_lo + d_hi)):
            if np.isfinite(pump) and np.isfinite(det):
                hits.append((float(pump), float(det)))

    out = []
    for pump, det in sorted(hits):
        r = gvm(m, length, pump, pump + det, pump - det)
        if not (abs(abs(r.theta_si) - target_angle) < 0.1
                or abs(r.theta_si - target_angle) < 0.1):
            continue
        triple = (float(pump), float(pump + det), float(pump - det))
        if not out or abs(triple[0] - out[-1][0]) > 1e-9 * abs(triple[0]):
            out.append(triple)
    if not out:
        raise NoIntersectionError(
            f"theta_si = {target_angle} deg does not meet the delta_k = 0 "
            "contour inside the scan window"
        )
    return out

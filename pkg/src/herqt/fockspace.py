"""Truncated multimode Fock algebra over an orthonormal broadband-mode basis.

Arms (spatial paths) and spectral modes index a tensor product of
single-oscillator spaces truncated at a photon-number cutoff.  Operators are
dense matrices assembled by Kronecker embedding; broadband operators are
expanded on a :class:`ModeBasis` built by weighted modified Gram-Schmidt.

Coherent backgrounds are meant to be carried in a displaced frame (the
``frame_displacements`` bookkeeping of :class:`TruncatedState`) so a small
cutoff suffices for the photon-added states of the protocol.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm, logm

from .errors import (
    BasisMissingModeError,
    ConstraintViolationError,
    IndexOutOfRangeError,
    MismatchedBasesError,
    RankDeficientWarning,
    TruncationRiskWarning,
)

DIM_BUDGET = 20000
_RANK_TOL = 1e-10


# ---------------------------------------------------------------------------
# Spectral mode basis


@dataclass(frozen=True)
class ModeBasis:
    """Orthonormal spectral modes on a shared grid, with the expansion of
    every raw input envelope recorded (coefficients + leakage)."""

    axis: np.ndarray  # (N,) rad/s
    weights: np.ndarray  # (N,) quadrature weights
    modes: np.ndarray  # (n_modes, N), orthonormal under weights
    coefficients: Tuple[np.ndarray, ...]  # per raw envelope, on modes
    leakage: np.ndarray  # per raw envelope, norm^2 outside the basis
    rank_deficient: Tuple[int, ...]  # indices of dependent envelopes

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    def inner(self, f, g):
        return np.sum(self.weights * np.conj(f) * g)

    def project(self, envelope: np.ndarray) -> np.ndarray:
        """Coefficients of an arbitrary envelope on the basis modes."""
        return (self.modes.conj() * self.weights) @ envelope


def orthonormalize(envelopes: Sequence[np.ndarray], axis: np.ndarray,
                   weights: np.ndarray) -> ModeBasis:
    """Weighted modified Gram-Schmidt in input order.

    Linearly dependent envelopes contribute no new mode; they are flagged
    (warning + index list) and their expansion on the earlier modes is still
    reported.
    """
    modes = []
    coeffs = []
    leaks = []
    deficient = []
    for idx, env in enumerate(envelopes):
        env = np.asarray(env, dtype=complex)
        if env.shape != axis.shape:
            raise MismatchedBasesError("envelope not sampled on the grid")
        norm0 = np.sqrt(np.real(np.sum(weights * np.abs(env) ** 2)))
        if not np.isclose(norm0, 1.0, rtol=1e-8):
            raise ConstraintViolationError("envelopes must be unit-norm")
        c = np.zeros(len(modes) + 1, dtype=complex)
        resid = env.copy()
        for k, m in enumerate(modes):
            c[k] = np.sum(weights * np.conj(m) * resid)
            resid = resid - c[k] * m
        rnorm = np.sqrt(np.real(np.sum(weights * np.abs(resid) ** 2)))
        if rnorm < _RANK_TOL:
            warnings.warn(f"envelope {idx} is linearly dependent",
                          RankDeficientWarning)
            deficient.append(idx)
            coeffs.append(c[:-1])
            leaks.append(max(0.0, 1.0 - float(np.sum(np.abs(c[:-1]) ** 2))))
        else:
            modes.append(resid / rnorm)
            c[-1] = rnorm
            coeffs.append(c)
            leaks.append(0.0)
    return ModeBasis(
        axis=axis,
        weights=weights,
        modes=np.array(modes),
        coefficients=tuple(coeffs),
        leakage=np.array(leaks),
        rank_deficient=tuple(deficient),
    )


# ---------------------------------------------------------------------------
# Truncated space and operators


@dataclass(frozen=True)
class FockSpace:
    n_arms: int
    n_modes_per_arm: int
    cutoff: int
    basis: Optional[ModeBasis] = None

    def __post_init__(self):
        if self.n_arms < 1 or self.n_modes_per_arm < 1 or self.cutoff < 1:
            raise ConstraintViolationError("need arms, modes, cutoff >= 1")
        if self.dim > DIM_BUDGET:
            raise ConstraintViolationError(
                f"dimension {self.dim} exceeds budget {DIM_BUDGET}")
        if self.basis is not None \
                and self.basis.n_modes < self.n_modes_per_arm:
            raise BasisMissingModeError("basis has too few modes")

    @property
    def n_factors(self) -> int:
        return self.n_arms * self.n_modes_per_arm

    @property
    def local_dim(self) -> int:
        return self.cutoff + 1

    @property
    def dim(self) -> int:
        return self.local_dim ** self.n_factors

    def factor(self, arm: int, mode: int) -> int:
        if not (0 <= arm < self.n_arms and 0 <= mode < self.n_modes_per_arm):
            raise IndexOutOfRangeError(f"arm {arm}, mode {mode}")
        return arm * self.n_modes_per_arm + mode

    def occupations(self) -> np.ndarray:
        """(dim, n_factors) photon numbers, factor 0 most significant."""
        idx = np.arange(self.dim)
        out = np.empty((self.dim, self.n_factors), dtype=np.int64)
        for f in range(self.n_factors - 1, -1, -1):
            out[:, f] = idx % self.local_dim
            idx = idx // self.local_dim
        return out


def _lower(d: int) -> np.ndarray:
    a = np.zeros((d, d), dtype=complex)
    n = np.arange(1, d)
    a[n - 1, n] = np.sqrt(n)
    return a


def _embed_one(space: FockSpace, f: int, m: np.ndarray) -> np.ndarray:
    d = space.local_dim
    ops = [np.eye(d, dtype=complex)] * space.n_factors
    ops[f] = m
    return reduce(np.kron, ops)


def _embed_two(space: FockSpace, f1: int, f2: int,
               m2: np.ndarray) -> np.ndarray:
    """Embed a two-factor operator (given on f1 (x) f2) into the full space."""
    d = space.local_dim
    nf = space.n_factors
    rest = d ** (nf - 2)
    full = np.kron(m2, np.eye(rest, dtype=complex))
    t = full.reshape((d, d) + (d,) * (nf - 2) + (d, d) + (d,) * (nf - 2))
    # current row-axis order: f1, f2, others...; build the inverse map
    order = [f1, f2] + [f for f in range(nf) if f not in (f1, f2)]
    perm = np.argsort(order)
    axes = list(perm) + [nf + p for p in perm]
    return t.transpose(axes).reshape(space.dim, space.dim)


def annihilation(space: FockSpace, arm: int, mode: int) -> np.ndarray:
    return _embed_one(space, space.factor(arm, mode), _lower(space.local_dim))


def creation(space: FockSpace, arm: int, mode: int) -> np.ndarray:
    return annihilation(space, arm, mode).conj().T


def displacement(space: FockSpace, arm: int, mode: int,
                 gamma: complex) -> np.ndarray:
    """exp(gamma a^dag - gamma^* a) on one (arm, mode) factor."""
    if abs(gamma) ** 2 > 0.25 * space.cutoff:
        warnings.warn(
            f"|gamma|^2 = {abs(gamma)**2:.3g} is large for cutoff "
            f"{space.cutoff}", TruncationRiskWarning)
    if gamma == 0.0:
        return np.eye(space.dim, dtype=complex)
    a = _lower(space.local_dim)
    d1 = expm(gamma * a.conj().T - np.conj(gamma) * a)
    return _embed_one(space, space.factor(arm, mode), d1)


def beamsplitter(space: FockSpace, arm_x: int, arm_y: int,
                 tau: float) -> np.ndarray:
    """Mode-wise beamsplitter with the a -> sqrt(tau) a + i sqrt(1-tau) b
    convention, acting identically on every spectral mode pair."""
    if not 0.0 <= tau <= 1.0:
        raise ConstraintViolationError("transmittance must be in [0, 1]")
    if arm_x == arm_y:
        raise MismatchedBasesError("beamsplitter needs two distinct arms")
    d = space.local_dim
    theta = np.arccos(np.sqrt(tau))
    a = np.kron(_lower(d), np.eye(d))
    b = np.kron(np.eye(d), _lower(d))
    h = a.conj().T @ b + b.conj().T @ a
    u2 = expm(1j * theta * h)
    out = np.eye(space.dim, dtype=complex)
    for m in range(space.n_modes_per_arm):
        out = _embed_two(space, space.factor(arm_x, m),
                         space.factor(arm_y, m), u2) @ out
    return out


def mode_rotation(space: FockSpace, arm: int, r: np.ndarray) -> np.ndarray:
    """Passive spectral-mode transform on one arm: single-photon coefficient
    vectors transform as c -> r c (and U|0> = |0>)."""
    nm = space.n_modes_per_arm
    if r.shape != (nm, nm):
        raise MismatchedBasesError("rotation must match the arm's mode count")
    if not np.allclose(r.conj().T @ r, np.eye(nm), atol=1e-10):
        raise ConstraintViolationError("mode rotation must be unitary")
    g = logm(r)
    d = space.local_dim
    # arm factors are contiguous: assemble the generator on the arm block
    dim_arm = d ** nm
    gen = np.zeros((dim_arm, dim_arm), dtype=complex)
    sub = FockSpace(n_arms=1, n_modes_per_arm=nm, cutoff=space.cutoff)
    for j in range(nm):
        for k in range(nm):
            if g[j, k] != 0.0:
                gen += g[j, k] * (creation(sub, 0, j)
                                  @ annihilation(sub, 0, k))
    u_arm = expm(gen)
    d_lead = d ** (arm * nm)
    d_tail = space.dim // (d_lead * dim_arm)
    return np.kron(np.kron(np.eye(d_lead, dtype=complex), u_arm),
                   np.eye(d_tail, dtype=complex))


def number_projector(space: FockSpace, arm: int, n: int,
                     filter_coeffs: Optional[np.ndarray] = None
                     ) -> np.ndarray:
    """POVM element for total photon number ``n`` in the (detector-filtered)
    mode subspace of one arm; the unfiltered complement is left unobserved.

    ``filter_coeffs`` is a (k, n_modes) stack of orthonormal coefficient rows
    describing the detected modes on the arm's basis; None means a flat
    detector seeing every mode.
    """
    if n > space.cutoff * space.n_modes_per_arm or n < 0:
        raise IndexOutOfRangeError(f"photon number {n}")
    occ = space.occupations()
    arm_factors = [space.factor(arm, m)
                   for m in range(space.n_modes_per_arm)]
    if filter_coeffs is None:
        total = occ[:, arm_factors].sum(axis=1)
        return np.diag((total == n).astype(complex))
    fc = np.atleast_2d(np.asarray(filter_coeffs, dtype=complex))
    k = fc.shape[0]
    if fc.shape[1] != space.n_modes_per_arm:
        raise MismatchedBasesError("filter coefficients do not match arm")
    if not np.allclose(fc @ fc.conj().T, np.eye(k), atol=1e-10):
        raise ConstraintViolationError("filtered modes must be orthonormal")
    # rotate the filtered modes onto the first k basis modes, count there
    q, _ = np.linalg.qr(
        np.concatenate([fc.conj().T,
                        np.eye(space.n_modes_per_arm, dtype=complex)],
                       axis=1))
    r = q[:, :space.n_modes_per_arm].conj().T  # rows: filtered then rest
    u = mode_rotation(space, arm, r)
    total = occ[:, arm_factors[:k]].sum(axis=1)
    proj = np.diag((total == n).astype(complex))
    return u.conj().T @ proj @ u


# ---------------------------------------------------------------------------
# States


@dataclass(frozen=True)
class TruncatedState:
    """Density matrix on a FockSpace, carried in a displaced frame."""

    space: FockSpace
    matrix: np.ndarray
    frame_displacements: np.ndarray = field(default=None)  # (arms, modes)

    def __post_init__(self):
        if self.frame_displacements is None:
            object.__setattr__(
                self, "frame_displacements",
                np.zeros((self.space.n_arms, self.space.n_modes_per_arm),
                         dtype=complex))
        m = self.matrix
        if m.shape != (self.space.dim, self.space.dim):
            raise MismatchedBasesError("matrix does not match the space")
        if np.max(np.abs(m - m.conj().T)) > 1e-12 * max(1.0, _abs_scale(m)):
            raise ConstraintViolationError("state must be Hermitian")

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def normalized(self) -> "TruncatedState":
        return TruncatedState(self.space, self.matrix / self.trace,
                              self.frame_displacements)

    def check_physical(self, atol: float = 1e-9):
        w = np.linalg.eigvalsh(self.matrix)
        if w.min() < -atol:
            raise ConstraintViolationError(
                f"state not PSD (min eigenvalue {w.min():.3g})")


def _abs_scale(m) -> float:
    return float(np.max(np.abs(m)))


def state_from_vector(space: FockSpace, vec: np.ndarray,
                      frame_displacements: Optional[np.ndarray] = None
                      ) -> TruncatedState:
    vec = np.asarray(vec, dtype=complex)
    nrm = np.linalg.norm(vec)
    if nrm == 0.0:
        raise ConstraintViolationError("zero state vector")
    vec = vec / nrm
    return TruncatedState(space, np.outer(vec, vec.conj()),
                          frame_displacements)


def vacuum_index(space: FockSpace) -> int:
    return 0


def apply_unitary(state: TruncatedState, u: np.ndarray) -> TruncatedState:
    return TruncatedState(state.space, u @ state.matrix @ u.conj().T,
                          state.frame_displacements)


def partial_trace(state: TruncatedState, keep: Sequence[int]
                  ) -> TruncatedState:
    """Trace out every arm not in ``keep`` (arm indices, order preserved)."""
    keep = sorted(set(keep))
    if not keep:
        raise ConstraintViolationError("must keep at least one arm")
    if any(k < 0 or k >= state.space.n_arms for k in keep):
        raise IndexOutOfRangeError(f"arms {keep}")
    sp = state.space
    d_arm = sp.local_dim ** sp.n_modes_per_arm
    shape = (d_arm,) * sp.n_arms
    t = state.matrix.reshape(shape + shape)
    drop = [a for a in range(sp.n_arms) if a not in keep]
    for a in sorted(drop, reverse=True):
        t = np.trace(t, axis1=a, axis2=a + t.ndim // 2)
    new_space = FockSpace(n_arms=len(keep),
                          n_modes_per_arm=sp.n_modes_per_arm,
                          cutoff=sp.cutoff, basis=sp.basis)
    dim = new_space.dim
    return TruncatedState(new_space, t.reshape(dim, dim),
                          state.frame_displacements[keep])


def fidelity(state: TruncatedState, psi: np.ndarray) -> float:
    psi = np.asarray(psi, dtype=complex)
    if not np.isclose(np.linalg.norm(psi), 1.0, rtol=1e-8):
        raise ConstraintViolationError("target state must be normalized")
    val = np.real(psi.conj() @ state.matrix @ psi)
    return float(min(1.0, max(0.0, val)))

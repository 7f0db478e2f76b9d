"""Photon-number-resolving detection and wave-plate polarimetry.

The detector of efficiency ``eta`` spreads light over ``n0`` bins and reports
how many bins clicked.  In normal order its outcome operators are

    Pi_n = C(n0, n) :P^n (1 - P)^(n0 - n):,   P = 1 - :exp(-eta a^dag a / n0):,

and with ``:exp(-lam a^dag a): = (1 - lam)^(a^dag a)`` they are diagonal in
the Fock basis with entries given by a finite alternating sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "PnrdModel",
    "TwoModeSource",
    "PolarimetrySetting",
    "pnrd_diagonal",
    "pnrd_matrix",
    "source_distribution",
    "auto_cutoff",
    "response_matrix",
    "angular_momentum_ops",
    "waveplate_unitary",
    "two_port_povm",
    "single_port_povm",
    "dpol_per_port",
    "dpol_total_photon",
    "squeezing_db_to_r",
    "TAIL_TOL",
    "MAX_CUTOFF",
]

TAIL_TOL = 1e-12
MAX_CUTOFF = 60
_NEG_TOL = 1e-12


@dataclass(frozen=True)
class PnrdModel:
    eta: float
    n0: int

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.eta}")
        if int(self.n0) != self.n0 or self.n0 < 1:
            raise ValueError(f"n0 must be a positive integer, got {self.n0}")


@dataclass(frozen=True)
class TwoModeSource:
    kind: str
    r: float

    def __post_init__(self):
        if self.kind not in ("bell", "tmsv"):
            raise ValueError(f"source kind must be 'bell' or 'tmsv', got {self.kind!r}")
        if not self.r >= 0:
            raise ValueError("squeezing parameter must be nonnegative")


@dataclass(frozen=True)
class PolarimetrySetting:
    """HWP angle ``theta`` and QWP angle ``phi`` for arms A and B (radians)."""

    theta_a: float = 0.0
    phi_a: float = 0.0
    theta_b: float = 0.0
    phi_b: float = 0.0

    def arm(self, which: str) -> tuple[float, float]:
        if which == "a":
            return self.theta_a, self.phi_a
        if which == "b":
            return self.theta_b, self.phi_b
        raise ValueError("arm must be 'a' or 'b'")


def pnrd_diagonal(model: PnrdModel, n: int, m_max: int) -> np.ndarray:
    """Fock diagonal ``<m|Pi_n|m>`` for ``m = 0..m_max``.

    The alternating sum cancels badly once ``n0`` reaches a few tens, so it
    is evaluated in exact rationals (``eta`` is converted exactly).
    """
    n0 = model.n0
    if not 0 <= n <= n0:
        raise ValueError(f"outcome {n} outside [0, {n0}]")
    eta = Fraction(model.eta)
    bases = [(math.comb(n, k) * (-1) ** k, 1 - eta * (n0 - n + k) / n0) for k in range(n + 1)]
    scale = math.comb(n0, n)
    out = np.empty(m_max + 1)
    powers = [Fraction(1)] * len(bases)
    for m in range(m_max + 1):
        # Fraction(0) ** 0 == 1, as the normal-ordered identity needs
        out[m] = float(scale * sum(c * p for (c, _), p in zip(bases, powers)))
        powers = [p * b for (_, b), p in zip(bases, powers)]
    if out.min() < -_NEG_TOL:
        raise ValueError(f"negative detector probability {out.min()!r}")
    return np.clip(out, 0.0, 1.0)


def pnrd_matrix(model: PnrdModel, m_max: int) -> np.ndarray:
    """``P[n, m] = <m|Pi_n|m>`` for all outcomes ``n = 0..n0``."""
    return np.stack([pnrd_diagonal(model, n, m_max) for n in range(model.n0 + 1)])


def auto_cutoff(r: float, tol: float = TAIL_TOL, cap: int = MAX_CUTOFF) -> int:
    """Smallest per-mode cutoff with tail mass below ``tol`` (at most ``cap``)."""
    for c in range(cap + 1):
        if _tail_mass(r, c) < tol:
            return c
    return cap


def _tail_mass(r: float, cutoff: int) -> float:
    # 1 - (1 - t^(c+1))^2 with t = tanh^2 r, written without cancellation
    t = math.tanh(r) ** 2
    head = t ** (cutoff + 1)
    return 2 * head - head * head


def source_distribution(source: TwoModeSource, cutoff: int | None = None):
    """Joint photon-number distribution ``p[m, n] = sech^4 r tanh^(2(m+n)) r``.

    Returns ``(p, tail_mass)``; Bell and TMSV sources trace out to the same
    populations.
    """
    if cutoff is None:
        cutoff = auto_cutoff(source.r)
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    t2 = math.tanh(source.r) ** 2
    marginal = (1 - t2) * t2 ** np.arange(cutoff + 1)
    p = np.outer(marginal, marginal)
    return p, _tail_mass(source.r, cutoff)


def response_matrix(model: PnrdModel, cutoff: int) -> np.ndarray:
    """Outcome ``(n1, n2)`` given photon pair ``(m, m')`` on the two H ports.

    Rows are ordered ``n1 * (n0 + 1) + n2`` and columns ``m * (cutoff + 1) + m'``.
    """
    single = pnrd_matrix(model, cutoff)
    return np.kron(single, single)


def _ladder(n0: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n0 + 1, dtype=float)), 1)


def angular_momentum_ops(n0: int):
    """``(J2, J3)`` on one arm's H and V modes, each truncated at ``n0`` photons.

    Basis index is ``n_H * (n0 + 1) + n_V``.
    """
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    a = _ladder(n0)
    eye = np.eye(n0 + 1)
    a_h = np.kron(a, eye)
    a_v = np.kron(eye, a)
    j2 = 0.5j * (a_v.T @ a_h - a_h.T @ a_v)
    j3 = 0.5 * (a_h.T @ a_h - a_v.T @ a_v)
    return j2.astype(complex), j3.astype(complex)


def _expi(h: np.ndarray, angle: float) -> np.ndarray:
    """``exp(-i angle h)`` for Hermitian ``h``."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


def waveplate_unitary(theta: float, phi: float, n0: int) -> np.ndarray:
    """``exp(-i phi J3) exp(-i theta J2)``."""
    j2, j3 = angular_momentum_ops(n0)
    return _expi(j3, phi) @ _expi(j2, theta)


def two_port_povm(theta: float, phi: float, model: PnrdModel) -> np.ndarray:
    """Elements ``U (Pi_n1 x Pi_n2) U^dag`` indexed ``n1 * (n0 + 1) + n2``."""
    n0 = model.n0
    u = waveplate_unitary(theta, phi, n0)
    single = pnrd_matrix(model, n0)
    diags = np.einsum("am,bn->abmn", single, single).reshape((n0 + 1) ** 2, (n0 + 1) ** 2)
    elems = np.einsum("ij,kj,lj->ikl", diags, u, u.conj())
    return (elems + elems.conj().transpose(0, 2, 1)) / 2


def single_port_povm(theta: float, phi: float, model: PnrdModel) -> np.ndarray:
    """H-port elements ``U (Pi_n x 1) U^dag`` with the V port traced out."""
    n0 = model.n0
    u = waveplate_unitary(theta, phi, n0)
    single = pnrd_matrix(model, n0)
    diags = np.kron(single, np.ones(n0 + 1))
    elems = np.einsum("ij,kj,lj->ikl", diags, u, u.conj())
    return (elems + elems.conj().transpose(0, 2, 1)) / 2


def dpol_per_port(n0: int) -> int:
    """Linearly independent polarimetry elements with ``n0`` photons per port."""
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    value = (n0 + 1) * (2 * n0 * n0 + 4 * n0 + 3)
    assert value % 3 == 0
    return value // 3


def dpol_total_photon(n0: int) -> int:
    """Free polarization-sector parameters up to ``2 n0`` photons in total."""
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    value = (n0 + 1) * (2 * n0 + 1) * (4 * n0 + 3)
    assert value % 3 == 0
    return value // 3


def squeezing_db_to_r(db: float) -> float:
    """``r`` such that ``10 log10(exp(2 r)) = db``."""
    if db < 0:
        raise ValueError("squeezing in dB must be nonnegative")
    return db * math.log(10) / 20

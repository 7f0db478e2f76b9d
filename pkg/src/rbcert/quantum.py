"""Finite-dimensional states, POVMs, Born probabilities and fidelities.

Matrices are plain complex ``numpy`` arrays; the validating constructors
(:func:`density_operator`, :class:`PovmBasis`, ...) return read-only copies so
that datasets and estimators can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "HERMITIAN_TOL",
    "PSD_TOL",
    "TRACE_TOL",
    "hermitian_operator",
    "density_operator",
    "maximally_mixed",
    "PovmBasis",
    "MeasurementDataset",
    "DiagonalDataset",
    "born_probabilities",
    "log_likelihood",
    "embed",
    "truncate_basis",
    "bhattacharyya_fidelity",
    "uhlmann_fidelity",
    "psd_sqrt",
]

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
# Born values in [-CLAMP_TOL, 0) are rounding noise.
CLAMP_TOL = 1e-12
# Relative size below which an eigenvalue is treated as rounding noise.
EIG_NOISE = 1e-13


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def hermitian_operator(entries, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate a square Hermitian matrix and return a read-only copy."""
    h = np.asarray(entries, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"operator must be square, got shape {h.shape}")
    if not np.allclose(h, h.conj().T, atol=tol, rtol=0):
        raise ValueError("operator is not Hermitian")
    return _frozen(h)


def density_operator(entries) -> np.ndarray:
    """Validate a state: Hermitian, eigenvalues >= -1e-10, unit trace."""
    rho = hermitian_operator(entries)
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
        raise ValueError(f"trace is {np.trace(rho).real!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
        raise ValueError("state has negative eigenvalues")
    return rho


def maximally_mixed(dim: int) -> np.ndarray:
    return _frozen(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True)
class PovmBasis:
    """A complete measurement: PSD elements summing to the identity.

    ``elements`` has shape ``(outcomes, dim, dim)``.
    """

    elements: np.ndarray

    def __post_init__(self):
        elems = np.asarray(self.elements, dtype=complex)
        if elems.ndim != 3 or elems.shape[1] != elems.shape[2]:
            raise ValueError(f"elements must have shape (m, d, d), got {elems.shape}")
        if not np.allclose(elems, elems.conj().transpose(0, 2, 1), atol=HERMITIAN_TOL, rtol=0):
            raise ValueError("POVM element is not Hermitian")
        if np.linalg.eigvalsh(elems).min() < -PSD_TOL:
            raise ValueError("POVM element is not positive semidefinite")
        total = elems.sum(axis=0)
        if not np.allclose(total, np.eye(elems.shape[1]), atol=1e-10, rtol=0):
            raise ValueError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", _frozen(elems))

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self) -> int:
        return self.elements.shape[0]


@dataclass(frozen=True)
class MeasurementDataset:
    """Click counts for a list of measured bases on a ``dim_max`` space."""

    dim_max: int
    bases: tuple
    counts: tuple
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        bases = tuple(self.bases)
        counts = tuple(_frozen(np.asarray(c, dtype=np.int64)) for c in self.counts)
        if len(bases) != len(counts):
            raise ValueError("one count vector per basis is required")
        if not bases:
            raise ValueError("dataset has no bases")
        for b, c in zip(bases, counts):
            if b.dim != self.dim_max:
                raise ValueError(f"basis dimension {b.dim} differs from dim_max {self.dim_max}")
            if c.shape != (len(b),):
                raise ValueError("count vector length differs from number of outcomes")
            if (c < 0).any():
                raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "counts", counts)

    @property
    def copies_per_basis(self) -> list[int]:
        return [int(c.sum()) for c in self.counts]

    @property
    def total_copies(self) -> int:
        return int(sum(self.copies_per_basis))

    kappa_kind = "full_state"


@dataclass(frozen=True)
class DiagonalDataset:
    """Counts from a measurement that only sees photon-number populations.

    ``response[j, c]`` is the probability of outcome ``j`` given the
    photon-number configuration ``columns[c]`` (one photon number per mode).
    Truncating to dimension ``d`` keeps the columns whose photon numbers are
    all below ``d``; the estimator is then a diagonal state of dimension
    ``d ** modes``.
    """

    dim_max: int
    response: np.ndarray
    counts: np.ndarray
    columns: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        resp = np.asarray(self.response, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        cols = np.asarray(self.columns, dtype=np.int64)
        if cols.ndim == 1:
            cols = cols[:, None]
        if resp.ndim != 2 or resp.shape[1] != cols.shape[0]:
            raise ValueError("response must be (outcomes, columns)")
        if counts.shape != (resp.shape[0],):
            raise ValueError("one count per outcome is required")
        if (counts < 0).any():
            raise ValueError("counts must be nonnegative")
        if resp.min() < 0 or resp.max() > 1 + 1e-12:
            raise ValueError("response entries must lie in [0, 1]")
        if (resp.sum(axis=0) > 1 + 1e-10).any():
            raise ValueError("response columns sum to more than 1")
        object.__setattr__(self, "response", _frozen(resp))
        object.__setattr__(self, "counts", _frozen(counts))
        object.__setattr__(self, "columns", _frozen(cols))

    @classmethod
    def single_mode(cls, response, counts, dim_max=None, provenance=None):
        """Dataset whose columns are photon numbers 0, 1, ... of one mode."""
        response = np.asarray(response, dtype=float)
        n_cols = response.shape[1]
        return cls(
            dim_max=n_cols if dim_max is None else dim_max,
            response=response,
            counts=counts,
            columns=np.arange(n_cols)[:, None],
            provenance=provenance or {},
        )

    @property
    def modes(self) -> int:
        return self.columns.shape[1]

    @property
    def total_copies(self) -> int:
        return int(self.counts.sum())

    def column_mask(self, d: int) -> np.ndarray:
        return (self.columns < d).all(axis=1)

    kappa_kind = "diagonal"


Dataset = Union[MeasurementDataset, DiagonalDataset]


def _elements(basis) -> np.ndarray:
    return basis.elements if isinstance(basis, PovmBasis) else np.asarray(basis, dtype=complex)


def born_probabilities(state: np.ndarray, basis) -> np.ndarray:
    """``p_j = tr(rho Pi_j)`` for a basis or a bare stack of elements."""
    elems = _elements(basis)
    state = np.asarray(state)
    if elems.shape[1:] != state.shape:
        raise ValueError(f"state of shape {state.shape} does not match elements {elems.shape[1:]}")
    # tr(rho Pi) = sum_ab rho_ab conj(Pi_ab) for Hermitian Pi
    p = np.real(elems.reshape(len(elems), -1).conj() @ state.reshape(-1))
    if p.min(initial=0.0) < -CLAMP_TOL:
        raise ValueError(f"negative Born probability {p.min()!r}: broken POVM")
    return np.where(p < 0, 0.0, p)


def log_likelihood(probabilities, counts) -> float:
    """Multinomial log-likelihood ``sum_j n_j ln p_j`` with ``0 ln 0 = 0``."""
    p = np.asarray(probabilities, dtype=float)
    n = np.asarray(counts)
    if p.shape != n.shape:
        raise ValueError("probabilities and counts differ in length")
    seen = n > 0
    if (p[seen] <= 0).any():
        return -np.inf
    return float(np.dot(n[seen], np.log(p[seen])))


def embed(state: np.ndarray, target_dim: int) -> np.ndarray:
    """Zero-pad a state into the top-left block of a larger space."""
    state = np.asarray(state)
    d = state.shape[0]
    if target_dim < d:
        raise ValueError(f"cannot embed dimension {d} into {target_dim}")
    out = np.zeros((target_dim, target_dim), dtype=state.dtype)
    out[:d, :d] = state
    return _frozen(out)


def truncate_basis(basis, d: int) -> np.ndarray:
    """Top-left ``d x d`` block of every element (completeness not enforced)."""
    elems = _elements(basis)
    if not 1 <= d <= elems.shape[1]:
        raise ValueError(f"truncation dimension {d} outside [1, {elems.shape[1]}]")
    return _frozen(elems[:, :d, :d])


def bhattacharyya_fidelity(p, q) -> float:
    """``sum_i sqrt(p_i q_i)`` for two (sub)distributions."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise ValueError("distributions differ in length")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("distributions must be nonnegative")
    return float(np.sqrt(p * q).sum())


def _clip_noise(w: np.ndarray) -> np.ndarray:
    # eigenvalues at rounding level would otherwise leak ~sqrt(1e-16) into roots
    return np.where(w > EIG_NOISE * max(w.max(initial=0.0), 1.0), w, 0.0)


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    if w.min() < -PSD_TOL:
        raise ValueError("matrix is not positive semidefinite")
    return (v * np.sqrt(_clip_noise(w))) @ v.conj().T


def uhlmann_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """``(tr sqrt(sqrt(a) b sqrt(a)))**2``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("states differ in dimension")
    if np.linalg.eigvalsh(b).min() < -PSD_TOL:
        raise ValueError("matrix is not positive semidefinite")
    sa = psd_sqrt(a)
    m = sa @ b @ sa
    w = np.linalg.eigvalsh((m + m.conj().T) / 2)
    f = float(np.sqrt(_clip_noise(w)).sum() ** 2)
    return min(f, 1.0)

"""Seeded generators for the temporal-mode and polarimetry scenarios.

Randomness comes only from the ``numpy.random.Generator`` passed in (or built
from ``SimConfig.seed`` with ``numpy.random.default_rng``, i.e. PCG64), so a
seed fixes every dataset bit for bit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .polarimetry import (
    PnrdModel,
    TwoModeSource,
    auto_cutoff,
    response_matrix,
    source_distribution,
)
from .quantum import DiagonalDataset, MeasurementDataset, PovmBasis, born_probabilities

__all__ = [
    "SimConfig",
    "haar_unitary",
    "haar_basis",
    "mode_state",
    "apply_dark_counts",
    "sample_counts",
    "simulate_temporal",
    "simulate_polarimetry",
]


@dataclass(frozen=True)
class SimConfig:
    seed: int
    copies_per_basis: int
    num_bases: int
    dim_max: int
    dark_rate: float = 0.0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.copies_per_basis < 1 or self.num_bases < 1:
            raise ValueError("copies_per_basis and num_bases must be positive")
        if self.dim_max < 2:
            raise ValueError("dim_max must be at least 2")
        if not 0 <= self.dark_rate < 1:
            raise ValueError("dark_rate must lie in [0, 1)")


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def haar_basis(dim: int, rng: np.random.Generator) -> PovmBasis:
    """Projectors onto the columns of a Haar-random unitary."""
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    v = haar_unitary(dim, rng)
    elems = np.einsum("aj,bj->jab", v, v.conj())
    return PovmBasis(elems)


def mode_state(n: int, dim: int) -> np.ndarray:
    """``|n><n|`` in a ``dim``-dimensional mode-index basis."""
    if not 0 <= n < dim:
        raise ValueError(f"mode index {n} outside [0, {dim})")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n, n] = 1.0
    rho.setflags(write=False)
    return rho


def apply_dark_counts(probabilities, rate: float) -> np.ndarray:
    """Mix a distribution with the uniform one: ``(1 - rate) p + rate / m``."""
    if not 0 <= rate < 1:
        raise ValueError("dark-count rate must lie in [0, 1)")
    p = np.asarray(probabilities, dtype=float)
    return (1 - rate) * p + rate / p.size


def sample_counts(probabilities, n_copies: int, rng: np.random.Generator) -> np.ndarray:
    """One multinomial draw of ``n_copies`` events."""
    p = np.asarray(probabilities, dtype=float)
    if n_copies < 1:
        raise ValueError("n_copies must be positive")
    if (p < 0).any() or abs(p.sum() - 1) > 1e-9:
        raise ValueError("probabilities must be a distribution")
    return rng.multinomial(n_copies, p / p.sum())


def simulate_temporal(n: int, config: SimConfig) -> MeasurementDataset:
    """``num_bases`` Haar bases measured on ``|n><n|`` with optional dark counts."""
    if not 0 <= n < config.dim_max:
        raise ValueError(f"mode index {n} outside [0, {config.dim_max})")
    rng = np.random.default_rng(config.seed)
    state = mode_state(n, config.dim_max)
    bases, counts = [], []
    for _ in range(config.num_bases):
        basis = haar_basis(config.dim_max, rng)
        p = apply_dark_counts(born_probabilities(state, basis), config.dark_rate)
        bases.append(basis)
        counts.append(sample_counts(p, config.copies_per_basis, rng))
    provenance = {"generator": "temporal", "mode_index": n, "rng": "PCG64", **asdict(config)}
    return MeasurementDataset(config.dim_max, tuple(bases), tuple(counts), provenance)


def simulate_polarimetry(
    source: TwoModeSource,
    model: PnrdModel,
    n_copies: int,
    rng: np.random.Generator,
    dim_max: int = 9,
    cutoff: int | None = None,
    provenance: dict | None = None,
) -> DiagonalDataset:
    """Sample H-port photon-number counts on both arms.

    The outcome law uses the full source cutoff; the stored response keeps
    only photon pairs below ``dim_max`` since no fit looks beyond them.
    """
    if cutoff is None:
        cutoff = max(auto_cutoff(source.r), dim_max - 1)
    p_mn, tail = source_distribution(source, cutoff)
    resp = response_matrix(model, cutoff)
    outcome = resp @ p_mn.ravel()
    outcome = outcome / outcome.sum()
    counts = sample_counts(outcome, n_copies, rng)

    grid = np.stack(np.meshgrid(np.arange(cutoff + 1), np.arange(cutoff + 1), indexing="ij"), -1)
    columns = grid.reshape(-1, 2)
    keep = (columns < dim_max).all(axis=1)
    meta = {
        "generator": "polarimetry",
        "source": source.kind,
        "r": source.r,
        "eta": model.eta,
        "n0": model.n0,
        "copies": n_copies,
        "cutoff": cutoff,
        "tail_mass": tail,
    }
    meta.update(provenance or {})
    return DiagonalDataset(dim_max, resp[:, keep], counts, columns[keep], meta)

"""Maximum-likelihood state estimation in a truncated Hilbert space.

The solver alternates a gradient step in state space with a projection back
onto physical states: negative eigenvalues are zeroed and the trace is
renormalized.  Optionally every diagonal entry below ``bias_threshold`` is
removed together with its row and column after each projection, which strips
the small diagonal bias left by uniform background counts.  That constraint
makes the problem nonconvex, so several seeded starts are tried.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .quantum import (
    DiagonalDataset,
    MeasurementDataset,
    embed,
    log_likelihood,
    truncate_basis,
)

__all__ = [
    "DegenerateInputError",
    "MlConfig",
    "MlResult",
    "project_psd",
    "subtract_bias",
    "fit_ml",
    "sweep_dimensions",
    "stationarity_residual",
]

# Gradient weights n/p use p floored here; reported likelihoods do not.
GRADIENT_FLOOR = 1e-300
_MIN_STEP_RATIO = 1e-30
_PATIENCE = 5
_PRECONDITION_FLOOR = 1e-9


class DegenerateInputError(ValueError):
    """Projection or bias removal would leave no state."""


@dataclass(frozen=True)
class MlConfig:
    """Solver settings.

    ``step_size=None`` means ``1/N`` with ``N`` the total number of copies;
    ``restarts=None`` means 5 when ``bias_threshold`` is set and 1 otherwise.
    """

    max_iterations: int = 5000
    step_size: Optional[float] = None
    backtracking_factor: float = 0.5
    convergence_tol: float = 1e-10
    restarts: Optional[int] = None
    bias_threshold: Optional[float] = None
    record_trace: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not 0 < self.backtracking_factor < 1:
            raise ValueError("backtracking_factor must lie in (0, 1)")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if self.restarts is not None and self.restarts < 1:
            raise ValueError("restarts must be positive")
        if self.bias_threshold is not None and not 0 <= self.bias_threshold < 1:
            raise ValueError("bias_threshold must lie in [0, 1)")

    @property
    def n_starts(self) -> int:
        if self.restarts is not None:
            return self.restarts
        return 5 if self.bias_threshold else 1

    def as_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "step_size": self.step_size,
            "backtracking_factor": self.backtracking_factor,
            "convergence_tol": self.convergence_tol,
            "restarts": self.n_starts,
            "bias_threshold": self.bias_threshold,
        }


@dataclass
class MlResult:
    estimator: np.ndarray
    log_likelihood_nat: float
    iterations_used: int
    converged: bool
    padded_from_lower_dim: bool = False
    dim: int = 0
    trace: tuple = field(default=(), repr=False)

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.estimator)).copy()


def project_psd(h: np.ndarray) -> np.ndarray:
    """Zero the negative eigenvalues of a Hermitian matrix and renormalize."""
    h = np.asarray(h, dtype=complex)
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if not total > 0:
        raise DegenerateInputError("no positive eigenvalue to project onto")
    out = (v * (w / total)) @ v.conj().T
    return (out + out.conj().T) / 2


def subtract_bias(state: np.ndarray, threshold: float) -> np.ndarray:
    """Remove every diagonal entry below ``threshold`` with its row and column.

    The surviving principal submatrix of a PSD matrix is PSD, so only the
    trace needs restoring.
    """
    state = np.asarray(state)
    diag = np.real(np.diag(state))
    drop = diag < threshold
    if not drop.any():
        return state
    if drop.all():
        raise DegenerateInputError(f"every diagonal entry is below {threshold}")
    out = np.array(state, copy=True)
    out[drop, :] = 0
    out[:, drop] = 0
    return out / np.real(np.trace(out))


def _project_simplex_clip(q: np.ndarray) -> np.ndarray:
    q = np.clip(q, 0.0, None)
    total = q.sum()
    if not total > 0:
        raise DegenerateInputError("no positive population to project onto")
    return q / total


class _MatrixProblem:
    """Likelihood over d x d density matrices for a POVM dataset."""

    def __init__(self, dataset: MeasurementDataset, d: int, bias_threshold):
        blocks = [truncate_basis(b, d) for b in dataset.bases]
        elems = np.concatenate(blocks)
        counts = np.concatenate(dataset.counts).astype(float)
        keep = counts > 0
        self.d = d
        self.counts = counts[keep]
        self.flat = elems[keep].reshape(int(keep.sum()), -1)
        self.flat_conj = self.flat.conj()
        self.total = float(self.counts.sum())
        self.bias_threshold = bias_threshold
        self.impossible = bool((np.abs(self.flat).max(axis=1) == 0).any())

    def probabilities(self, rho):
        return np.real(self.flat_conj @ rho.reshape(-1))

    def loglik(self, rho):
        return log_likelihood(np.clip(self.probabilities(rho), 0, None), self.counts)

    def direction(self, rho):
        p = np.maximum(self.probabilities(rho), GRADIENT_FLOOR)
        g = (self.counts / p) @ self.flat
        g = g.reshape(self.d, self.d)
        g = (g + g.conj().T) / 2
        s = np.real(np.vdot(g, rho))
        g[np.diag_indices(self.d)] -= s
        return g

    def project(self, h):
        rho = project_psd(h)
        if self.bias_threshold:
            rho = subtract_bias(rho, self.bias_threshold)
        return rho

    def start(self, k, rng):
        d = self.d
        mixed = np.eye(d, dtype=complex) / d
        if k == 0:
            cand = mixed
        else:
            psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            psi /= np.linalg.norm(psi)
            cand = 0.5 * mixed + 0.5 * np.outer(psi, psi.conj())
        try:
            return self.project(cand)
        except DegenerateInputError:
            pass
        # A threshold above every diagonal of the start leaves nothing; fall
        # back to the basis state the gradient favors (or a random one).
        if k == 0:
            i = int(np.argmax(np.real(np.diag(self.direction(mixed)))))
        else:
            i = int(rng.integers(d))
        out = np.zeros((d, d), dtype=complex)
        out[i, i] = 1.0
        return out

    def gap_bound(self, rho):
        """Upper bound on ``max logL - logL(rho)`` for the concave problem."""
        p = np.maximum(self.probabilities(rho), GRADIENT_FLOOR)
        g = ((self.counts / p) @ self.flat).reshape(self.d, self.d)
        return float(np.linalg.eigvalsh((g + g.conj().T) / 2)[-1] - np.dot(self.counts, 1.0 * (p > 0)))

    def to_estimator(self, rho):
        return rho

    def stationarity(self, rho):
        p = self.probabilities(rho)
        r = ((self.counts / p) @ self.flat).reshape(self.d, self.d) / self.total
        return float(np.linalg.norm(r @ rho - rho))


class _DiagonalProblem:
    """Likelihood over photon-number populations for a diagonal dataset."""

    def __init__(self, dataset: DiagonalDataset, d: int):
        mask = dataset.column_mask(d)
        resp = dataset.response[:, mask]
        counts = dataset.counts.astype(float)
        keep = counts > 0
        self.d = d
        self.size = int(mask.sum())
        self.counts = counts[keep]
        self.resp = resp[keep]
        self.total = float(self.counts.sum())
        self.impossible = bool((self.resp.sum(axis=1) == 0).any())

    def probabilities(self, q):
        return self.resp @ q

    def loglik(self, q):
        return log_likelihood(self.probabilities(q), self.counts)

    def direction(self, q):
        # gradient scaled by the populations (plus a floor so that empty
        # entries can revive); with an identity response one step of 1/N
        # lands on the closed form n/N
        p = np.maximum(self.probabilities(q), GRADIENT_FLOOR)
        g = (self.counts / p) @ self.resp
        w = q + _PRECONDITION_FLOOR / self.size
        return w * (g - np.dot(w, g) / w.sum())

    def project(self, h):
        return _project_simplex_clip(h)

    def start(self, k, rng):
        uniform = np.full(self.size, 1.0 / self.size)
        if k == 0:
            return uniform
        return 0.5 * uniform + 0.5 * rng.dirichlet(np.ones(self.size))

    def gap_bound(self, q):
        p = np.maximum(self.probabilities(q), GRADIENT_FLOOR)
        g = (self.counts / p) @ self.resp
        return float(g.max() - np.dot(g, q))

    def to_estimator(self, q):
        return np.diag(q).astype(complex)

    def stationarity(self, q):
        p = self.probabilities(q)
        r = (self.counts / p) @ self.resp / self.total
        return float(np.linalg.norm(r * q - q))


def _problem(dataset, d: int, config: MlConfig):
    if isinstance(dataset, MeasurementDataset):
        return _MatrixProblem(dataset, d, config.bias_threshold)
    if isinstance(dataset, DiagonalDataset):
        return _DiagonalProblem(dataset, d)
    raise TypeError(f"unsupported dataset type {type(dataset).__name__}")


def _ascend(problem, x, config: MlConfig, step0: float):
    """Projected-gradient ascent with backtracking and restarted momentum.

    Steps are taken from an extrapolated point ``y``; a step that would lower
    the likelihood of the current iterate is discarded and momentum restarts,
    so accepted iterates never decrease.  The run stops once the relative
    gain stays below ``convergence_tol`` for ``_PATIENCE`` accepted steps in a
    row, which guards against stopping on a single short step.
    """
    beta = config.backtracking_factor
    f = problem.loglik(x)
    trace = [f] if config.record_trace else None
    y, f_y = x, f
    theta = 1.0
    step = step0
    converged = False
    quiet = 0
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        direction = problem.direction(y)
        shrunk = False
        while True:
            try:
                cand = problem.project(y + step * direction)
                f_cand = problem.loglik(cand)
            except DegenerateInputError:
                f_cand = -math.inf
            if f_cand >= f_y:
                break
            shrunk = True
            step *= beta
            if step < step0 * _MIN_STEP_RATIO:
                cand = None
                break
        if cand is None or f_cand < f:
            if y is x and cand is None:
                # no ascent at any step length: stationary to working precision
                converged = True
                break
            y, f_y, theta = x, f, 1.0
            step = max(step, step0)
            continue
        change = f_cand - f
        x_prev, x, f = x, cand, f_cand
        if trace is not None:
            trace.append(f)
        quiet = quiet + 1 if change <= config.convergence_tol * max(1.0, abs(f)) else 0
        if quiet >= _PATIENCE:
            converged = True
            break
        theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        y = x + ((theta - 1.0) / theta_next) * (x - x_prev)
        theta = theta_next
        try:
            y = problem.project(y)
            f_y = problem.loglik(y)
        except DegenerateInputError:
            f_y = -math.inf
        if not f_y > -math.inf:
            y, f_y, theta = x, f, 1.0
        if not shrunk:
            step /= beta
    return x, f, iterations, converged, tuple(trace or ())


def fit_ml(dataset, d: int, config: MlConfig | None = None, seed: int = 0) -> MlResult:
    """Maximum-likelihood estimator of dimension ``d``.

    The best of ``config.n_starts`` runs is returned.  When every start has
    likelihood zero (a counted outcome is impossible in the truncated space)
    the maximally mixed state is returned with ``-inf``.
    """
    config = config or MlConfig()
    if not 2 <= d <= dataset.dim_max:
        raise ValueError(f"dimension {d} outside [2, {dataset.dim_max}]")
    if dataset.total_copies <= 0:
        raise ValueError("dataset contains no counts")
    problem = _problem(dataset, d, config)
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, d])
    if problem.impossible:
        x0 = problem.start(0, rng)
        return MlResult(problem.to_estimator(x0), -math.inf, 0, True, dim=d)
    step0 = config.step_size if config.step_size is not None else 1.0 / problem.total
    best = None
    for k in range(config.n_starts):
        x0 = problem.start(k, rng)
        x, f, its, conv, trace = _ascend(problem, x0, config, step0)
        if best is None or f > best[1]:
            best = (x, f, its, conv, trace)
    x, f, its, conv, trace = best
    return MlResult(problem.to_estimator(x), float(f), its, conv, dim=d, trace=trace)


def _pad(result: MlResult, dataset, d: int) -> np.ndarray:
    if isinstance(dataset, DiagonalDataset) and dataset.modes > 1:
        lower = result.dim
        q_low = result.populations
        shape_low = (lower,) * dataset.modes
        q = np.zeros((d,) * dataset.modes)
        q[tuple(slice(0, lower) for _ in range(dataset.modes))] = q_low.reshape(shape_low)
        return np.diag(q.ravel()).astype(complex)
    return embed(result.estimator, d)


def sweep_dimensions(dataset, d_min: int, d_max: int, config: MlConfig | None = None, seed: int = 0):
    """Fits for every ``d`` in ``[d_min, d_max]`` with non-decreasing likelihood.

    A fit that falls below its predecessor is replaced by the predecessor's
    estimator zero-padded to ``d``.
    """
    if not 2 <= d_min <= d_max <= dataset.dim_max:
        raise ValueError(f"invalid sweep range [{d_min}, {d_max}] for dim_max {dataset.dim_max}")
    config = config or MlConfig()
    results: list[MlResult] = []
    for d in range(d_min, d_max + 1):
        res = fit_ml(dataset, d, config, seed)
        if results and res.log_likelihood_nat < results[-1].log_likelihood_nat:
            prev = results[-1]
            res = replace(
                res,
                estimator=_pad(prev, dataset, d),
                log_likelihood_nat=prev.log_likelihood_nat,
                padded_from_lower_dim=True,
            )
        results.append(res)
    return results


def stationarity_residual(dataset, result: MlResult) -> float:
    """``||R rho - rho||`` with ``R = (1/N) sum_j (n_j/p_j) Pi_j``."""
    problem = _problem(dataset, result.dim, MlConfig())
    if isinstance(problem, _DiagonalProblem):
        return problem.stationarity(result.populations)
    return problem.stationarity(result.estimator)

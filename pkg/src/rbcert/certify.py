"""Relative-belief dimension certification and information-criterion baselines.

Given the maximal likelihood ``L_d`` reached in every truncation dimension
``d`` and a prior ``pr(d)``, the relative-belief ratio

    RB(d) = L_d / sum_d' L_d' pr(d')

exceeds 1 exactly when the data raise the belief in ``d``.  The certified
dimension is the smallest such ``d``.  All of this runs on :class:`BigLog`
likelihoods and ``Decimal`` probabilities, so nothing underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional, Sequence

from .xprec import CTX, BigLog, DomainError, exp10, from_natural_log, log_sum

__all__ = [
    "NO_DIMENSION_WARNING",
    "RB_TOL",
    "Prior",
    "make_prior",
    "prior_from_weights",
    "parse_prior_spec",
    "DimensionEvidence",
    "evaluate_evidence",
    "posterior",
    "rb_ratios",
    "certify_dimension",
    "plausible_interval_credibility",
    "kappa",
    "information_criterion",
    "CertificationReport",
    "certify_likelihoods",
    "build_report",
]

NO_DIMENSION_WARNING = "no dimension supported by data"
IC_TIE_TOL = Decimal("1e-9")
# RB of a flat profile is 1 only up to rounding in the last of 120 digits;
# the excess over 1 must clear this before it counts as evidence
RB_TOL = Decimal("1e-100")


@dataclass(frozen=True)
class Prior:
    """Strictly positive prior weights on the dimensions ``d_min..d_max``."""

    d_min: int
    d_max: int
    weights: tuple
    label: str = "custom"

    def __post_init__(self):
        if self.d_min < 2 or self.d_max <= self.d_min:
            raise ValueError(f"invalid prior domain [{self.d_min}, {self.d_max}]")
        if len(self.weights) != self.d_max - self.d_min + 1:
            raise ValueError("one weight per dimension is required")
        if any(w <= 0 for w in self.weights):
            raise ValueError("prior weights must be strictly positive")

    @property
    def dims(self) -> range:
        return range(self.d_min, self.d_max + 1)

    def weight(self, d: int) -> Decimal:
        return self.weights[d - self.d_min]


def _dsum(values) -> Decimal:
    # builtin sum would round in the thread's default 28-digit context
    total = Decimal(0)
    for v in values:
        total = CTX.add(total, v)
    return total


def _normalized(raw: Sequence[Decimal]) -> tuple:
    total = _dsum(raw)
    return tuple(CTX.divide(w, total) for w in raw)


def make_prior(kind, d_min: int = 2, d_max: int = 10, center: int | None = None) -> Prior:
    """Uniform or discretized-Gaussian prior ``pr(d) ∝ exp(-(d - center)^2)``.

    ``kind`` is ``"uniform"``, ``"gaussian"`` (with ``center``) or a
    ``("gaussian", center)`` pair.
    """
    if isinstance(kind, tuple):
        kind, center = kind
    if d_min < 2 or d_max <= d_min:
        raise ValueError(f"invalid prior domain [{d_min}, {d_max}]")
    if kind == "uniform":
        n = d_max - d_min + 1
        return Prior(d_min, d_max, tuple(CTX.divide(Decimal(1), Decimal(n)) for _ in range(n)), "uniform")
    if kind == "gaussian":
        if center is None:
            raise ValueError("gaussian prior needs a center")
        raw = [CTX.exp(Decimal(-((d - center) ** 2))) for d in range(d_min, d_max + 1)]
        return Prior(d_min, d_max, _normalized(raw), f"gaussian:{center}")
    raise ValueError(f"unknown prior kind {kind!r}")


def prior_from_weights(weights: Sequence, d_min: int = 2, label: str = "custom") -> Prior:
    raw = [w if isinstance(w, Decimal) else Decimal(str(w)) for w in weights]
    if any(w <= 0 for w in raw):
        raise ValueError("prior weights must be strictly positive")
    return Prior(d_min, d_min + len(raw) - 1, _normalized(raw), label)


def parse_prior_spec(spec: str, d_min: int, d_max: int) -> Prior:
    """``uniform``, ``gaussian:<center>`` or ``file:<path>`` (JSON list or ``{"weights": [...]}``)."""
    if spec == "uniform":
        return make_prior("uniform", d_min, d_max)
    if spec.startswith("gaussian:"):
        try:
            center = int(spec.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"gaussian center must be an integer: {spec!r}") from None
        return make_prior("gaussian", d_min, d_max, center=center)
    if spec.startswith("file:"):
        import json

        with open(spec[5:], encoding="utf-8") as fh:
            data = json.load(fh, parse_float=Decimal)
        weights = data["weights"] if isinstance(data, dict) else data
        file_dmin = data.get("d_min", d_min) if isinstance(data, dict) else d_min
        prior = prior_from_weights(weights, file_dmin, label=spec)
        if (prior.d_min, prior.d_max) != (d_min, d_max):
            raise ValueError(
                f"prior file covers [{prior.d_min}, {prior.d_max}], data need [{d_min}, {d_max}]"
            )
        return prior
    raise ValueError(f"unrecognized prior spec {spec!r}")


@dataclass(frozen=True)
class DimensionEvidence:
    prior: Prior
    likelihoods: tuple
    posteriors: tuple
    rb_ratios: tuple

    @property
    def dims(self) -> range:
        return self.prior.dims

    def posterior(self, d: int) -> Decimal:
        return self.posteriors[d - self.prior.d_min]

    def rb_ratio(self, d: int) -> Decimal:
        return self.rb_ratios[d - self.prior.d_min]

    def likelihood(self, d: int) -> BigLog:
        return self.likelihoods[d - self.prior.d_min]


def _normalizer(likelihoods: Sequence[BigLog], prior: Prior) -> BigLog:
    if len(likelihoods) != len(prior.weights):
        raise ValueError("likelihoods do not cover the prior domain")
    z = log_sum(likelihoods, prior.weights)
    if z.is_zero:
        raise DomainError("all likelihoods are zero")
    return z


def evaluate_evidence(likelihoods: Sequence[BigLog], prior: Prior) -> DimensionEvidence:
    likelihoods = tuple(likelihoods)
    z = _normalizer(likelihoods, prior)
    ratios = []
    posts = []
    for lik, w in zip(likelihoods, prior.weights):
        if lik.is_zero:
            ratios.append(Decimal(0))
            posts.append(Decimal(0))
            continue
        log_ratio = CTX.subtract(lik.log10_mag, z.log10_mag)
        ratios.append(exp10(log_ratio))
        posts.append(exp10(CTX.add(log_ratio, CTX.log10(w))))
    return DimensionEvidence(prior, likelihoods, tuple(posts), tuple(ratios))


def posterior(likelihoods: Sequence[BigLog], prior: Prior) -> tuple:
    """``pr(d|data) = L_d pr(d) / sum_d' L_d' pr(d')`` for every ``d``."""
    return evaluate_evidence(likelihoods, prior).posteriors


def rb_ratios(likelihoods: Sequence[BigLog], prior: Prior) -> tuple:
    """``RB(d) = L_d / sum_d' L_d' pr(d')`` for every ``d``."""
    return evaluate_evidence(likelihoods, prior).rb_ratios


def certify_dimension(evidence: DimensionEvidence) -> Optional[int]:
    """Smallest ``d`` with ``RB(d) > 1`` (strict, beyond ``RB_TOL``), or ``None``."""
    for d, ratio in zip(evidence.dims, evidence.rb_ratios):
        if CTX.subtract(ratio, Decimal(1)) > RB_TOL:
            return d
    return None


def plausible_interval_credibility(posteriors: Sequence[Decimal], d_rb: int, delta: int, d_min: int = 2) -> Decimal:
    """Posterior mass of ``[d_rb, d_rb + delta]``."""
    lo = d_rb - d_min
    hi = lo + delta
    if delta < 0 or lo < 0 or hi >= len(posteriors):
        raise ValueError(f"interval [{d_rb}, {d_rb + delta}] outside the prior domain")
    return _dsum(posteriors[lo : hi + 1])


def kappa(d: int, kind: str) -> int:
    """Free parameters: ``d^2 - 1`` for a full state, ``d - 1`` for populations."""
    if kind == "full_state":
        return d * d - 1
    if kind == "diagonal":
        return d - 1
    raise ValueError(f"unknown kappa kind {kind!r}")


def _as_decimal_ln(value) -> Decimal:
    if isinstance(value, BigLog):
        return value.ln()
    if isinstance(value, Decimal):
        return value
    return Decimal(float(value))


def information_criterion(log_likelihoods_nat: Sequence, alpha: float, kappa_kind: str, d_min: int = 2) -> int:
    """Minimizer of ``alpha * kappa_d - ln L_d``; ties go to the largest ``d``.

    Entries may be floats, decimals or :class:`BigLog` likelihoods.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a = Decimal(alpha) if not isinstance(alpha, Decimal) else alpha
    values = []
    for offset, raw in enumerate(log_likelihoods_nat):
        ln = _as_decimal_ln(raw)
        if ln.is_infinite():
            values.append(None)
            continue
        values.append(CTX.subtract(CTX.multiply(a, Decimal(kappa(d_min + offset, kappa_kind))), ln))
    finite = [v for v in values if v is not None]
    if not finite:
        raise DomainError("every log-likelihood is -inf")
    best = min(finite)
    chosen = max(i for i, v in enumerate(values) if v is not None and CTX.subtract(v, best) <= IC_TIE_TOL)
    return d_min + chosen


@dataclass
class CertificationReport:
    d_rb: Optional[int]
    evidence: DimensionEvidence
    intervals: list
    d_aic: Optional[int]
    d_bic: Optional[int]
    alpha_bic: Optional[float]
    kappa_kind: str
    n_total: Optional[int] = None
    warning: Optional[str] = None
    fidelities: dict = field(default_factory=dict)
    fidelity_kind: Optional[str] = None
    diagnostics: list = field(default_factory=list)

    @property
    def prior(self) -> Prior:
        return self.evidence.prior


def certify_likelihoods(
    likelihoods: Sequence[BigLog],
    prior: Prior,
    interval_deltas: Sequence[int] = (0, 1, 2),
    n_total: Optional[int] = None,
    kappa_kind: str = "full_state",
) -> CertificationReport:
    """Certify from likelihoods alone.  BIC needs ``n_total`` and is skipped without it."""
    evidence = evaluate_evidence(likelihoods, prior)
    d_rb = certify_dimension(evidence)
    intervals = []
    if d_rb is not None:
        for delta in interval_deltas:
            if d_rb + delta <= prior.d_max:
                c = plausible_interval_credibility(evidence.posteriors, d_rb, delta, prior.d_min)
                intervals.append((delta, c))
    d_aic = information_criterion(evidence.likelihoods, 1.0, kappa_kind, prior.d_min)
    alpha_bic = d_bic = None
    if n_total:
        alpha_bic = math.log(n_total) / 2
        d_bic = information_criterion(evidence.likelihoods, alpha_bic, kappa_kind, prior.d_min)
    return CertificationReport(
        d_rb=d_rb,
        evidence=evidence,
        intervals=intervals,
        d_aic=d_aic,
        d_bic=d_bic,
        alpha_bic=alpha_bic,
        kappa_kind=kappa_kind,
        n_total=n_total,
        warning=NO_DIMENSION_WARNING if d_rb is None else None,
    )


def build_report(dataset, sweep, prior: Prior, interval_deltas: Sequence[int] = (0, 1, 2)) -> CertificationReport:
    """Assemble the full report from a dimension sweep over the prior domain."""
    by_dim = {r.dim: r for r in sweep}
    missing = [d for d in prior.dims if d not in by_dim]
    if missing:
        raise ValueError(f"sweep lacks dimensions {missing}")
    results = [by_dim[d] for d in prior.dims]
    likelihoods = [from_natural_log(r.log_likelihood_nat) for r in results]
    report = certify_likelihoods(
        likelihoods,
        prior,
        interval_deltas,
        n_total=dataset.total_copies,
        kappa_kind=dataset.kappa_kind,
    )
    report.diagnostics = [
        {
            "d": r.dim,
            "log_likelihood_nat": r.log_likelihood_nat,
            "iterations": r.iterations_used,
            "converged": r.converged,
            "padded_from_lower_dim": r.padded_from_lower_dim,
        }
        for r in results
    ]
    return report

"""Files in and out: dataset JSON, likelihood fixtures, reports, tables, CSV.

Every writer goes through :func:`atomic_write_text`, so a crash never leaves
a half-written file behind.
"""

from __future__ import annotations

import csv
import decimal
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional

import numpy as np

from .certify import CertificationReport, kappa
from .quantum import DiagonalDataset, MeasurementDataset, PovmBasis
from .xprec import BigLog, parse_decimal, render_decimal

DATASET_SCHEMA = "rbcert-dataset-v1"
LIKELIHOOD_SCHEMA = "rbcert-likelihoods-v1"
REPORT_SCHEMA = "rbcert-report-v1"
STORED_DIGITS = 80
DEFAULT_DIGITS = 64
MAX_DIGITS = 80
DIGITS_ENV = "RBCERT_PRECISION_DIGITS"
_LN_CTX = decimal.Context(prec=30)


class FormatError(ValueError):
    """A file does not follow its declared schema."""


def display_digits(requested: Optional[int] = None) -> int:
    """Explicit request, else ``$RBCERT_PRECISION_DIGITS``, else 64."""
    if requested is None:
        env = os.environ.get(DIGITS_ENV)
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise ValueError(f"{DIGITS_ENV} must be an integer, got {env!r}") from None
        else:
            requested = DEFAULT_DIGITS
    if not 1 <= requested <= MAX_DIGITS:
        raise ValueError(f"digits must lie in [1, {MAX_DIGITS}]")
    return requested


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None


def _complex_pairs(a: np.ndarray) -> list:
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _from_pairs(raw) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape[-1] != 2:
        raise FormatError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    return value


def dataset_to_dict(dataset) -> dict:
    if isinstance(dataset, MeasurementDataset):
        return {
            "schema": DATASET_SCHEMA,
            "kind": "povm",
            "dim_max": dataset.dim_max,
            "bases": [
                {"elements": _complex_pairs(b.elements), "counts": c.tolist()}
                for b, c in zip(dataset.bases, dataset.counts)
            ],
            "provenance": _jsonable(dataset.provenance),
        }
    if isinstance(dataset, DiagonalDataset):
        return {
            "schema": DATASET_SCHEMA,
            "kind": "diagonal",
            "dim_max": dataset.dim_max,
            "response": dataset.response.tolist(),
            "counts": dataset.counts.tolist(),
            "columns": dataset.columns.tolist(),
            "provenance": _jsonable(dataset.provenance),
        }
    raise TypeError(f"unsupported dataset type {type(dataset).__name__}")


def dataset_from_dict(data: dict):
    if not isinstance(data, dict) or data.get("schema") != DATASET_SCHEMA:
        raise FormatError(f"expected schema {DATASET_SCHEMA!r}")
    try:
        kind = data["kind"]
        dim_max = int(data["dim_max"])
        provenance = data.get("provenance") or {}
        if kind == "povm":
            bases = tuple(PovmBasis(_from_pairs(b["elements"])) for b in data["bases"])
            counts = tuple(np.asarray(b["counts"], dtype=np.int64) for b in data["bases"])
            return MeasurementDataset(dim_max, bases, counts, provenance)
        if kind == "diagonal":
            response = np.asarray(data["response"], dtype=float)
            columns = data.get("columns")
            if columns is None:
                columns = np.arange(response.shape[1])[:, None]
            return DiagonalDataset(dim_max, response, np.asarray(data["counts"]), np.asarray(columns), provenance)
    except (KeyError, TypeError, IndexError) as exc:
        raise FormatError(f"malformed dataset: {exc!r}") from None
    raise FormatError(f"unknown dataset kind {kind!r}")


def save_dataset(dataset, path: str) -> None:
    atomic_write_text(path, json.dumps(dataset_to_dict(dataset)) + "\n")


def load_dataset(path: str):
    return dataset_from_dict(_read_json(path))


@dataclass(frozen=True)
class LikelihoodFixture:
    """Precomputed ``L_d`` for ``d = d_min, d_min + 1, ...``."""

    d_min: int
    likelihoods: tuple
    n_total: Optional[int] = None
    kappa_kind: str = "full_state"

    @property
    def d_max(self) -> int:
        return self.d_min + len(self.likelihoods) - 1


def load_likelihood_fixture(path: str) -> LikelihoodFixture:
    data = _read_json(path)
    if not isinstance(data, dict) or data.get("schema") != LIKELIHOOD_SCHEMA:
        raise FormatError(f"expected schema {LIKELIHOOD_SCHEMA!r}")
    try:
        raw = data["likelihoods"]
        d_min = int(data.get("d_min", 2))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed likelihood file: {exc!r}") from None
    if not isinstance(raw, list) or len(raw) < 2:
        raise FormatError("need at least two likelihoods")
    n_total = data.get("n_total")
    return LikelihoodFixture(
        d_min=d_min,
        likelihoods=tuple(parse_decimal(str(s)) for s in raw),
        n_total=int(n_total) if n_total is not None else None,
        kappa_kind=data.get("kappa_kind", "full_state"),
    )


def is_likelihood_file(path: str) -> bool:
    data = _read_json(path)
    return isinstance(data, dict) and data.get("schema") == LIKELIHOOD_SCHEMA


def _dec(x: Decimal, digits: int = STORED_DIGITS) -> str:
    return render_decimal(BigLog.from_number(x), digits)


@dataclass
class RunManifest:
    command: str
    inputs: list
    prior: str
    deltas: list
    outputs: list = field(default_factory=list)
    seed: Optional[int] = None
    solver: Optional[dict] = None
    digits: int = DEFAULT_DIGITS

    def as_dict(self) -> dict:
        if self.digits > MAX_DIGITS:
            raise ValueError(f"digits must not exceed {MAX_DIGITS}")
        return {
            "command": self.command,
            "inputs": [os.path.abspath(p) for p in self.inputs],
            "prior": self.prior,
            "deltas": list(self.deltas),
            "outputs": [os.path.abspath(p) for p in self.outputs],
            "seed": self.seed,
            "solver": self.solver,
            "digits": self.digits,
        }


def report_to_dict(report: CertificationReport, manifest: Optional[RunManifest] = None) -> dict:
    """JSON form of a report; decimals are stored as 80-digit strings."""
    ev = report.evidence
    rows = []
    for d in ev.dims:
        lik = ev.likelihood(d)
        ln = None if lik.is_zero else str(_LN_CTX.plus(lik.ln()))
        rows.append(
            {
                "d": d,
                "prior": _dec(ev.prior.weight(d)),
                "likelihood": render_decimal(lik, STORED_DIGITS),
                "log10_likelihood": None if lik.is_zero else str(lik.log10_mag),
                "log_likelihood_nat": ln,
                "posterior": _dec(ev.posterior(d)),
                "rb_ratio": _dec(ev.rb_ratio(d)),
                "kappa": kappa(d, report.kappa_kind),
            }
        )
    out = {
        "schema": REPORT_SCHEMA,
        "d_rb": report.d_rb,
        "warning": report.warning,
        "prior": ev.prior.label,
        "d_min": ev.prior.d_min,
        "d_max": ev.prior.d_max,
        "dimensions": rows,
        "intervals": [{"delta": delta, "d_low": report.d_rb, "d_high": report.d_rb + delta, "credibility": _dec(c)}
                      for delta, c in report.intervals],
        "d_aic": report.d_aic,
        "d_bic": report.d_bic,
        "alpha_bic": report.alpha_bic,
        "bic_log": "natural",
        "n_total": report.n_total,
        "kappa_kind": report.kappa_kind,
        "fidelity_kind": report.fidelity_kind,
        "fidelities": {str(k): v for k, v in report.fidelities.items()},
        "diagnostics": report.diagnostics,
    }
    if manifest is not None:
        out["manifest"] = manifest.as_dict()
    return out


def load_report(path: str) -> dict:
    data = _read_json(path)
    if not isinstance(data, dict) or data.get("schema") != REPORT_SCHEMA:
        raise FormatError(f"expected schema {REPORT_SCHEMA!r}")
    return data


def _short(s: Optional[str], digits: int) -> str:
    if s is None:
        return "-"
    return render_decimal(parse_decimal(s), digits)


def render_table(report: dict, digits: Optional[int] = None) -> str:
    """Aligned text table: one row per dimension, then the summary lines."""
    digits = display_digits(digits)
    header = ("d", "likelihood", "posterior", "RB ratio")
    rows = [
        (str(r["d"]), _short(r["likelihood"], digits), _short(r["posterior"], digits), _short(r["rb_ratio"], digits))
        for r in report["dimensions"]
    ]
    fid = report.get("fidelities") or {}
    if fid:
        header += (f"fidelity ({report.get('fidelity_kind')})",)
        rows = [row + (f"{fid[row[0]]:.6f}" if row[0] in fid else "-",) for row in rows]
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    lines = [f"prior: {report['prior']}"]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.rjust(w) if i == 0 else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths))).rstrip())
    lines.append("")
    lines.append(f"d_RB: {report['d_rb'] if report['d_rb'] is not None else 'none'}")
    if report.get("warning"):
        lines.append(f"warning: {report['warning']}")
    for iv in report["intervals"]:
        lines.append(f"C[{iv['d_low']}, {iv['d_high']}] (delta={iv['delta']}): {_short(iv['credibility'], digits)}")
    lines.append(f"d_AIC: {report['d_aic']}")
    bic = report["d_bic"]
    lines.append(f"d_BIC: {bic if bic is not None else 'n/a (copy count unknown)'}")
    return "\n".join(lines) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_csvs(report: dict, directory: str, digits: Optional[int] = None) -> list:
    """``loglik.csv`` (d vs ln L), ``rb.csv`` (d vs RB) and ``credibility.csv`` (delta vs C)."""
    digits = display_digits(digits)
    os.makedirs(directory, exist_ok=True)
    dims = report["dimensions"]
    files = {
        "loglik.csv": _csv_text(
            ("d", "log_likelihood_nat", "log10_likelihood"),
            [(r["d"], r["log_likelihood_nat"] or "-inf", r["log10_likelihood"] or "-inf") for r in dims],
        ),
        "rb.csv": _csv_text(
            ("d", "rb_ratio", "posterior", "prior"),
            [(r["d"], _short(r["rb_ratio"], digits), _short(r["posterior"], digits), _short(r["prior"], digits)) for r in dims],
        ),
        "credibility.csv": _csv_text(
            ("delta", "d_low", "d_high", "credibility"),
            [(iv["delta"], iv["d_low"], iv["d_high"], _short(iv["credibility"], digits)) for iv in report["intervals"]],
        ),
    }
    paths = []
    for name, text in files.items():
        path = os.path.join(directory, name)
        atomic_write_text(path, text)
        paths.append(path)
    return paths

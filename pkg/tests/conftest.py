import json
import os
from decimal import Decimal

import pytest

from rbcert.xprec import CTX, BigLog, parse_decimal

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name):
    return os.path.join(FIXTURES, name)


def load_json(name):
    with open(fixture_path(name), encoding="utf-8") as fh:
        return json.load(fh)


def table_likelihoods(i):
    data = load_json(f"table{i}_likelihoods.json")
    return [parse_decimal(s) for s in data["likelihoods"]], data


def table_posteriors(i):
    return load_json(f"table{i}_posteriors.json")


def agreeing_digits(actual, expected) -> float:
    """Significant digits on which two positive numbers agree (inf if equal)."""
    a = actual if isinstance(actual, Decimal) else Decimal(str(actual))
    e = expected if isinstance(expected, Decimal) else Decimal(str(expected))
    if a == e:
        return float("inf")
    rel = CTX.divide(CTX.abs(CTX.subtract(a, e)), CTX.abs(e))
    return float(-CTX.log10(rel))


def biglog_digits(actual: BigLog, expected: BigLog) -> float:
    """Agreement of two BigLog values measured on the values themselves."""
    if actual.is_zero or expected.is_zero:
        return float("inf") if actual.is_zero and expected.is_zero else 0.0
    diff = CTX.abs(CTX.subtract(actual.log10_mag, expected.log10_mag))
    if diff == 0:
        return float("inf")
    # |ratio - 1| ~ ln(10) * diff
    return float(-CTX.log10(CTX.multiply(diff, CTX.ln(Decimal(10)))))


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path

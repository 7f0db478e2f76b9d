"""Log-domain arithmetic for nonnegative numbers of extreme magnitude.

Likelihoods of large tomographic datasets routinely fall below 1e-300000000,
far outside binary floating point.  A :class:`BigLog` stores the base-10
logarithm of such a number as a :class:`decimal.Decimal` carrying
``PRECISION`` significant digits, which keeps products, ratios and weighted
sums exact to well beyond the 64 printed digits of typical tables.
"""

from __future__ import annotations

import decimal
import functools
import math
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Sequence, Union

__all__ = [
    "PRECISION",
    "CTX",
    "LN10",
    "BigLog",
    "ParseError",
    "DomainError",
    "parse_decimal",
    "render_decimal",
    "mul",
    "div",
    "compare",
    "log_sum",
    "from_natural_log",
    "to_decimal",
    "exp10",
]

#: Significant decimal digits carried by every extended-precision quantity.
PRECISION = 120

#: Shared context: wide exponent range so that posteriors such as 1e-80865634
#: are representable as plain decimals.
CTX = decimal.Context(
    prec=PRECISION,
    rounding=decimal.ROUND_HALF_EVEN,
    Emax=decimal.MAX_EMAX,
    Emin=decimal.MIN_EMIN,
    traps=[decimal.InvalidOperation, decimal.DivisionByZero, decimal.Overflow],
)

LN10 = CTX.ln(Decimal(10))

_SCI = re.compile(r"^[0-9](\.[0-9]*)?[eE][+-]?[0-9]+$")
_PLAIN = re.compile(r"^[0-9]*(\.[0-9]*)?$")

Number = Union[Decimal, int, float, str]


class ParseError(ValueError):
    """Malformed decimal literal."""


class DomainError(ValueError):
    """Operation undefined for the given (nonnegative) operands."""


@functools.total_ordering
@dataclass(frozen=True)
class BigLog:
    """A nonnegative real stored as ``sign`` and ``log10(|x|)``.

    ``sign`` is 0 for exact zero (``log10_mag`` is then ignored) and 1 for a
    positive value.
    """

    sign: int
    log10_mag: Decimal = Decimal(0)

    def __post_init__(self):
        if self.sign not in (0, 1):
            raise DomainError(f"sign must be 0 or 1, got {self.sign!r}")
        if self.sign == 0:
            object.__setattr__(self, "log10_mag", Decimal(0))
            return
        mag = self.log10_mag
        if not isinstance(mag, Decimal):
            mag = Decimal(mag)
        if not mag.is_finite():
            raise DomainError("log10 magnitude must be finite")
        object.__setattr__(self, "log10_mag", CTX.plus(mag))

    @classmethod
    def zero(cls) -> "BigLog":
        return cls(0)

    @classmethod
    def from_log10(cls, log10_mag: Number) -> "BigLog":
        return cls(1, Decimal(log10_mag))

    @classmethod
    def from_number(cls, x: Number) -> "BigLog":
        """Convert an ordinary nonnegative number (floats are taken exactly)."""
        d = x if isinstance(x, Decimal) else Decimal(x)
        if d.is_nan() or d < 0:
            raise DomainError(f"value must be nonnegative, got {x!r}")
        if d == 0:
            return cls.zero()
        return cls(1, CTX.log10(d))

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def ln(self) -> Decimal:
        """Natural logarithm; ``-Infinity`` for zero."""
        if self.is_zero:
            return Decimal("-Infinity")
        return CTX.multiply(self.log10_mag, LN10)

    def __mul__(self, other: "BigLog") -> "BigLog":
        return mul(self, other)

    def __truediv__(self, other: "BigLog") -> "BigLog":
        return div(self, other)

    def __lt__(self, other: "BigLog") -> bool:
        return compare(self, other) < 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, BigLog):
            return NotImplemented
        return compare(self, other) == 0

    def __hash__(self):
        return hash((self.sign, self.log10_mag))

    def __str__(self) -> str:
        return render_decimal(self, 16)

    def __repr__(self) -> str:
        return f"BigLog({render_decimal(self, 20)})"


def parse_decimal(s: str) -> BigLog:
    """Parse ``d.ddd…e±N`` or a plain decimal in [0, 1] exactly.

    Raises
    ------
    ParseError
        If the literal is malformed.
    DomainError
        If the literal is negative or a plain decimal exceeds 1.
    """
    text = s.strip()
    if text.startswith("-"):
        raise DomainError(f"likelihood values are nonnegative, got {s!r}")
    if text.startswith("+"):
        text = text[1:]
    if _SCI.match(text):
        value = Decimal(text)
    elif text and text != "." and _PLAIN.match(text):
        value = Decimal(text)
        if value > 1:
            raise DomainError(f"plain decimals must lie in [0, 1], got {s!r}")
    else:
        raise ParseError(f"malformed decimal literal {s!r}")
    if value == 0:
        return BigLog.zero()
    return BigLog(1, CTX.log10(value))


def exp10(x: Decimal) -> Decimal:
    """``10**x`` at working precision (any exponent in the context range)."""
    x = Decimal(x)
    if x == x.to_integral_value():
        return CTX.scaleb(Decimal(1), int(x))
    return CTX.power(Decimal(10), x)


def _mantissa_exponent(x: BigLog, digits: int) -> tuple[Decimal, int]:
    mag = x.log10_mag
    exponent = int(mag.to_integral_value(rounding=decimal.ROUND_FLOOR))
    frac = CTX.subtract(mag, Decimal(exponent))
    mantissa = exp10(frac)
    quantum = Decimal(1).scaleb(-(digits - 1))
    rounded = mantissa.quantize(quantum, rounding=decimal.ROUND_HALF_EVEN, context=CTX)
    if rounded >= 10:
        exponent += 1
        rounded = CTX.divide(rounded, Decimal(10)).quantize(quantum, rounding=decimal.ROUND_HALF_EVEN, context=CTX)
    elif rounded < 1:
        # exp10 of a fraction just below 0 after rounding of the log
        exponent -= 1
        rounded = CTX.multiply(rounded, Decimal(10)).quantize(quantum, rounding=decimal.ROUND_HALF_EVEN, context=CTX)
    return rounded, exponent


def render_decimal(x: BigLog, digits: int) -> str:
    """Scientific notation with ``digits`` significant mantissa digits.

    >>> render_decimal(BigLog.from_number("0.25"), 3)
    '2.50e-1'
    """
    if digits < 1 or digits > PRECISION - 20:
        raise ValueError(f"digits must lie in [1, {PRECISION - 20}]")
    if x.is_zero:
        return "0"
    mantissa, exponent = _mantissa_exponent(x, digits)
    body = format(mantissa, "f")
    sign = "-" if exponent < 0 else "+"
    return f"{body}e{sign}{abs(exponent)}"


def to_decimal(x: BigLog) -> Decimal:
    """The value itself as a wide-range decimal."""
    if x.is_zero:
        return Decimal(0)
    return exp10(x.log10_mag)


def mul(a: BigLog, b: BigLog) -> BigLog:
    if a.is_zero or b.is_zero:
        return BigLog.zero()
    return BigLog(1, CTX.add(a.log10_mag, b.log10_mag))


def div(a: BigLog, b: BigLog) -> BigLog:
    if b.is_zero:
        raise DomainError("division by zero")
    if a.is_zero:
        return BigLog.zero()
    return BigLog(1, CTX.subtract(a.log10_mag, b.log10_mag))


def compare(a: BigLog, b: BigLog) -> int:
    """-1, 0 or 1 as ``a`` is less than, equal to or greater than ``b``."""
    if a.sign != b.sign:
        return -1 if a.sign < b.sign else 1
    if a.is_zero:
        return 0
    if a.log10_mag == b.log10_mag:
        return 0
    return -1 if a.log10_mag < b.log10_mag else 1


def log_sum(values: Sequence[BigLog], weights: Iterable[Number] | None = None) -> BigLog:
    """Weighted sum ``sum_i w_i * v_i`` by factoring out the largest term.

    Weights default to 1 and are converted exactly to decimals.
    """
    values = list(values)
    if not values:
        raise DomainError("log_sum of an empty sequence")
    if weights is None:
        weights = [Decimal(1)] * len(values)
    else:
        weights = [w if isinstance(w, Decimal) else Decimal(w) for w in weights]
    if len(weights) != len(values):
        raise DomainError("values and weights differ in length")
    logs = []
    for v, w in zip(values, weights):
        if w < 0:
            raise DomainError("weights must be nonnegative")
        if w == 0 or v.is_zero:
            continue
        logs.append(CTX.add(v.log10_mag, CTX.log10(w)))
    if not logs:
        return BigLog.zero()
    top = max(logs)
    cutoff = -(PRECISION + 10)
    total = Decimal(0)
    for lg in logs:
        diff = CTX.subtract(lg, top)
        if diff < cutoff:
            continue
        total = CTX.add(total, exp10(diff))
    return BigLog(1, CTX.add(top, CTX.log10(total)))


def from_natural_log(ln_value: Number) -> BigLog:
    """Convert a natural-log value; ``-inf`` maps to zero."""
    d = ln_value if isinstance(ln_value, Decimal) else Decimal(ln_value)
    if d.is_nan():
        raise DomainError("natural log value is NaN")
    if d.is_infinite():
        if d < 0:
            return BigLog.zero()
        raise DomainError("+inf likelihood")
    return BigLog(1, CTX.divide(d, LN10))

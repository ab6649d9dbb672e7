"""Scalar helpers that work on plain floats and on gmpy2 ``mpfr`` values.

Log coordinates of very small arguments (ln x below -1e308) do not fit in a
float, so log-domain code accepts ``mpfr`` as well.  Every helper returns a
float for float input and an ``mpfr`` otherwise.
"""
from __future__ import annotations

import math
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr

INF = math.inf
NEG_INF = -math.inf

# differences below this (in nats) are dropped from log-sum-exp
_LSE_CUTOFF = -800.0


def is_mpfr(v) -> bool:
    return type(v) is type(mpfr(0))


def exp(v):
    if is_mpfr(v):
        return gmpy2.exp(v)
    if v > 709.0:
        return INF
    return math.exp(v)


def log(v):
    if is_mpfr(v):
        return gmpy2.log(v) if v > 0 else (NEG_INF if v == 0 else math.nan)
    if v == 0:
        return NEG_INF
    if v == INF:
        return INF
    if isinstance(v, Fraction):
        return math.log(v.numerator) - math.log(v.denominator)
    return math.log(v)


def log1mexp(d):
    """ln(1 - e^d) for d <= 0."""
    if d == 0:
        return NEG_INF
    if d == NEG_INF:
        return 0.0 if not is_mpfr(d) else mpfr(0)
    if is_mpfr(d):
        if d > -0.6931471805599453:
            return gmpy2.log(-gmpy2.expm1(d))
        return gmpy2.log1p(-gmpy2.exp(d))
    if d > -0.6931471805599453:
        return math.log(-math.expm1(d))
    return math.log1p(-math.exp(d))


def log_sub(a, b):
    """ln(e^a - e^b) for a >= b."""
    if b == NEG_INF:
        return a
    if a == INF:
        return INF
    return a + log1mexp(b - a)


def logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a == INF or b == INF:
        return INF
    if a < b:
        a, b = b, a
    d = b - a
    if d < _LSE_CUTOFF:
        return a
    if is_mpfr(d):
        return a + gmpy2.log1p(gmpy2.exp(d))
    return a + math.log1p(math.exp(d))


def logsumexp(values):
    vals = [v for v in values if v != NEG_INF]
    if not vals:
        return NEG_INF
    m = max(vals)
    if m == INF:
        return INF
    s = 0.0
    for v in vals:
        d = v - m
        if d > _LSE_CUTOFF:
            s = s + exp(d)
    return m + log(s)


def to_float(v) -> float:
    if is_mpfr(v):
        return float(v)
    return float(v)


def fmt(v) -> str:
    """Stable string form of a float or mpfr (round-trips through parse)."""
    if is_mpfr(v):
        if gmpy2.is_infinite(v):
            return "inf" if v > 0 else "-inf"
        return str(v)
    if v == INF:
        return "inf"
    if v == NEG_INF:
        return "-inf"
    return repr(float(v))


def parse_real(s):
    """Parse a decimal string; values outside float range become mpfr."""
    if isinstance(s, (int, float)):
        return float(s)
    s = str(s).strip()
    if s in ("inf", "+inf", "Infinity"):
        return INF
    if s in ("-inf", "-Infinity"):
        return NEG_INF
    v = float(s)
    if math.isinf(v) or (v == 0.0 and any(ch in s for ch in "123456789")):
        return mpfr(s)
    return v


def deep_t(sigma):
    """t = -exp(sigma) as float when representable, else mpfr."""
    if sigma < 700:
        return -math.exp(sigma)
    return -gmpy2.exp(mpfr(sigma))

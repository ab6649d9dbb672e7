"""Increasing functions [0, inf] -> [0, inf] as immutable expression trees.

Every node evaluates to 0 at 0 and is weakly increasing.  Three evaluators
are provided:

* ``eval(x)``      exact ``Fraction`` arithmetic where possible, float otherwise;
* ``eval_array``   vectorised float evaluation on numpy arrays;
* ``loglog(t)``    ln f(e^t) computed in log coordinates, so that arguments far
                   below the float range (t an ``mpfr``) can be probed.

Each node also carries the asymptotic germ of the function at 0 and at inf.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np

from . import _num
from ._num import INF, NEG_INF

AT_ZERO = "AtZero"
AT_INF = "AtInfinity"

ZERO = "Zero"
POSITIVE_LIMIT = "PositiveLimit"
POWER_LIKE = "PowerLike"
SLOWLY_VARYING = "SlowlyVaryingNumeric"
INFINITE = "InfiniteAtEndpoint"


# ---------------------------------------------------------------- rationals

def rat(v):
    """Coerce to ``Fraction`` (or ``INF``).  Accepts str like '1/2' or 'inf'."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise TypeError("bool is not a rational")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        if math.isinf(v):
            if v < 0:
                raise ValueError("negative infinity is not allowed")
            return INF
        return Fraction(v)
    if isinstance(v, str):
        s = v.strip()
        if s in ("inf", "+inf", "Infinity", "oo"):
            return INF
        return Fraction(s)
    raise TypeError(f"cannot interpret {v!r} as a rational")


def rat_str(v) -> str:
    if v == INF:
        return "inf"
    if isinstance(v, Fraction):
        return str(v)
    return _num.fmt(v)


def _iroot(n: int, q: int):
    r, exact = gmpy2.iroot(n, q)
    return int(r) if exact else None


def exact_pow(x: Fraction, p: Fraction):
    """x**p, exact when the result is rational, float otherwise."""
    if p.denominator == 1:
        return x ** p.numerator
    q = p.denominator
    rn, rd = _iroot(x.numerator, q), _iroot(x.denominator, q)
    if rn is not None and rd is not None:
        return Fraction(rn, rd) ** p.numerator
    return float(x) ** float(p)


def _is_exact(v) -> bool:
    return isinstance(v, Fraction)


# ---------------------------------------------------------------- germs

@dataclass(frozen=True)
class Germ:
    kind: str
    endpoint: str
    c: object = None          # coefficient / limit (Fraction, float or mpfr)
    p: Fraction | None = None  # exponent for PowerLike
    samples: tuple = field(default=(), compare=False)

    @property
    def exact(self) -> bool:
        return self.kind != SLOWLY_VARYING

    def predicted_log(self, t):
        if self.kind == ZERO:
            return NEG_INF
        if self.kind == INFINITE:
            return INF
        if self.kind == POSITIVE_LIMIT:
            return _num.log(self.c)
        if self.kind == POWER_LIKE:
            return _num.log(self.c) + float(self.p) * t
        raise ValueError("slowly varying germs have no closed form")

    def to_json(self) -> dict:
        d = {"kind": self.kind, "endpoint": self.endpoint}
        if self.c is not None:
            d["c"] = rat_str(self.c)
        if self.p is not None:
            d["p"] = str(self.p)
        if self.samples:
            d["samples"] = [[_num.fmt(t), _num.fmt(v)] for t, v in self.samples]
        return d

    def __str__(self):
        if self.kind == POWER_LIKE:
            return f"PowerLike({rat_str(self.c)}, {self.p})"
        if self.kind == POSITIVE_LIMIT:
            return f"PositiveLimit({rat_str(self.c)})"
        return self.kind


def _g(kind, endpoint, c=None, p=None):
    return Germ(kind, endpoint, c, p)


def _order_key(g: Germ):
    """Asymptotic size of a germ near its endpoint (larger = bigger function)."""
    if g.endpoint == AT_ZERO:
        if g.kind == ZERO:
            return (0, 0, 0)
        if g.kind == POWER_LIKE:
            return (1, -g.p, g.c)
        if g.kind == POSITIVE_LIMIT:
            return (2, 0, g.c)
        return (3, 0, 0)
    if g.kind == ZERO:
        return (0, 0, 0)
    if g.kind == POSITIVE_LIMIT:
        return (1, 0, g.c)
    if g.kind == POWER_LIKE:
        return (2, g.p, g.c)
    return (3, 0, 0)


def _mul(a, b):
    if _is_exact(a) and _is_exact(b):
        return a * b
    return float(a) * float(b) if not (_num.is_mpfr(a) or _num.is_mpfr(b)) else a * b


def _add(a, b):
    if _is_exact(a) and _is_exact(b):
        return a + b
    return a + b if (_num.is_mpfr(a) or _num.is_mpfr(b)) else float(a) + float(b)


def _cpow(c, p: Fraction):
    if _is_exact(c):
        return exact_pow(c, p)
    return c ** float(p)


def germ_sum(gs, endpoint):
    if any(g.kind == SLOWLY_VARYING for g in gs):
        return _g(SLOWLY_VARYING, endpoint)
    live = [g for g in gs if g.kind != ZERO]
    if not live:
        return _g(ZERO, endpoint)
    top = max(live, key=_order_key)
    if top.kind == INFINITE:
        return top
    same = [g for g in live if g.kind == top.kind and g.p == top.p]
    c = same[0].c
    for g in same[1:]:
        c = _add(c, g.c)
    return _g(top.kind, endpoint, c, top.p)


def germ_min(gs, endpoint):
    if any(g.kind == SLOWLY_VARYING for g in gs):
        return _g(SLOWLY_VARYING, endpoint)
    return min(gs, key=_order_key)


def germ_max(gs, endpoint):
    if any(g.kind == SLOWLY_VARYING for g in gs):
        return _g(SLOWLY_VARYING, endpoint)
    return max(gs, key=_order_key)


def germ_scale(k, g: Germ):
    if g.kind in (POWER_LIKE, POSITIVE_LIMIT):
        return _g(g.kind, g.endpoint, _mul(k, g.c), g.p)
    return g


def _limit_germ(v, endpoint):
    if v == INF:
        return _g(INFINITE, endpoint)
    if v == 0:
        return _g(ZERO, endpoint)
    return _g(POSITIVE_LIMIT, endpoint, v)


def germ_compose(outer: "ExtFun", inner: "ExtFun", endpoint):
    gi = inner.germ(endpoint)
    if gi.kind == SLOWLY_VARYING:
        return _g(SLOWLY_VARYING, endpoint)
    if gi.kind == ZERO:
        return _g(ZERO, endpoint)
    if gi.kind == INFINITE:
        return _limit_germ(outer.eval(INF), endpoint)
    if gi.kind == POSITIVE_LIMIT:
        if endpoint == AT_ZERO:
            # right limit of outer at a positive point is not tracked exactly
            return _g(SLOWLY_VARYING, endpoint)
        return _limit_germ(outer.eval(gi.c if _is_exact(gi.c) else float(gi.c)), endpoint)
    # inner is power-like: it tends to 0 (at zero) or inf (at infinity)
    go = outer.germ(endpoint)
    if go.kind == POWER_LIKE:
        return _g(POWER_LIKE, endpoint, _mul(go.c, _cpow(gi.c, go.p)), go.p * gi.p)
    if go.kind == SLOWLY_VARYING:
        return go
    return go if go.endpoint == endpoint else _g(go.kind, endpoint, go.c, go.p)


# ---------------------------------------------------------------- base node

class ExtFun:
    """Base class; subclasses fill their fields and then call ``_finish``."""

    kind = "abstract"

    def _finish(self):
        self.germ0 = self._germ(AT_ZERO)
        self.germinf = self._germ(AT_INF)

    # -- evaluation
    def eval(self, x):
        if isinstance(x, int) and not isinstance(x, bool):
            x = Fraction(x)
        if x == 0:
            return Fraction(0)
        if x < 0:
            raise ValueError("functions are defined on [0, inf]")
        if isinstance(x, float) and math.isinf(x):
            x = INF
        return self._eval(x)

    def __call__(self, x):
        return self.eval(x)

    def eval_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = self._eval_array(xs)
        return np.where(xs == 0, 0.0, out)

    def _eval_array(self, xs):
        return np.array([float(self._eval(float(x))) if x > 0 else 0.0 for x in xs])

    def loglog(self, t):
        """ln f(e^t); -inf iff f(e^t) = 0.  ``t`` may be a float or an mpfr."""
        if t == NEG_INF:
            return NEG_INF
        return self._loglog(t)

    def _loglog(self, t):
        x = _num.exp(t)
        if x == 0:
            raise OverflowError("loglog not implemented below float range")
        return _num.log(self._eval(float(x)) if x != INF else self._eval(INF))

    def germ(self, endpoint):
        return self.germ0 if endpoint == AT_ZERO else self.germinf

    def children(self):
        return ()

    def to_json(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_json()})"

    # -- algebra sugar
    def __add__(self, other):
        return add(self, other)

    def __rmul__(self, k):
        return scale(k, self)


# ---------------------------------------------------------------- primitives

class Power(ExtFun):
    kind = "power"

    def __init__(self, c=1, p=1):
        self.c, self.p = rat(c), rat(p)
        if self.c == INF or self.c <= 0:
            raise ValueError("Power coefficient must be a positive rational")
        if self.p == INF or self.p < 0:
            raise ValueError("Power exponent must be a nonnegative rational")
        self._lnc = _num.log(self.c)
        self._pf = float(self.p)
        self._finish()

    def _eval(self, x):
        if x == INF:
            return INF if self.p > 0 else self.c
        if isinstance(x, Fraction):
            return self.c * exact_pow(x, self.p)
        return float(self.c) * x ** self._pf

    def _eval_array(self, xs):
        with np.errstate(over="ignore"):
            return float(self.c) * np.power(xs, self._pf)

    def _loglog(self, t):
        if self.p == 0:
            return self._lnc
        if t == INF:
            return INF
        return self._lnc + self._pf * t

    def _germ(self, endpoint):
        if self.p == 0:
            return _g(POSITIVE_LIMIT, endpoint, self.c)
        return _g(POWER_LIKE, endpoint, self.c, self.p)

    def to_json(self):
        return {"kind": "power", "c": str(self.c), "p": str(self.p)}


class Const(ExtFun):
    """x -> c for x > 0 and 0 at 0 (c = inf gives the infinite ICOD function)."""

    kind = "const"

    def __init__(self, c, zero_at_zero=True):
        self.c = rat(c)
        if self.c != INF and self.c < 0:
            raise ValueError("Const value must be nonnegative")
        if self.c != 0 and not zero_at_zero:
            raise ValueError("positive constants must vanish at 0 (set zero_at_zero)")
        self.zero_at_zero = True
        self._finish()

    def _eval(self, x):
        return self.c

    def _eval_array(self, xs):
        return np.full(xs.shape, float(self.c))

    def _loglog(self, t):
        return _num.log(self.c)

    def _germ(self, endpoint):
        return _limit_germ(self.c, endpoint)

    def to_json(self):
        return {"kind": "const", "c": rat_str(self.c), "zero_at_zero": True}


def _segment_loglog(lxs, lys, t, ln_tail_slope=None):
    """Log-domain evaluation of a piecewise-linear function.

    ``lxs``/``lys`` hold ln of the breakpoints (``-inf`` for zero entries).
    Values between breakpoints are convex combinations, so no cancellation
    occurs; the tail after the last breakpoint has slope exp(ln_tail_slope).
    """
    i = bisect.bisect_right(lxs, t) - 1
    if i < 0:
        return NEG_INF
    if t == lxs[i]:
        return lys[i]
    if i == len(lxs) - 1:
        if ln_tail_slope is None or ln_tail_slope == NEG_INF:
            return lys[i]
        if t == INF:
            return INF
        return _num.logaddexp(lys[i], ln_tail_slope + _num.log_sub(t, lxs[i]))
    if lys[i + 1] == INF:
        return INF
    den = _num.log_sub(lxs[i + 1], lxs[i])
    lu = _num.log_sub(t, lxs[i]) - den
    l1u = _num.log_sub(lxs[i + 1], t) - den
    return _num.logaddexp(lys[i] + l1u, lys[i + 1] + lu)


class PWL(ExtFun):
    """Piecewise-linear function through rational breakpoints.

    ``points`` must start at (0, 0); a second point at x = 0 encodes a jump
    f(0+) > 0.  After the last breakpoint the function continues with slope
    ``tail_slope`` (default 0, i.e. constant).  ``at_inf`` is the value at inf.
    """

    kind = "pwl"

    def __init__(self, points, at_inf=None, tail_slope=0):
        pts = [(rat(x), rat(y)) for x, y in points]
        if not pts or pts[0] != (0, 0):
            raise ValueError("PWL breakpoints must start at (0, 0)")
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x1 == INF:
                raise ValueError("breakpoints must be finite")
            if x1 < x0 or (x1 == x0 and x1 != 0):
                raise ValueError("breakpoint x must increase (repeat allowed only at 0)")
            if y1 < y0:
                raise ValueError("PWL must be increasing")
        if len(pts) > 2 and pts[2][0] == 0:
            raise ValueError("at most one jump at 0")
        self.points = tuple(pts)
        self.xs = [p[0] for p in pts]
        self.ys = [p[1] for p in pts]
        self.tail_slope = rat(tail_slope)
        if self.tail_slope == INF or self.tail_slope < 0:
            raise ValueError("tail slope must be a nonnegative rational")
        last = self.ys[-1]
        default_inf = INF if (self.tail_slope > 0 or last == INF) else last
        self.at_inf = default_inf if at_inf is None else rat(at_inf)
        if self.at_inf < default_inf:
            raise ValueError("value at infinity below the limit breaks monotonicity")
        self._lxs = [_num.log(x) for x in self.xs]
        self._lys = [_num.log(y) for y in self.ys]
        self._lns = _num.log(self.tail_slope) if self.tail_slope > 0 else None
        self._finish()

    def slopes(self):
        """Slopes of the finite segments followed by the tail slope."""
        out = []
        for (x0, y0), (x1, y1) in zip(self.points, self.points[1:]):
            if x1 == x0:
                continue
            out.append(INF if y1 == INF else (y1 - y0) / (x1 - x0))
        out.append(self.tail_slope)
        return out

    def _eval(self, x):
        if x == INF:
            return self.at_inf
        i = bisect.bisect_right(self.xs, x) - 1
        if x == self.xs[i]:
            return self.ys[i]
        if i == len(self.xs) - 1:
            if self.ys[i] == INF:
                return INF
            return self.ys[i] + self.tail_slope * (x - self.xs[i])
        y0, y1 = self.ys[i], self.ys[i + 1]
        if y1 == INF:
            return INF
        return y0 + (y1 - y0) * (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i])

    def _eval_array(self, xs):
        fx = np.array([float(v) for v in self.xs])
        fy = np.array([float(v) for v in self.ys])
        if len(fx) > 1 and fx[1] == 0:
            fx, fy = fx[1:], fy[1:]
        out = np.interp(xs, fx, fy)
        tail = xs > fx[-1]
        out[tail] = fy[-1] + float(self.tail_slope) * (xs[tail] - fx[-1])
        out[np.isinf(xs)] = float(self.at_inf)
        return out

    def _loglog(self, t):
        if t == INF:
            return _num.log(self.at_inf)
        return _segment_loglog(self._lxs, self._lys, t, self._lns)

    def _germ(self, endpoint):
        xs, ys = self.xs, self.ys
        if endpoint == AT_ZERO:
            if len(xs) == 1:
                s = self.tail_slope
                return _g(POWER_LIKE, endpoint, s, Fraction(1)) if s > 0 else _g(ZERO, endpoint)
            if xs[1] == 0:
                return _limit_germ(ys[1], endpoint)
            if ys[1] == INF:
                return _g(INFINITE, endpoint)
            s = ys[1] / xs[1]
            return _g(POWER_LIKE, endpoint, s, Fraction(1)) if s > 0 else _g(ZERO, endpoint)
        if self.tail_slope > 0:
            return _g(POWER_LIKE, endpoint, self.tail_slope, Fraction(1))
        return _limit_germ(ys[-1], endpoint)

    def to_json(self):
        d = {"kind": "pwl", "points": [[rat_str(x), rat_str(y)] for x, y in self.points],
             "at_inf": rat_str(self.at_inf)}
        if self.tail_slope:
            d["tail_slope"] = str(self.tail_slope)
        return d


class LogPWL(ExtFun):
    """Piecewise-linear function whose breakpoints are stored as (ln x, ln y).

    Used when breakpoints lie far below the float range.  The function starts
    at (0, 0), is linear between breakpoints and constant after the last one.
    ``resolved_logx`` marks the finite prefix of an open-ended construction:
    the segment reaching the origin is a closure, so the germ at 0 is reported
    as numeric and probes should stay above that depth.
    """

    kind = "logpwl"

    def __init__(self, lpoints, resolved_logx=None):
        pts = [(_num.parse_real(a) if isinstance(a, str) else a,
                _num.parse_real(b) if isinstance(b, str) else b) for a, b in lpoints]
        if not pts:
            raise ValueError("LogPWL needs at least one breakpoint")
        for (a0, b0), (a1, b1) in zip(pts, pts[1:]):
            if not (a1 > a0 and b1 >= b0):
                raise ValueError("LogPWL breakpoints must increase")
        self.lpoints = tuple(pts)
        self._lxs = [NEG_INF] + [a for a, _ in pts]
        self._lys = [NEG_INF] + [b for _, b in pts]
        self.resolved_logx = (_num.parse_real(resolved_logx)
                              if isinstance(resolved_logx, str) else resolved_logx)
        self.at_inf = _num.exp(pts[-1][1])
        self._finish()

    def _eval(self, x):
        if x == INF:
            return float(self.at_inf)
        return _num.to_float(_num.exp(self._loglog(_num.log(float(x)))))

    def _loglog(self, t):
        return _segment_loglog(self._lxs, self._lys, t)

    def ln_slopes(self):
        """ln of segment slopes, from the segment at the origin outward."""
        prev = gmpy2.get_context().precision
        out = []
        try:
            gmpy2.get_context().precision = 256
            lx = [gmpy2.mpfr(v) if v != NEG_INF else v for v in self._lxs]
            ly = [gmpy2.mpfr(v) if v != NEG_INF else v for v in self._lys]
            for i in range(len(lx) - 1):
                out.append(_num.log_sub(ly[i + 1], ly[i]) - _num.log_sub(lx[i + 1], lx[i])
                           if ly[i + 1] > ly[i] else NEG_INF)
        finally:
            gmpy2.get_context().precision = prev
        return out

    def _germ(self, endpoint):
        if endpoint == AT_INF:
            return _limit_germ(self.at_inf, endpoint)
        if self.resolved_logx is not None:
            return _g(SLOWLY_VARYING, endpoint)
        a, b = self.lpoints[0]
        return _g(POWER_LIKE, endpoint, _num.exp(b - a), Fraction(1))

    def to_json(self):
        d = {"kind": "logpwl", "points": [[_num.fmt(a), _num.fmt(b)] for a, b in self.lpoints]}
        if self.resolved_logx is not None:
            d["resolved_logx"] = _num.fmt(self.resolved_logx)
        return d


# ---------------------------------------------------------------- composites

def _exact_sum(vals):
    if any(v == INF for v in vals):
        return INF
    if all(_is_exact(v) for v in vals):
        return sum(vals, Fraction(0))
    return float(sum(float(v) for v in vals))


class Sum(ExtFun):
    kind = "sum"

    def __init__(self, children):
        self.items = tuple(children)
        if not self.items:
            raise ValueError("Sum needs at least one child")
        self._finish()

    def children(self):
        return self.items

    def _eval(self, x):
        return _exact_sum([c.eval(x) for c in self.items])

    def _eval_array(self, xs):
        return sum(c.eval_array(xs) for c in self.items)

    def _loglog(self, t):
        return _num.logsumexp([c.loglog(t) for c in self.items])

    def _germ(self, endpoint):
        return germ_sum([c.germ(endpoint) for c in self.items], endpoint)

    def to_json(self):
        return {"kind": "sum", "children": [c.to_json() for c in self.items]}


class Min(ExtFun):
    kind = "min"

    def __init__(self, children):
        self.items = tuple(children)
        if not self.items:
            raise ValueError("Min needs at least one child")
        self._finish()

    def children(self):
        return self.items

    def _eval(self, x):
        return min(c.eval(x) for c in self.items)

    def _eval_array(self, xs):
        return np.minimum.reduce([c.eval_array(xs) for c in self.items])

    def _loglog(self, t):
        return min(c.loglog(t) for c in self.items)

    def _germ(self, endpoint):
        return germ_min([c.germ(endpoint) for c in self.items], endpoint)

    def to_json(self):
        return {"kind": "min", "children": [c.to_json() for c in self.items]}


class Max(Min):
    kind = "max"

    def _eval(self, x):
        return max(c.eval(x) for c in self.items)

    def _eval_array(self, xs):
        return np.maximum.reduce([c.eval_array(xs) for c in self.items])

    def _loglog(self, t):
        return max(c.loglog(t) for c in self.items)

    def _germ(self, endpoint):
        return germ_max([c.germ(endpoint) for c in self.items], endpoint)

    def to_json(self):
        return {"kind": "max", "children": [c.to_json() for c in self.items]}


class Scale(ExtFun):
    kind = "scale"

    def __init__(self, k, child):
        self.k = rat(k)
        if self.k == INF or self.k <= 0:
            raise ValueError("scale factor must be a positive rational")
        self.child = child
        self._lnk = _num.log(self.k)
        self._finish()

    def children(self):
        return (self.child,)

    def _eval(self, x):
        v = self.child.eval(x)
        if v == INF:
            return INF
        return self.k * v if _is_exact(v) else float(self.k) * v

    def _eval_array(self, xs):
        return float(self.k) * self.child.eval_array(xs)

    def _loglog(self, t):
        return self._lnk + self.child.loglog(t)

    def _germ(self, endpoint):
        return germ_scale(self.k, self.child.germ(endpoint))

    def to_json(self):
        return {"kind": "scale", "k": str(self.k), "child": self.child.to_json()}


class Compose(ExtFun):
    """outer o inner."""

    kind = "compose"

    def __init__(self, outer, inner):
        self.outer, self.inner = outer, inner
        self._finish()

    def children(self):
        return (self.outer, self.inner)

    def _eval(self, x):
        return self.outer.eval(self.inner.eval(x))

    def _eval_array(self, xs):
        return self.outer.eval_array(self.inner.eval_array(xs))

    def _loglog(self, t):
        return self.outer.loglog(self.inner.loglog(t))

    def _germ(self, endpoint):
        return germ_compose(self.outer, self.inner, endpoint)

    def to_json(self):
        return {"kind": "compose", "outer": self.outer.to_json(), "inner": self.inner.to_json()}


class _Cached:
    """Small per-node memo for log-coordinate evaluations of deep towers."""

    __slots__ = ("store", "cap")

    def __init__(self, cap=1 << 15):
        self.store, self.cap = {}, cap

    def get(self, key):
        return self.store.get(key)

    def put(self, key, value):
        if len(self.store) >= self.cap:
            self.store.clear()
        self.store[key] = value


def _iter_germ(g: Germ, n: int, child: "ExtFun"):
    """Germ of child^(n) when the child germ is power-like with p <= 1 or p >= 1."""
    if g.kind != POWER_LIKE:
        return None
    c, p = g.c, g.p
    coef, expo = c, p
    for _ in range(n - 1):
        coef, expo = _mul(c, _cpow(coef, p)), expo * p
    return coef, expo


class Iterate(ExtFun):
    kind = "iterate"

    def __init__(self, child, n):
        if int(n) != n or n < 1:
            raise ValueError("iterate count must be a positive integer")
        self.child, self.n = child, int(n)
        self._memo = _Cached()
        self._finish()

    def children(self):
        return (self.child,)

    def _eval(self, x):
        v = x
        for _ in range(self.n):
            v = self.child.eval(v)
        return v

    def _eval_array(self, xs):
        v = xs
        for _ in range(self.n):
            v = self.child.eval_array(v)
        return v

    def _loglog(self, t):
        hit = self._memo.get(t)
        if hit is not None:
            return hit
        v = t
        for _ in range(self.n):
            v = self.child.loglog(v)
        self._memo.put(t, v)
        return v

    def _germ(self, endpoint):
        g = self.child.germ(endpoint)
        if g.kind == POWER_LIKE:
            c, p = _iter_germ(g, self.n, self.child)
            return _g(POWER_LIKE, endpoint, c, p)
        if g.kind in (ZERO, SLOWLY_VARYING):
            return g
        f = self.child
        for _ in range(self.n - 1):
            f = Compose(self.child, f)
        return f.germ(endpoint)

    def to_json(self):
        return {"kind": "iterate", "child": self.child.to_json(), "n": self.n}


class Series(ExtFun):
    """sum_{n=1..depth} w_n child^(n)."""

    kind = "series"

    def __init__(self, child, weights=None, depth=None, weight_ratio=None):
        if weights is None:
            if depth is None:
                raise ValueError("Series needs weights or a depth")
            r = rat(weight_ratio if weight_ratio is not None else Fraction(1, 2))
            weights = [r ** n for n in range(1, int(depth) + 1)]
        self.weights = tuple(rat(w) for w in weights)
        if depth is not None and int(depth) != len(self.weights):
            raise ValueError("depth does not match the number of weights")
        if not self.weights or any(w == INF or w <= 0 for w in self.weights):
            raise ValueError("Series weights must be positive rationals")
        r0 = self.weights[0]
        geometric = all(w == r0 ** (i + 1) for i, w in enumerate(self.weights))
        self.weight_ratio = r0 if geometric else None
        self.depth = len(self.weights)
        self.child = child
        self._lnw = [_num.log(w) for w in self.weights]
        self._memo = _Cached()
        self._finish()

    def children(self):
        return (self.child,)

    def _eval(self, x):
        vals, v = [], x
        for w in self.weights:
            v = self.child.eval(v)
            if v == INF:
                return INF
            vals.append(w * v if _is_exact(v) else float(w) * v)
        return _exact_sum(vals)

    def _eval_array(self, xs):
        total, v = np.zeros_like(xs), xs
        for w in self.weights:
            v = self.child.eval_array(v)
            total = total + float(w) * v
        return total

    def _loglog(self, t):
        hit = self._memo.get(t)
        if hit is not None:
            return hit
        terms, v = [], t
        for lw in self._lnw:
            v = self.child.loglog(v)
            terms.append(lw + v)
        out = _num.logsumexp(terms)
        self._memo.put(t, out)
        return out

    def _germ(self, endpoint):
        g = self.child.germ(endpoint)
        if g.kind in (ZERO, SLOWLY_VARYING):
            return g
        if endpoint == AT_ZERO:
            if g.kind == POWER_LIKE:
                if g.p == 1:
                    c = Fraction(0) if _is_exact(g.c) else 0.0
                    acc = g.c
                    for w in self.weights:
                        c = _add(c, _mul(w, acc))
                        acc = _mul(acc, g.c)
                    return _g(POWER_LIKE, endpoint, c, Fraction(1))
                if g.p > 1:
                    return _g(POWER_LIKE, endpoint, _mul(self.weights[0], g.c), g.p)
                return _g(SLOWLY_VARYING, endpoint)
            return _g(SLOWLY_VARYING, endpoint)
        if g.kind == POSITIVE_LIMIT:
            return _limit_germ(self.eval(INF), endpoint)
        if g.kind == INFINITE:
            return g
        if g.p < 1:
            return _g(POWER_LIKE, endpoint, _mul(self.weights[0], g.c), g.p)
        if g.p == 1:
            c, acc = Fraction(0) if _is_exact(g.c) else 0.0, g.c
            for w in self.weights:
                c = _add(c, _mul(w, acc))
                acc = _mul(acc, g.c)
            return _g(POWER_LIKE, endpoint, c, Fraction(1))
        return _g(SLOWLY_VARYING, endpoint)

    def to_json(self):
        d = {"kind": "series", "child": self.child.to_json(), "depth": self.depth}
        if self.weight_ratio is not None:
            d["weight_ratio"] = str(self.weight_ratio)
        else:
            d["weights"] = [str(w) for w in self.weights]
        return d


class TTransform(ExtFun):
    """x -> x / f(x), with 0 where f vanishes (or is infinite) and inf at inf."""

    kind = "ttransform"

    def __init__(self, child):
        self.child = child
        self._finish()

    def children(self):
        return (self.child,)

    def _eval(self, x):
        if x == INF:
            return INF
        v = self.child.eval(x)
        if v == 0 or v == INF:
            return Fraction(0) if _is_exact(x) else 0.0
        if _is_exact(x) and _is_exact(v):
            return x / v
        return float(x) / float(v)

    def _eval_array(self, xs):
        v = self.child.eval_array(xs)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where((v == 0) | np.isinf(v), 0.0, xs / v)
        out[np.isinf(xs)] = INF
        return out

    def _loglog(self, t):
        if t == INF:
            return INF
        lv = self.child.loglog(t)
        if lv == NEG_INF or lv == INF:
            return NEG_INF
        return t - lv

    def _germ(self, endpoint):
        g = self.child.germ(endpoint)
        if g.kind in (ZERO, INFINITE):
            return _g(ZERO, endpoint)
        if g.kind == SLOWLY_VARYING:
            return g
        inv = (1 / g.c) if _is_exact(g.c) else 1.0 / g.c
        if g.kind == POSITIVE_LIMIT:
            return _g(POWER_LIKE, endpoint, inv, Fraction(1))
        if g.p == 1:
            return _g(POSITIVE_LIMIT, endpoint, inv)
        if g.p < 1:
            return _g(POWER_LIKE, endpoint, inv, 1 - g.p)
        return _g(SLOWLY_VARYING, endpoint)

    def to_json(self):
        return {"kind": "ttransform", "child": self.child.to_json()}


# ---------------------------------------------------------------- constructors

def add(*fs):
    items = []
    for f in fs:
        items.extend(f.items if isinstance(f, Sum) else (f,))
    return items[0] if len(items) == 1 else Sum(items)


def compose(outer, inner):
    return Compose(outer, inner)


def iterate(f, n):
    return f if n == 1 else Iterate(f, n)


def pointwise_min(*fs):
    return Min(fs)


def pointwise_max(*fs):
    return Max(fs)


def scale(k, f):
    k = rat(k)
    return f if k == 1 else Scale(k, f)


def identity():
    return Power(1, 1)


def truncated_identity():
    """min(x, 1)."""
    return Min([Power(1, 1), Const(1)])


def sqrt_capped():
    """min(sqrt(x), 1)."""
    return Min([Power(1, Fraction(1, 2)), Const(1)])


def x_plus_one():
    """x + 1 on (0, inf] and 0 at 0."""
    return Sum([Power(1, 1), Const(1)])


def infinite_function():
    return Const(INF)


def iterate_domination(expr: ExtFun, f: ExtFun) -> dict:
    """Coefficients n_k with expr <= sum_k n_k f^(k), for expr built from f by + o scale.

    Valid for subadditive increasing f (every ISOD f): sums add coefficient
    maps, scale by k rounds up to ceil(k) copies, and composition convolves
    the maps because f^(k)(y1 + ... + ym) <= f^(k)(y1) + ... + f^(k)(ym).
    Returns None when expr contains a node not built from f this way.
    """
    if expr is f:
        return {1: 1}
    if isinstance(expr, Iterate) and expr.child is f:
        return {expr.n: 1}
    if isinstance(expr, Sum):
        out = {}
        for c in expr.items:
            d = iterate_domination(c, f)
            if d is None:
                return None
            for k, n in d.items():
                out[k] = out.get(k, 0) + n
        return out
    if isinstance(expr, Scale):
        d = iterate_domination(expr.child, f)
        if d is None:
            return None
        m = math.ceil(expr.k)
        return {k: m * n for k, n in d.items()}
    if isinstance(expr, Compose):
        a, b = iterate_domination(expr.outer, f), iterate_domination(expr.inner, f)
        if a is None or b is None:
            return None
        out = {}
        for ka, na in a.items():
            for kb, nb in b.items():
                out[ka + kb] = out.get(ka + kb, 0) + na * nb
        return out
    return None


# ---------------------------------------------------------------- exact PWL conversion

_PWL_CAP = 20000


def _pwl_from_samples(xs, f, tail_slope, at_inf, jump):
    pts = [(Fraction(0), Fraction(0))]
    if jump:
        pts.append((Fraction(0), jump))
    for x in xs:
        if x > 0:
            pts.append((x, f(x)))
    # drop collinear interior points so outputs stay small
    out = [pts[0]]
    for p in pts[1:]:
        if len(out) >= 2 and out[-1][0] > out[-2][0] and p[0] > out[-1][0]:
            (x0, y0), (x1, y1) = out[-2], out[-1]
            if (y1 - y0) * (p[0] - x1) == (p[1] - y1) * (x1 - x0):
                out[-1] = p
                continue
        out.append(p)
    return PWL(out, at_inf=at_inf, tail_slope=tail_slope)


def _finite_pwl(p):
    return p is not None and all(y != INF for y in p.ys) and p.at_inf == (
        INF if p.tail_slope > 0 else p.ys[-1])


def _jump(p: PWL):
    return p.ys[1] if len(p.xs) > 1 and p.xs[1] == 0 else Fraction(0)


def _tail_line(p: PWL):
    return p.xs[-1], p.ys[-1], p.tail_slope


def as_pwl(f):
    """Exact PWL form of ``f`` when it is built from PWL-convertible pieces, else None."""
    if isinstance(f, PWL):
        return f
    if isinstance(f, Power):
        if f.p == 1:
            return PWL([(0, 0)], tail_slope=f.c)
        if f.p == 0:
            return PWL([(0, 0), (0, f.c)])
        return None
    if isinstance(f, Const):
        if f.c == INF:
            return None
        return PWL([(0, 0)]) if f.c == 0 else PWL([(0, 0), (0, f.c)])
    if isinstance(f, Scale):
        p = as_pwl(f.child)
        if not _finite_pwl(p):
            return None
        return PWL([(x, f.k * y) for x, y in p.points], tail_slope=f.k * p.tail_slope)
    if isinstance(f, (Sum, Min)):
        ps = [as_pwl(c) for c in f.items]
        if not all(_finite_pwl(p) for p in ps):
            return None
        return _combine(ps, type(f).__name__)
    if isinstance(f, Compose):
        po, pi = as_pwl(f.outer), as_pwl(f.inner)
        if not (_finite_pwl(po) and _finite_pwl(pi)):
            return None
        return _compose_pwl(po, pi)
    if isinstance(f, Iterate):
        p = as_pwl(f.child)
        if not _finite_pwl(p):
            return None
        acc = p
        for _ in range(f.n - 1):
            acc = _compose_pwl(p, acc)
            if acc is None:
                return None
        return acc
    if isinstance(f, Series):
        p = as_pwl(f.child)
        if not _finite_pwl(p):
            return None
        terms, acc = [], p
        for i, w in enumerate(f.weights):
            if i:
                acc = _compose_pwl(p, acc)
                if acc is None:
                    return None
            terms.append(PWL([(x, w * y) for x, y in acc.points], tail_slope=w * acc.tail_slope))
        return _combine(terms, "Sum")
    return None


def _combine(ps, op):
    xs = sorted({x for p in ps for x in p.xs if x > 0})
    if op in ("Min", "Max"):
        pick = min if op == "Min" else max
        # insert crossing points of every pair on every interval and in the tail
        grid = [Fraction(0)] + xs
        extra = set()
        for a in range(len(ps)):
            for b in range(a + 1, len(ps)):
                fa, fb = ps[a], ps[b]
                for lo, hi in zip(grid, grid[1:]):
                    da0 = fa.eval(lo) - fb.eval(lo) if lo > 0 else _jump(fa) - _jump(fb)
                    da1 = fa.eval(hi) - fb.eval(hi)
                    if da0 * da1 < 0:
                        extra.add(lo + (hi - lo) * da0 / (da0 - da1))
                X = grid[-1]
                ya, yb = (fa.eval(X), fb.eval(X)) if X > 0 else (_jump(fa), _jump(fb))
                sa, sb = fa.tail_slope, fb.tail_slope
                if sa != sb:
                    cross = X + (yb - ya) / (sa - sb)
                    if cross > X:
                        extra.add(cross)
        xs = sorted(set(xs) | extra)
        jump = pick(_jump(p) for p in ps)
        last = xs[-1] if xs else None
        if last is None:
            tail = pick(p.tail_slope for p in ps)
        else:
            vals = [p.eval(last) for p in ps]
            best = pick(vals)
            tail = pick(p.tail_slope for p, v in zip(ps, vals) if v == best)
        if len(xs) > _PWL_CAP:
            return None
        fn = (lambda x: pick(p.eval(x) for p in ps))
        at_inf = INF if tail > 0 else None
        return _pwl_from_samples(xs, fn, tail, at_inf, jump)
    if len(xs) > _PWL_CAP:
        return None
    tail = sum((p.tail_slope for p in ps), Fraction(0))
    jump = sum((_jump(p) for p in ps), Fraction(0))
    fn = (lambda x: sum((p.eval(x) for p in ps), Fraction(0)))
    return _pwl_from_samples(xs, fn, tail, None, jump)


def _compose_pwl(po: PWL, pi: PWL):
    cands = {x for x in pi.xs if x > 0}
    targets = [x for x in po.xs if x > 0]
    pts = [(x, y) for x, y in pi.points if x > 0]
    # segments of the inner function, including the tail as a ray
    segs = []
    prev = (Fraction(0), _jump(pi))
    for x, y in pts:
        segs.append((prev, (x, y)))
        prev = (x, y)
    for (x0, y0), (x1, y1) in segs:
        for T in targets:
            if y0 < T < y1:
                cands.add(x0 + (x1 - x0) * (T - y0) / (y1 - y0))
    X, Y, s = _tail_line(pi)
    if s > 0:
        for T in targets:
            if T > Y:
                cands.add(X + (T - Y) / s)
    if len(cands) > _PWL_CAP:
        return None
    xs = sorted(cands)
    inner0 = _jump(pi)
    first_slope = (pi.ys[1] / pi.xs[1]) if (len(pi.xs) > 1 and pi.xs[1] > 0) else pi.tail_slope
    if inner0 > 0:
        jump = po.eval(inner0)
    elif first_slope > 0:
        jump = _jump(po)
    else:
        jump = Fraction(0)
    tail = po.tail_slope * s if s > 0 else Fraction(0)
    return _pwl_from_samples(xs, lambda x: po.eval(pi.eval(x)), tail, None, jump)


# ---------------------------------------------------------------- class checks

CLASSES = ("Increasing", "ISOD", "ICOD", "ICOD0", "ICODbdd", "ICODfin")


@dataclass(frozen=True)
class ClassCheck:
    status: str            # Holds | FailsAt | NumericOnly
    at: tuple = ()

    @property
    def ok(self) -> bool:
        return self.status != "FailsAt"

    def __str__(self):
        if self.status == "FailsAt":
            return "FailsAt(" + ", ".join(rat_str(a) for a in self.at) + ")"
        return self.status

    def to_json(self):
        d = {"status": self.status}
        if self.at:
            d["at"] = [rat_str(a) for a in self.at]
        return d


HOLDS = ClassCheck("Holds")
NUMERIC_ONLY = ClassCheck("NumericOnly")


def _fails(*at):
    return ClassCheck("FailsAt", tuple(at))


def _pwl_increasing(p: PWL):
    return HOLDS  # enforced by the constructor


def _pwl_isod(p: PWL):
    pos = [(x, y) for x, y in p.points if x > 0]
    if any(y == INF for _, y in pos):
        if pos and pos[0][1] == INF or (_jump(p) == INF):
            return HOLDS
        bad = next(x for x, y in pos if y == INF)
        return _fails(bad)
    prev = INF
    prev_x = Fraction(0)
    for x, y in pos:
        r = y / x
        if r > prev:
            return _fails(prev_x, x)
        prev, prev_x = r, x
    if pos and p.tail_slope > pos[-1][1] / pos[-1][0]:
        return _fails(pos[-1][0])
    return HOLDS


def _pwl_icod(p: PWL):
    if p.at_inf != (INF if p.tail_slope > 0 else p.ys[-1]):
        return _fails(INF)
    pos = [(x, y) for x, y in p.points if x > 0]
    if any(y == INF for _, y in pos):
        return HOLDS if (_jump(p) == INF or pos[0][1] == INF) else _fails(
            next(x for x, y in pos if y == INF))
    prev_s = INF
    start = (Fraction(0), _jump(p))
    for x, y in pos:
        s = (y - start[1]) / (x - start[0])
        if s > prev_s:
            return _fails(start[0])
        prev_s, start = s, (x, y)
    if p.tail_slope > prev_s:
        return _fails(start[0])
    return HOLDS


_GRID_CACHE = {}


def probe_grid(lo=1e-30, hi=1e30, per_decade=512) -> np.ndarray:
    """Geometric probe grid with ``per_decade`` points per factor of ten."""
    key = (lo, hi, per_decade)
    if key not in _GRID_CACHE:
        n = int(round(math.log10(hi / lo) * per_decade)) + 1
        _GRID_CACHE[key] = np.geomspace(lo, hi, n)
    return _GRID_CACHE[key]


def _numeric_check(f, cls, rtol=1e-9):
    xs = probe_grid()
    ys = f.eval_array(xs)
    if np.any(np.isnan(ys)) or np.any(ys < 0):
        return _fails(float(xs[np.argmax(np.isnan(ys) | (ys < 0))]))
    dy = np.diff(ys)
    bad = np.nonzero(dy < -rtol * np.abs(ys[1:]))[0]
    if bad.size:
        i = int(bad[0])
        return _fails(float(xs[i]), float(xs[i + 1]))
    if cls in ("ISOD",):
        r = ys / xs
        bad = np.nonzero(np.diff(r) > rtol * np.abs(r[:-1]))[0]
        if bad.size:
            i = int(bad[0])
            return _fails(float(xs[i]), float(xs[i + 1]))
    if cls.startswith("ICOD"):
        finite = np.isfinite(ys)
        if finite.any() and not finite.all():
            i = int(np.argmin(finite))
            if i > 0:
                return _fails(float(xs[i - 1]), float(xs[i]))
        if finite.all():
            s = dy / np.diff(xs)
            bad = np.nonzero(np.diff(s) > rtol * np.abs(s[:-1]) + 1e-300)[0]
            if bad.size:
                i = int(bad[0])
                return _fails(float(xs[i]), float(xs[i + 2]))
    return NUMERIC_ONLY


def _logpwl_icod(f: LogPWL):
    sl = f.ln_slopes()
    for i in range(1, len(sl)):
        if sl[i] > sl[i - 1]:
            return _fails(float(_num.exp(f._lxs[i])))
    return HOLDS


def _structural(f, cls):
    """Closure rules: sums, compositions, mins, scalings and series of members.

    ISOD is also closed under max and the T-transform.  Returns True only when
    every leaf passes an exact check.
    """
    if (type(f) in (Sum, Min, Compose, Scale, Iterate, Series)) or (
            cls in ("ISOD", "Increasing") and isinstance(f, (Max, TTransform))):
        return all(check_class(c, cls).status == "Holds" for c in f.children())
    return False


def check_class(f: ExtFun, cls: str) -> ClassCheck:
    """Decide membership of ``f`` in one of the function classes.

    Exact for PWL, Power, Const and expressions with an exact PWL form;
    other expressions are checked on the probe grid (result NumericOnly).
    """
    if cls not in CLASSES:
        raise ValueError(f"unknown class {cls!r}")
    if cls == "ICOD0":
        base = check_class(f, "ICOD")
        if not base.ok:
            return base
        g = f.germ0
        if g.kind in (ZERO, POWER_LIKE):
            return base
        if g.kind in (POSITIVE_LIMIT, INFINITE):
            return _fails(0)
        return NUMERIC_ONLY if f.loglog(-1e4) < f.loglog(-10.0) else _fails(0)
    if cls in ("ICODbdd", "ICODfin"):
        base = check_class(f, "ICOD")
        if not base.ok:
            return base
        probe = f.eval(INF) if cls == "ICODbdd" else f.eval(Fraction(1))
        if probe == INF:
            return _fails(INF if cls == "ICODbdd" else 1)
        return base
    if isinstance(f, Power):
        if cls == "Increasing" or f.p <= 1:
            return HOLDS
        return _fails(0, 1) if cls == "ISOD" else _fails(0)
    if isinstance(f, Const):
        return HOLDS
    if isinstance(f, LogPWL):
        if cls == "Increasing":
            return HOLDS
        if cls == "ICOD":
            return _logpwl_icod(f)
        # concave with f(0) = 0 implies slope-to-origin decreasing
        return _logpwl_icod(f)
    if _structural(f, cls):
        return HOLDS
    p = as_pwl(f)
    if p is not None:
        if cls == "Increasing":
            return _pwl_increasing(p)
        return _pwl_isod(p) if cls == "ISOD" else _pwl_icod(p)
    return _numeric_check(f, cls)


# ---------------------------------------------------------------- germs on demand

_SAMPLE_T = (-10.0, -100.0, -1000.0, -1e4)


def germ_at(f: ExtFun, endpoint=AT_ZERO) -> Germ:
    """Germ at an endpoint; numeric germs carry (ln x, ln f) probe samples."""
    g = f.germ(endpoint)
    if g.kind != SLOWLY_VARYING:
        return g
    ts = _SAMPLE_T if endpoint == AT_ZERO else tuple(-t for t in _SAMPLE_T)
    return Germ(SLOWLY_VARYING, endpoint, samples=tuple((t, f.loglog(t)) for t in ts))


def germ_soundness(f: ExtFun, endpoint=AT_ZERO, depth=1e-30, rtol=0.01):
    """Compare the germ prediction with a log-coordinate probe.

    Returns (ok, predicted_ln, measured_ln); SV germs are vacuously ok.
    """
    g = f.germ(endpoint)
    t = math.log(depth) if endpoint == AT_ZERO else -math.log(depth)
    if not g.exact:
        return True, None, None
    pred, got = g.predicted_log(t), f.loglog(t)
    if pred == got:
        return True, pred, got
    if math.isinf(float(pred)) or math.isinf(float(got)):
        return False, pred, got
    return abs(math.expm1(float(got - pred))) <= rtol, pred, got


# ---------------------------------------------------------------- JSON

def from_json(d):
    if isinstance(d, ExtFun):
        return d
    k = d["kind"]
    if k == "power":
        return Power(d.get("c", "1"), d.get("p", "1"))
    if k == "const":
        return Const(d["c"], d.get("zero_at_zero", True))
    if k == "pwl":
        return PWL(d["points"], at_inf=d.get("at_inf"), tail_slope=d.get("tail_slope", 0))
    if k == "logpwl":
        return LogPWL(d["points"], resolved_logx=d.get("resolved_logx"))
    if k == "sum":
        return Sum([from_json(c) for c in d["children"]])
    if k == "min":
        return Min([from_json(c) for c in d["children"]])
    if k == "max":
        return Max([from_json(c) for c in d["children"]])
    if k == "scale":
        return Scale(d["k"], from_json(d["child"]))
    if k == "compose":
        return Compose(from_json(d["outer"]), from_json(d["inner"]))
    if k == "iterate":
        return Iterate(from_json(d["child"]), int(d["n"]))
    if k == "series":
        return Series(from_json(d["child"]), weights=d.get("weights"), depth=d.get("depth"),
                      weight_ratio=d.get("weight_ratio"))
    if k == "ttransform":
        return TTransform(from_json(d["child"]))
    if k == "identity":
        return identity()
    if k == "transform":
        from . import transforms
        return transforms.apply(d["op"], from_json(d["f"]))
    raise ValueError(f"unknown function kind {k!r}")


def to_json(f: ExtFun) -> dict:
    return f.to_json()


# ---------------------------------------------------------------- sampling

def sample_rows(f: ExtFun, xs):
    rows = []
    for x in xs:
        x = float(x)
        lx = _num.log(x)
        lf = f.loglog(lx) if x > 0 else NEG_INF
        rows.append((x, float(f.eval(x)), lx, lf))
    return rows


def sample_csv(f: ExtFun, xs) -> str:
    lines = ["x,f(x),ln_x,ln_f"]
    for x, v, lx, lf in sample_rows(f, xs):
        lines.append(",".join(_num.fmt(a) for a in (x, v, lx, lf)))
    return "\n".join(lines) + "\n"

"""Transforms of increasing functions: ISOD envelope, concave conjugates,
truncation, interpolation and the T-transform x -> x / f(x).

PWL inputs get exact rational answers.  For other inputs the concave
conjugate goes through a numeric Legendre engine (a geometric grid augmented
with the kink points of f, a lower envelope of lines to find the grid
minimiser, then golden-section refinement in log coordinates), and the double
conjugate is computed as the least concave majorant of f on the same kind of
grid, with tangent points refined so that bridging lines are exact.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import extfun as ef
from .errors import HypothesisViolation
from .extfun import INF, PWL, ExtFun, as_pwl, check_class, rat

__all__ = [
    "isod_envelope", "concave_conjugate", "double_conjugate", "truncate",
    "interpolate", "t_transform", "apply", "ConcaveConjugate",
]


def _require(f: ExtFun, cls: str, what: str):
    res = check_class(f, cls)
    if res.status == "FailsAt":
        raise HypothesisViolation(f"{what}: input is not {cls} ({res})")
    return res


# ---------------------------------------------------------------- envelope

def _pwl_envelope(p: PWL) -> PWL:
    jump = ef._jump(p)
    pos = [(x, y) for x, y in p.points if x > 0]
    if any(y == INF for _, y in pos):
        k = next(i for i, (_, y) in enumerate(pos) if y == INF)
        if k == 0:
            return p
        # f(t)/t jumps to infinity there, so the envelope continues along r*x
        fin = PWL([(0, 0)] + ([(0, jump)] if jump else []) + pos[:k])
        return _pwl_envelope_finite(fin, forced_tail=True)
    return _pwl_envelope_finite(p)


def _pwl_envelope_finite(p: PWL, forced_tail=None) -> PWL:
    jump = ef._jump(p)
    pos = [(x, y) for x, y in p.points if x > 0]
    cands = set(x for x, _ in pos)
    r = INF
    prev = (Fraction(0), jump)
    for x1, y1 in pos:
        x0, y0 = prev
        s = (y1 - y0) / (x1 - x0)
        if r != INF and r > s:
            t = (y0 - s * x0) / (r - s)
            if x0 < t < x1:
                cands.add(t)
        r = min(r, y1 / x1)
        prev = (x1, y1)
    if not pos:
        return p
    X, Y = prev
    s = p.tail_slope
    if forced_tail is None and r > s and Y - s * X >= 0:
        t = (Y - s * X) / (r - s)
        if t > X:
            cands.add(t)

    bps = [x for x, _ in pos]

    def env(x):
        best = p.eval(x) / x
        for b in bps:
            if b > x:
                break
            best = min(best, p.eval(b) / b)
        return x * best

    xs = sorted(cands)
    last = xs[-1]
    if forced_tail is None and Y - s * X >= 0 and p.eval(last) / last <= r:
        tail = s
    else:
        tail = r
    return ef._pwl_from_samples(xs, env, tail, None, jump)


class _GridEnvelope(ExtFun):
    """x * min(inf over probe-grid t <= x of f(t)/t, f(x)/x).

    Upper approximation of the envelope from the grid; exactly ISOD and below f.
    """

    kind = "envelope-grid"

    def __init__(self, child: ExtFun):
        self.child = child
        self._xs = ef.probe_grid()
        with np.errstate(divide="ignore", invalid="ignore"):
            r = child.eval_array(self._xs) / self._xs
        self._runmin = np.minimum.accumulate(r)
        self._finish()

    def children(self):
        return (self.child,)

    def _value(self, x, fx):
        i = int(np.searchsorted(self._xs, x, side="right")) - 1
        if i < 0:
            return fx
        return min(fx, x * float(self._runmin[i]))

    def _eval(self, x):
        if x == INF:
            if self._runmin[-1] > 0:
                return self.child.eval(INF)
            return self._value(1e30, float(self.child.eval(1e30)))
        return self._value(float(x), float(self.child.eval(x)))

    def _eval_array(self, xs):
        fx = self.child.eval_array(xs)
        idx = np.searchsorted(self._xs, xs, side="right") - 1
        lim = np.where(idx >= 0, xs * self._runmin[np.clip(idx, 0, None)], np.inf)
        with np.errstate(invalid="ignore"):
            return np.minimum(fx, lim)

    def _germ(self, endpoint):
        if endpoint == ef.AT_ZERO:
            return self.child.germ(endpoint)
        return ef._g(ef.SLOWLY_VARYING, endpoint)

    def to_json(self):
        return {"kind": "transform", "op": "envelope", "f": self.child.to_json()}


def isod_envelope(f: ExtFun) -> ExtFun:
    """Largest ISOD minorant x * inf_{0<t<=x} f(t)/t of an increasing f."""
    _require(f, "Increasing", "isod_envelope")
    p = as_pwl(f)
    if p is not None:
        if check_class(p, "ISOD").status == "Holds":
            return f
        return _pwl_envelope(p)
    if check_class(f, "ISOD").ok:
        return f
    return _GridEnvelope(f)


# ---------------------------------------------------------------- conjugates

class ConcaveConjugate:
    """f_*(x) = inf_{lam>0} (lam x - f(lam)); signed, so not an ExtFun.

    For PWL input it is min over the vertices (lam_i, y_i) of lam_i x - y_i,
    together with the limits lam -> 0 (value -f(0+)) and lam -> inf.
    """

    def __init__(self, f: ExtFun):
        self.f = f
        self.pwl = as_pwl(f)
        if self.pwl is not None:
            p = self.pwl
            self.pieces = [(Fraction(0), -ef._jump(p))] + [
                (x, -y) for x, y in p.points if x > 0 and y != INF]
            self.tail_slope = p.tail_slope
            X, Y = (p.xs[-1], p.ys[-1])
            self.tail_intercept = -(Y - p.tail_slope * X)
        else:
            self._engine = _LegendreEngine(f)

    @property
    def exact(self):
        return self.pwl is not None

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        if self.pwl is None:
            return float(self._engine.conj(np.array([float(x)]))[0])
        x = rat(x)
        if x < self.tail_slope:
            return -INF
        vals = [a * x + b for a, b in self.pieces]
        if self.tail_slope > 0 and x == self.tail_slope:
            vals.append(self.tail_intercept)
        return min(vals)

    def to_json(self):
        if self.pwl is None:
            return {"kind": "concave-conjugate", "numeric": True, "f": self.f.to_json()}
        return {"kind": "concave-conjugate", "domain_from": str(self.tail_slope),
                "affine_pieces": [[str(a), str(b)] for a, b in self.pieces]}


def concave_conjugate(f: ExtFun) -> ConcaveConjugate:
    return ConcaveConjugate(f)


def _upper_hull(points, tail_slope):
    """Least concave majorant vertices of the given points plus a ray of slope tail_slope."""
    hull = []
    for pt in points:
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            # drop hull[-1] if it lies on or below the chord hull[-2] -> pt
            if (y1 - y0) * (pt[0] - x0) <= (pt[1] - y0) * (x1 - x0):
                hull.pop()
            else:
                break
        hull.append(pt)
    while len(hull) >= 2:
        (x0, y0), (x1, y1) = hull[-2], hull[-1]
        if (y1 - y0) / (x1 - x0) <= tail_slope:
            hull.pop()
        else:
            break
    return hull


def _pwl_double_conjugate(p: PWL) -> PWL:
    jump = ef._jump(p)
    pts = [(Fraction(0), jump)] + [(x, y) for x, y in p.points if x > 0]
    hull = _upper_hull(pts, p.tail_slope)
    out = [(Fraction(0), Fraction(0))]
    if hull[0][1] > 0:
        out.append(hull[0])
    out.extend(hull[1:])
    return PWL(out, tail_slope=p.tail_slope)


class _LowerEnvelope:
    """Lower envelope of the lines y = slopes_j x + intercepts_j (convex hull trick)."""

    def __init__(self, slopes, intercepts):
        order = np.lexsort((intercepts, -slopes))  # slopes descending, lowest intercept first
        a, b = slopes[order], intercepts[order]
        keep_a, keep_b, keep_i = [], [], []
        for k in range(len(a)):
            if keep_a and a[k] == keep_a[-1]:
                continue
            while len(keep_a) >= 2:
                a1, b1, a2, b2 = keep_a[-2], keep_b[-2], keep_a[-1], keep_b[-1]
                # line 2 is useless if line k overtakes line 1 before line 2 does
                if (b[k] - b1) * (a1 - a2) <= (b2 - b1) * (a1 - a[k]):
                    keep_a.pop(); keep_b.pop(); keep_i.pop()
                else:
                    break
            keep_a.append(a[k]); keep_b.append(b[k]); keep_i.append(order[k])
        self.a, self.b = np.array(keep_a), np.array(keep_b)
        self.idx = np.array(keep_i)
        self.cross = (self.b[1:] - self.b[:-1]) / (self.a[:-1] - self.a[1:])

    def query(self, xs):
        """Envelope values and the original indices of the minimising line and its neighbours."""
        pos = np.searchsorted(self.cross, xs)
        ki, last = self.idx, len(self.idx) - 1
        near = (ki[np.clip(pos - 1, 0, None)], ki[pos], ki[np.clip(pos + 1, None, last)])
        return self.a[pos] * xs + self.b[pos], near


_PHI = (math.sqrt(5) - 1) / 2


def _golden(obj, lo, hi, iters=60):
    """Vectorised golden-section minimisation of obj over [lo, hi] (arrays).

    Returns the smallest objective value seen, an upper bound of the minimum.
    """
    best = np.minimum(obj(lo), obj(hi))
    for _ in range(iters):
        c = hi - _PHI * (hi - lo)
        d = lo + _PHI * (hi - lo)
        fc, fd = obj(c), obj(d)
        best = np.minimum(best, np.minimum(fc, fd))
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
    return best


class _LegendreEngine:
    """Numeric concave conjugate of an increasing f on a log grid of [1e-70, 1e70]."""

    def __init__(self, f: ExtFun, per_decade=64, span=70):
        self.f = f
        grid = np.geomspace(10.0 ** -span, 10.0 ** span, 2 * span * per_decade + 1)
        self.mu = np.unique(np.concatenate([grid, [k for k in kink_points(f) if grid[0] < k < grid[-1]]]))
        self.lmu = np.log(self.mu)
        self.fmu = f.eval_array(self.mu)
        self._mu_env = _LowerEnvelope(self.mu, -self.fmu)

    def conj(self, lam):
        """f_*(lam) = inf_mu (lam mu - f(mu)), refined around the grid minimiser."""
        lam = np.asarray(lam, dtype=float)
        vals, near = self._mu_env.query(lam)
        obj = lambda lm, lam=lam: lam * np.exp(lm) - self.f.eval_array(np.exp(lm))
        vals = np.minimum(vals, self._refine(obj, near[1]))
        # neighbouring hull vertices cover the competing basin near a kink
        for idx in (near[0], near[2]):
            lo = np.clip(idx - 1, 0, None)
            hi = np.clip(idx + 1, None, len(self.mu) - 1)
            # a bracket can only help if its best conceivable value beats vals
            m = lam * self.mu[lo] - self.fmu[hi] < vals
            if m.any():
                sub = lambda lm, lam=lam[m]: lam * np.exp(lm) - self.f.eval_array(np.exp(lm))
                vals[m] = np.minimum(vals[m], self._refine(sub, idx[m]))
        return vals

    def _refine(self, obj, idx):
        lo = self.lmu[np.clip(idx - 1, 0, None)]
        hi = self.lmu[np.clip(idx + 1, None, len(self.mu) - 1)]
        return _golden(obj, lo, hi, iters=26)


# ---------------------------------------------------------------- kinks and hulls

_KINK_LO, _KINK_HI = 1e-70, 1e70


def _crossings(d, xs):
    """Roots of an increasing-argument difference d(x) located by sign changes on xs."""
    v = d(xs)
    sign = np.sign(v)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    out = []
    for i in idx:
        g = lambda t: float(d(np.array([math.exp(t)]))[0])
        lo, hi = math.log(xs[i]), math.log(xs[i + 1])
        try:
            out.append(math.exp(brentq(g, lo, hi, xtol=1e-15, rtol=1e-15)))
        except ValueError:
            continue
    return out


def _preimages(inner: ExtFun, levels, xs):
    """Points x with inner(x) = level for each level (inner increasing)."""
    if not levels:
        return []
    iv = inner.eval_array(xs)
    out = []
    for k in levels:
        out.extend(_crossings(lambda x, k=k: inner.eval_array(x) - k, xs) if
                   np.any(iv < k) and np.any(iv > k) else [])
    return out


def kink_points(f: ExtFun, xs=None, depth: int = 0) -> list:
    """Candidate non-smooth points of f in (1e-70, 1e70).

    Breakpoints of PWL nodes, crossings of Min/Max children and their images
    through compositions.  Sampling-based (crossings between adjacent sample
    points are found, tangential touches are not), so this is a refinement
    aid rather than a proof.
    """
    if xs is None:
        xs = np.geomspace(_KINK_LO, _KINK_HI, 140 * 16 + 1)
    if depth > 40:
        return []
    rec = lambda g: kink_points(g, xs, depth + 1)
    if isinstance(f, PWL):
        return [float(x) for x in f.xs if 0 < x < INF]
    if isinstance(f, ef.LogPWL):
        return [math.exp(float(t)) for t, _ in f.lpoints if -160 < float(t) < 160]
    if isinstance(f, (ef.Sum, ef.Scale, ef.TTransform)):
        return [k for c in f.children() for k in rec(c)]
    if isinstance(f, ef.Min):
        out = [k for c in f.items for k in rec(c)]
        for i, a in enumerate(f.items):
            for b in f.items[i + 1:]:
                out += _crossings(lambda x, a=a, b=b: a.eval_array(x) - b.eval_array(x), xs)
        return out
    if isinstance(f, ef.Compose):
        return rec(f.inner) + _preimages(f.inner, rec(f.outer), xs)
    if isinstance(f, (ef.Iterate, ef.Series)):
        n = f.n if isinstance(f, ef.Iterate) else f.depth
        if n > 30:
            return []
        base = rec(f.child)
        out, inner = list(base), None
        for _ in range(1, n):
            inner = f.child if inner is None else ef.Compose(f.child, inner)
            out += _preimages(inner, base, xs)
        return out
    return []


class _ConcaveHull:
    """Least concave majorant of an increasing f, from samples plus kink points.

    Hull edges over which f stays on the hull are evaluated with f itself;
    bridging edges are lines whose smooth endpoints are refined to the exact
    tangency by bounded scalar minimisation.
    """

    def __init__(self, f: ExtFun, per_decade=64):
        self.f = f
        grid = np.geomspace(_KINK_LO, _KINK_HI, 140 * per_decade + 1)
        kinks = np.array(sorted({k for k in kink_points(f) if _KINK_LO < k < _KINK_HI}))
        xs = np.unique(np.concatenate([grid, kinks]))
        ys = f.eval_array(xs)
        if not np.all(np.isfinite(ys)):
            raise HypothesisViolation("double_conjugate: f must be finite on (0, inf)")
        g0 = f.germ0
        y0 = float(g0.c) if g0.kind == ef.POSITIVE_LIMIT else 0.0
        xs, ys = np.concatenate([[0.0], xs]), np.concatenate([[y0], ys])
        is_kink = np.isin(xs, kinks)
        is_kink[0] = True
        hull = []
        for i in range(len(xs)):
            while len(hull) >= 2:
                a, b = hull[-2], hull[-1]
                if (ys[b] - ys[a]) * (xs[i] - xs[b]) <= (ys[i] - ys[b]) * (xs[b] - xs[a]):
                    hull.pop()
                else:
                    break
            hull.append(i)
        edges = []
        for a, b in zip(hull, hull[1:]):
            bridge = False
            if b > a + 1:
                line = ys[a] + (ys[b] - ys[a]) * (xs[a + 1:b] - xs[a]) / (xs[b] - xs[a])
                bridge = bool(np.any(line - ys[a + 1:b] > 1e-12 * np.abs(line)))
            edges.append(bridge)
        vx = xs[hull].copy()
        for _ in range(3):
            for k, i in enumerate(hull):
                if is_kink[i] or k == len(hull) - 1:
                    continue
                left = edges[k - 1] if k > 0 else False
                right = edges[k]
                if left == right:
                    continue
                lo, hi = xs[max(i - 1, 1)], xs[min(i + 1, len(xs) - 1)]
                fv = lambda x: float(f.eval(float(x)))
                if right:
                    R = vx[k + 1]
                    fR = fv(R)
                    obj = lambda a: (fR - fv(a)) / (R - a)
                else:
                    L = vx[k - 1]
                    fL = fv(L)
                    obj = lambda b: -(fv(b) - fL) / (b - L)
                res = minimize_scalar(obj, bounds=(lo, min(hi, np.nextafter(vx[k + 1], 0)) if right
                                                   else (max(lo, np.nextafter(vx[k - 1], np.inf)), hi)),
                                      method="bounded", options={"xatol": 1e-15 * hi})
                if obj(res.x) <= obj(vx[k]):
                    vx[k] = res.x
        self.vx = vx
        self.vy = np.array([y0] + [float(f.eval(float(x))) for x in vx[1:]])
        self.bridge = np.array(edges, dtype=bool)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        fx = self.f.eval_array(x)
        k = np.clip(np.searchsorted(self.vx, x, side="right") - 1, 0, len(self.bridge) - 1)
        inside = x <= self.vx[-1]
        br = self.bridge[k] & inside
        out = fx.copy()
        if br.any():
            kb = k[br]
            x0, x1, y0, y1 = self.vx[kb], self.vx[kb + 1], self.vy[kb], self.vy[kb + 1]
            line = y0 + (y1 - y0) * (x[br] - x0) / (x1 - x0)
            out[br] = np.maximum(line, fx[br])
        return out


class _NumericDoubleConjugate(ExtFun):
    kind = "double-conjugate-numeric"

    def __init__(self, child: ExtFun):
        self.child = child
        self._hull = _ConcaveHull(child)
        self._last = None
        self._finish()

    def children(self):
        return (self.child,)

    def _eval(self, x):
        if x == INF:
            v = self.child.eval(INF)
            return INF if v == INF else float(self._hull(np.array([_KINK_HI]))[0])
        return float(self._hull(np.array([float(x)]))[0])

    def _eval_array(self, xs):
        key = hash(xs.tobytes())
        if self._last is not None and self._last[0] == key:
            return self._last[1].copy()
        out = np.empty_like(xs)
        fin = np.isfinite(xs) & (xs > 0)
        out[fin] = self._hull(xs[fin])
        out[~fin] = [self._eval(INF) if np.isinf(v) else 0.0 for v in xs[~fin]]
        self._last = (key, out.copy())
        return out

    def _germ(self, endpoint):
        g = self.child.germ(endpoint)
        # the conjugate sandwich keeps power-laws but may change coefficients
        if g.kind in (ef.ZERO, ef.INFINITE):
            return g
        return ef._g(ef.SLOWLY_VARYING, endpoint)

    def to_json(self):
        return {"kind": "transform", "op": "double-conjugate", "f": self.child.to_json()}


def double_conjugate(f: ExtFun) -> ExtFun:
    """f_** re-extended by 0 at 0 and its limit at inf; ICOD with f <= f_** <= 2f for ISOD f."""
    if isinstance(f, ef.Const) and f.c == INF:
        return f
    if f.eval(Fraction(10) ** 30) == 0:
        raise HypothesisViolation("double_conjugate: f vanishes identically on (0, inf)")
    _require(f, "ISOD", "double_conjugate")
    p = as_pwl(f)
    if p is not None:
        if any(y == INF for y in p.ys[1:]):
            raise HypothesisViolation("double_conjugate: f must be finite on (0, inf)")
        return _pwl_double_conjugate(p)
    return _NumericDoubleConjugate(f)


# ---------------------------------------------------------------- splices

def truncate(f: ExtFun) -> ExtFun:
    """min(f, f(1))."""
    c = f.eval(Fraction(1))
    if f.eval(INF) <= c:
        return f
    out = ef.Min([f, ef.Const(rat(c))])
    p = as_pwl(out)
    return p if p is not None else out


def interpolate(f: ExtFun) -> ExtFun:
    """f on [0, 1] and f(1) x after; for ISOD f this is max(f, f(1) x)."""
    _require(f, "ISOD", "interpolate")
    c = rat(f.eval(Fraction(1)))
    if c == INF:
        raise HypothesisViolation("interpolate: f(1) must be finite")
    out = ef.Max([f, ef.Power(c, 1)]) if c > 0 else f
    p = as_pwl(out)
    return p if p is not None else out


def t_transform(f: ExtFun) -> ExtFun:
    """(Tf)(x) = x / f(x); 0 where f vanishes and inf at inf."""
    _require(f, "ISOD", "t_transform")
    return ef.TTransform(f)


_OPS = {
    "envelope": isod_envelope,
    "isod-envelope": isod_envelope,
    "double-conjugate": double_conjugate,
    "truncate": truncate,
    "interpolate": interpolate,
    "t-transform": t_transform,
}


def apply(op: str, f: ExtFun):
    if op == "conjugate":
        return concave_conjugate(f)
    try:
        return _OPS[op](f)
    except KeyError:
        raise ValueError(f"unknown transform {op!r}") from None

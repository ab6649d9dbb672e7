"""Finite prefixes of ascending chains, descending chains and antichains.

Ascending steps replace f by the series sum_n 2^-n f^(n); descending chains
apply x -> x / f(x) to an ascending one.  The antichain construction builds a
concave zig-zag g out of affine pieces chosen so that g beats every iterate
of the given functions at some points x_n and loses to them at points z_n.
Its breakpoints shrink doubly exponentially, so the whole search runs on
ln x and ln y.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import _num
from . import extfun as ef
from .errors import HypothesisViolation, SearchBudgetExceeded

LN2 = math.log(2.0)
HALVING_CAP = 100_000

__all__ = ["ascend", "descend", "limit_step", "AffineLine", "ZigZagTranscript",
           "antichain_extend", "check_transcript"]


# ---------------------------------------------------------------- ascending / descending

def _probe_ts():
    return [-(10.0 ** (k / 4)) for k in range(0, 17)]


def check_seed(f0: ef.ExtFun):
    """Hypotheses for a chain seed: ICOD, x < f0 < 1 on (0, 1), f0(0+) = 0."""
    chk = ef.check_class(f0, "ICOD")
    if chk.status == "FailsAt":
        raise HypothesisViolation(f"seed is not ICOD (fails near {chk.at})")
    if f0.germ0.kind in (ef.POSITIVE_LIMIT, ef.INFINITE):
        raise HypothesisViolation("seed must tend to 0 at 0")
    for t in _probe_ts():
        if t == 0:
            continue
        v = f0.loglog(t)
        if not (t < v < 0):
            raise HypothesisViolation(f"need x < f0(x) < 1 on (0, 1), fails at ln x = {t}")
    # iterates must separate: f0^(2) / f0 grows toward 0
    r = [f0.loglog(f0.loglog(t)) - f0.loglog(t) for t in (-10.0, -100.0, -1000.0)]
    if not (r[0] < r[1] < r[2]):
        raise HypothesisViolation("iterates of the seed do not separate on the probes")


def ascend(f0: ef.ExtFun | None = None, steps: int = 4, depth: int = 24, check: bool = True):
    """[f_0, ..., f_steps] with f_{k+1} = sum_{n<=depth} 2^-n f_k^(n).

    Iterates of a seed that is 1 after 1 stay 1 there, so every f_k is
    constant after 1; the dropped tail of each series is at most 2^-depth.
    """
    f0 = ef.sqrt_capped() if f0 is None else f0
    if steps < 0 or depth < 1:
        raise ValueError("steps >= 0 and depth >= 1 are required")
    if check:
        check_seed(f0)
    chain = [f0]
    for _ in range(steps):
        chain.append(ef.Series(chain[-1], depth=depth, weight_ratio=Fraction(1, 2)))
    for f in chain[1:]:
        f.truncation_error = Fraction(1, 2 ** depth)
    return chain


def limit_step(members, weights=None):
    """Weighted sum of already built chain members standing in for a limit stage."""
    members = list(members)
    if not members:
        raise ValueError("a limit step needs members")
    weights = weights or [Fraction(1, 2 ** (i + 1)) for i in range(len(members))]
    return ef.add(*[ef.scale(w, f) for w, f in zip(weights, members)])


def descend(chain):
    """Elementwise x / f(x); reverses the order of an ascending chain."""
    out = []
    for f in chain:
        if f.germ0.kind in (ef.POSITIVE_LIMIT, ef.INFINITE):
            raise HypothesisViolation("chain members must tend to 0 at 0")
        # members must stay above half of sqrt(x) near 0 (probed)
        for t in _probe_ts()[1:]:
            if f.loglog(t) < t / 2 - LN2:
                raise HypothesisViolation(f"member falls below sqrt(x)/2 at ln x = {t}")
        out.append(ef.TTransform(f))
    return out


# ---------------------------------------------------------------- affine lines

@dataclass(frozen=True)
class AffineLine:
    """l[x, y, b](t) = (y - b) t / x + b, stored through ln x, ln y, ln b."""

    ln_x: object
    ln_y: object
    ln_b: object

    def __post_init__(self):
        if self.ln_b > self.ln_y:
            raise ValueError("affine lines need y >= b")

    @classmethod
    def exact(cls, x, y, b):
        x, y, b = Fraction(x), Fraction(y), Fraction(b)
        if min(x, y, b) <= 0:
            raise ValueError("x, y, b must be positive")
        return cls(_num.log(x), _num.log(y), _num.log(b))

    @property
    def ln_slope(self):
        if self.ln_y == self.ln_b:
            return _num.NEG_INF
        return _num.log_sub(self.ln_y, self.ln_b) - self.ln_x

    def loglog(self, t):
        """ln l(e^t)."""
        s = self.ln_slope
        if s == _num.NEG_INF:
            return self.ln_b
        return _num.logaddexp(s + t, self.ln_b)

    def iterate_loglog(self, t, n):
        for _ in range(n):
            t = self.loglog(t)
        return t

    def value(self, t: Fraction):
        """Exact value when the parameters are representable as floats."""
        x, y, b = (Fraction(_num.exp(v)) for v in (self.ln_x, self.ln_y, self.ln_b))
        return (y - b) / x * Fraction(t) + b

    def to_json(self):
        return {"ln_x": _num.fmt(self.ln_x), "ln_y": _num.fmt(self.ln_y), "ln_b": _num.fmt(self.ln_b)}


# ---------------------------------------------------------------- antichain

@dataclass
class Stage:
    n: int
    ln_x: object
    ln_y: object
    ln_z: object
    ln_b: object
    ln_ratio1: object     # min over k of ln l_{n-1}(x_n) / f_k^(n)(x_n)
    ln_ratio2: object     # min over k of ln f_k(z_n) / l_n^(n)(z_n)
    halvings: int = 0

    def to_json(self):
        d = {k: (_num.fmt(v) if k not in ("n", "halvings") else v) for k, v in self.__dict__.items()}
        return d


@dataclass
class ZigZagTranscript:
    stages: list
    closing: dict
    threshold: list
    functions: list
    result: ef.ExtFun | None = None
    rescaled: list = field(default_factory=list)

    def witness_points(self):
        """ln x_n (where g wins), ln z_n (where the family wins) and the closing x."""
        xs = [s.ln_x for s in self.stages] + [self.closing["ln_x"]]
        zs = [s.ln_z for s in self.stages]
        return xs, zs

    def to_json(self):
        return {"stages": [s.to_json() for s in self.stages],
                "closing": {k: _num.fmt(v) for k, v in self.closing.items()},
                "threshold": [str(t) for t in self.threshold],
                "functions": [f.to_json() for f in self.functions],
                "rescaled": self.rescaled,
                "result": self.result.to_json() if self.result is not None else None}

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, d: dict) -> "ZigZagTranscript":
        """Rebuild a transcript (and g) from its JSON without re-running any search."""
        stages = []
        for s in d["stages"]:
            kw = {k: (v if k in ("n", "halvings") else _num.parse_real(v)) for k, v in s.items()}
            stages.append(Stage(**kw))
        closing = {k: _num.parse_real(v) for k, v in d["closing"].items()}
        thresholds = [float(t) for t in d["threshold"]]
        res = ef.from_json(d["result"]) if d.get("result") else None
        return cls(stages, closing, thresholds, [ef.from_json(f) for f in d["functions"]], res,
                   list(d.get("rescaled", [])))


def _normalize(F):
    out, notes = [], []
    for f in F:
        v = f.eval(Fraction(1))
        if v in (0, ef.INF):
            raise HypothesisViolation("f(1) must be positive and finite")
        if v != 1:
            out.append(ef.scale(1 / ef.rat(v), f))
            notes.append(f"rescaled by 1/{ef.rat_str(v)}")
        else:
            out.append(f)
            notes.append("unchanged")
    return out, notes


def _check_family(F):
    from . import poset  # local import: poset does not depend on chains
    for f in F:
        chk = ef.check_class(f, "ICOD0")
        if chk.status == "FailsAt":
            raise HypothesisViolation("antichain generators must be ICOD and vanish at 0")
        v = poset.contains_single(f, ef.identity(), deep=False)
        if v.relation != poset.NOT_CONTAINED:
            raise HypothesisViolation("antichain generators must not lie in the algebra of x")


def _iter(f, t, n):
    for _ in range(n):
        t = f.loglog(t)
    return t


def antichain_extend(F, stages: int = 6, ratio_floor: float = 1e6, check: bool = True,
                     halving_cap: int = HALVING_CAP) -> ZigZagTranscript:
    """Stage-n searches for (x_n, y_n, z_n, b_n) and assembly of the zig-zag g.

    The ratio needed at stage n is max(n, ratio_floor), so every recorded
    witness also clears the containment threshold.  After the last stage one
    more x is chosen and g closes with a chord to the origin.
    """
    F = list(F)
    if not F or stages < 1:
        raise ValueError("need a nonempty family and stages >= 1")
    F, notes = _normalize(F)
    if check:
        _check_family(F)
    zero = 0.0
    line = AffineLine(zero, zero, zero)  # x0 = y0 = b0 = 1: the constant 1
    ln_z_prev, ln_b_prev = math.log(0.9), zero
    recs, thresholds = [], []

    def line_wins_search(n, line, ln_z_prev, thr):
        members = F[: min(n, len(F))]
        lx = min(ln_z_prev, -n * LN2) - LN2
        count = 0
        while True:
            lv = line.loglog(lx)
            r = min(lv - _iter(f, lx, n) for f in members)
            if r > thr:
                return lx, lv, r, count
            lx, count = 2 * lx, count + 1
            if count > halving_cap:
                raise SearchBudgetExceeded(f"stage {n}: no x found within {halving_cap} halvings")

    for n in range(1, stages + 1):
        k = max(n, ratio_floor)
        thr = math.log(k)
        thresholds.append(k)
        lx, ly, r1, c1 = line_wins_search(n, line, ln_z_prev, thr)
        members = F[: min(n, len(F))]
        count = c1
        lz = lx - LN2
        found = None
        while found is None:
            lb = min(ln_b_prev, ly) - LN2
            fz = [f.loglog(lz) for f in members]
            prev_r = None
            while True:
                cand = AffineLine(lx, ly, lb)
                lo = cand.iterate_loglog(lz, n)
                r2 = min(v - lo for v in fz)
                if r2 > thr:
                    found = (lz, lb, r2, cand)
                    break
                count += 1
                if prev_r is not None and r2 - prev_r <= 1e-12 * max(1.0, abs(r2)):
                    break  # the intercept no longer matters; move z closer to 0
                prev_r = r2
                lb = 2 * lb if lb < 0 else lb - LN2
                if count > halving_cap:
                    raise SearchBudgetExceeded(f"stage {n}: no (z, b) found within {halving_cap} halvings")
            if found is None:
                lz = 2 * lz
        lz, lb, r2, line = found
        recs.append(Stage(n, lx, ly, lz, lb, r1, r2, count))
        ln_z_prev, ln_b_prev = lz, lb
    # closing point: one more line-wins search, then a chord to the origin
    n = stages + 1
    thr = math.log(max(n, ratio_floor))
    lx, ly, r1, _ = line_wins_search(n, line, ln_z_prev, thr)
    closing = {"ln_x": lx, "ln_y": ly, "ln_ratio1": r1}
    pts = [(lx, ly)] + [(s.ln_x, s.ln_y) for s in reversed(recs)]
    g = ef.LogPWL(pts, resolved_logx=lx)
    tr = ZigZagTranscript(recs, closing, thresholds + [max(n, ratio_floor)], F, g, notes)
    return tr


def check_transcript(tr: ZigZagTranscript) -> list:
    """Stage invariants recomputed from the transcript alone; returns failures.

    Checked per stage: the previous line beats every iterate at x_n (line wins),
    y_n lies on that line (continuity), x_n < z_{n-1} < x_{n-1} (ordering),
    b_n < y_n and b_n < b_{n-1} (intercepts), and every generator beats the
    n-th iterate of the new line at z_n (family wins).
    """
    bad = []
    line = AffineLine(0.0, 0.0, 0.0)
    ln_z_prev, ln_x_prev, ln_b_prev = math.log(0.9), 0.0, 0.0
    for s, k in zip(tr.stages, tr.threshold):
        n = s.n
        members = tr.functions[: min(n, len(tr.functions))]
        thr = math.log(k)
        r1 = min(line.loglog(s.ln_x) - _iter(f, s.ln_x, n) for f in members)
        if not r1 > thr:
            bad.append(f"line wins fails at stage {n}")
        if s.ln_y != line.loglog(s.ln_x):
            bad.append(f"continuity fails at stage {n}")
        if not (s.ln_x < ln_z_prev < ln_x_prev):
            bad.append(f"ordering fails at stage {n}")
        if not (s.ln_b < s.ln_y and s.ln_b < ln_b_prev):
            bad.append(f"intercepts fail at stage {n}")
        line = AffineLine(s.ln_x, s.ln_y, s.ln_b)
        r2 = min(f.loglog(s.ln_z) - line.iterate_loglog(s.ln_z, n) for f in members)
        if not r2 > thr:
            bad.append(f"family wins fails at stage {n}")
        if not s.ln_z < s.ln_x:
            bad.append(f"z_n < x_n fails at stage {n}")
        ln_z_prev, ln_x_prev, ln_b_prev = s.ln_z, s.ln_x, s.ln_b
    c = tr.closing
    if not c["ln_x"] < ln_z_prev:
        bad.append("closing point is not below the last z")
    if c["ln_y"] != line.loglog(c["ln_x"]):
        bad.append("closing value is off the last line")
    return bad

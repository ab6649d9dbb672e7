"""Containment queries between support expansion algebras generated by functions.

For nonzero ISOD generators f, g with f(0+) = 0, the algebra of f fails to sit
inside the algebra of g exactly when either

* f is linear at infinity while g is sublinear there, or
* for every iterate depth N, f(x) / g^(N)(x) is unbounded as x -> 0.

The first condition is read off the germs at infinity.  The second is decided
from germs when both germs at 0 are exact, by structural domination when g is
built from f, and otherwise by probing ln f - ln g^(N) along a sequence of
points whose ln x descends geometrically.  Functions built by iterating series
vary so slowly that their separation only shows at ln ln(1/x) of several
thousand, so a deep probe schedule (uniform in ln ln(1/x), with mpfr
arguments) is run whenever a germ at 0 is only numeric.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from fractions import Fraction

import gmpy2
import numpy as np

from . import _num
from . import extfun as ef
from .errors import HypothesisViolation

CONTAINED, NOT_CONTAINED, UNDETERMINED = "Contained", "NotContained", "Undetermined"
CERTIFIED, EMPIRICAL = "Certified", "Empirical"
SLOPE_AT_INFINITY, RATIO_BLOWUP = "SlopeAtInfinity", "RatioBlowupAtZero"

LN2 = math.log(2.0)
_M_CAP_LOG2 = 20          # grid certificates allow multipliers up to 2^20


@dataclass
class PosetOptions:
    n_max: int = 3
    probe_floor_logx: float = -1e4
    ratio_threshold: float = 1e6
    base_probes: int = 24
    # deep schedule: ln ln(1/x) runs from ln(-probe_floor_logx) to this value
    probe_floor_loglogx: float = 4e4
    deep_probes: int = 16
    deep: bool = True
    word_depth: int = 3
    extra_probe_logx: tuple = ()

    def __post_init__(self):
        if self.n_max < 1 or self.ratio_threshold <= 1 or self.probe_floor_logx >= 0:
            raise ValueError("n_max >= 1, ratio_threshold > 1 and a negative probe floor are required")

    def to_json(self):
        d = asdict(self)
        d["extra_probe_logx"] = [_num.fmt(t) for t in self.extra_probe_logx]
        return d


def _options(opts, kw) -> PosetOptions:
    if opts is None:
        return PosetOptions(**kw)
    if isinstance(opts, dict):
        return PosetOptions(**{**opts, **kw})
    if kw:
        return PosetOptions(**{**asdict(opts), **kw})
    return opts


@dataclass
class Verdict:
    relation: str
    certainty: str
    certificate: dict | None = None
    witness: dict | None = None
    notes: list = field(default_factory=list)
    options: dict | None = None
    f: dict | None = None
    g: dict | None = None

    def to_json(self) -> dict:
        return {"relation": self.relation, "certainty": self.certainty,
                "certificate": self.certificate, "witness": self.witness,
                "notes": list(self.notes), "options": self.options, "f": self.f, "g": self.g}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, d: dict) -> "Verdict":
        return cls(d["relation"], d["certainty"], d.get("certificate"), d.get("witness"),
                   list(d.get("notes", [])), d.get("options"), d.get("f"), d.get("g"))

    def __str__(self):
        return f"{self.relation} ({self.certainty})"


# ---------------------------------------------------------------- hypotheses and germs

def _check_generator(f: ef.ExtFun, role: str, need_vanishing: bool):
    chk = ef.check_class(f, "ISOD")
    if chk.status == "FailsAt":
        raise HypothesisViolation(f"{role} is not ISOD (fails near {chk.at})")
    if need_vanishing and f.germ0.kind in (ef.POSITIVE_LIMIT, ef.INFINITE):
        raise HypothesisViolation(f"{role} must tend to 0 at 0, germ is {f.germ0}")


def _is_zero(f: ef.ExtFun) -> bool:
    # increasing, so vanishing at infinity means vanishing everywhere
    return f.germinf.kind == ef.ZERO


def inf_class(f: ef.ExtFun, opts: PosetOptions | None = None):
    """('linear' | 'sublinear' | 'unknown', exact, samples) for lim f(x)/x at infinity."""
    g = f.germinf
    if g.kind in (ef.ZERO, ef.POSITIVE_LIMIT):
        return "sublinear", True, []
    if g.kind == ef.INFINITE:
        return "linear", True, []
    if g.kind == ef.POWER_LIKE:
        return ("linear" if g.p >= 1 else "sublinear"), True, []
    # numeric: f(x)/x is decreasing for ISOD f, look at its value far out
    opts = opts or PosetOptions()
    ts = [10.0 ** k for k in range(1, 5)]
    samples = [(t, f.loglog(t) - t) for t in ts]
    last = samples[-1][1]
    cut = -math.log(opts.ratio_threshold)
    if last < cut:
        return "sublinear", False, samples
    if abs(samples[-1][1] - samples[-2][1]) < 1e-6:
        return "linear", False, samples
    return "unknown", False, samples


def reduction_label(f: ef.ExtFun, opts=None) -> str:
    """Which reduction applies before a query: truncation (sublinear) or interpolation (linear)."""
    cls, _, _ = inf_class(f, opts)
    return {"sublinear": "truncate", "linear": "interpolate"}.get(cls, "none")


# ---------------------------------------------------------------- structural domination

def _same(f, g) -> bool:
    if f is g:
        return True
    try:
        return f.to_json() == g.to_json()
    except NotImplementedError:
        return False


def structural_bound(f: ef.ExtFun, g: ef.ExtFun, depth: int = 8):
    """A rational M with f <= M g everywhere, read off the expression trees, or None."""
    if depth <= 0:
        return None
    if _same(f, g):
        return Fraction(1)
    d = depth - 1
    cands = []
    tf, tg = type(f), type(g)
    if tf is ef.Scale:
        m = structural_bound(f.child, g, d)
        if m is not None:
            cands.append(m * f.k)
    if tg is ef.Scale:
        m = structural_bound(f, g.child, d)
        if m is not None:
            cands.append(m / g.k)
    if tg is ef.Series:
        # every term is nonnegative, so g >= w_1 child
        m = structural_bound(f, g.child, d)
        if m is not None:
            cands.append(m / g.weights[0])
    if tg in (ef.Sum, ef.Max):
        for c in g.children():
            m = structural_bound(f, c, d)
            if m is not None:
                cands.append(m)
    if tg is ef.Min:
        ms = [structural_bound(f, c, d) for c in g.children()]
        if all(m is not None for m in ms):
            cands.append(max(ms))
    if tf is ef.Min:
        for c in f.children():
            m = structural_bound(c, g, d)
            if m is not None:
                cands.append(m)
    if tf in (ef.Sum, ef.Max):
        ms = [structural_bound(c, g, d) for c in f.children()]
        if all(m is not None for m in ms):
            cands.append(sum(ms) if tf is ef.Sum else max(ms))
    if tf is ef.TTransform and tg is ef.TTransform:
        # b <= M a  implies  x / a <= M x / b
        m = structural_bound(g.child, f.child, d)
        if m is not None:
            cands.append(m)
    return min(cands) if cands else None


# ---------------------------------------------------------------- germ decisions

def _ceil_int(v) -> int:
    if isinstance(v, (int, Fraction)):
        return max(1, math.ceil(v))
    return max(1, int(math.ceil(float(v) * (1 + 1e-12))))


def _iterate_power(c, p, n):
    coef, expo = c, p
    for _ in range(n - 1):
        coef = ef._mul(c, ef._cpow(coef, p))
        expo = expo * p
    return coef, expo


def germ_decision(f: ef.ExtFun, g: ef.ExtFun):
    """Decide the ratio blow-up at 0 from germs at 0 when possible.

    Returns ('Contained', N, m) / ('NotContained',) / None.
    """
    a, b = f.germ0, g.germ0
    if a.kind == ef.ZERO:
        return (CONTAINED, 1, 1)
    if a.kind == ef.POWER_LIKE and a.p == 1:
        # f(x)/x increases to c as x -> 0 and g(x) >= g(1) x on (0, 1]
        g1 = g.eval(Fraction(1))
        if g1 == ef.INF:
            return (CONTAINED, 1, 1)
        return (CONTAINED, 1, _ceil_int(Fraction(a.c) / Fraction(g1) if ef._is_exact(a.c) and ef._is_exact(g1)
                                        else float(a.c) / float(g1)))
    if b.kind == ef.POSITIVE_LIMIT:
        return (CONTAINED, 1, 1)
    if b.kind == ef.INFINITE:
        return (CONTAINED, 1, 1)
    if not (a.exact and b.exact) or a.kind != ef.POWER_LIKE or b.kind != ef.POWER_LIKE:
        return None
    if b.p == 1:
        return (NOT_CONTAINED,) if a.p < 1 else None
    # b.p < 1: iterates of g get flatter, pick the first depth that overtakes f
    for n in range(1, 200):
        cn, pn = _iterate_power(b.c, b.p, n)
        if pn < a.p:
            return (CONTAINED, n, 2)
        if pn == a.p:
            return (CONTAINED, n, _ceil_int(2 * float(a.c) / float(cn)))
    return None


# ---------------------------------------------------------------- probing

def _resolved_floor(*fs):
    lo = None
    for f in fs:
        r = getattr(f, "resolved_logx", None)
        if r is not None:
            lo = r if lo is None else max(lo, r)
    return lo


def base_schedule(opts: PosetOptions):
    hi = math.log(-opts.probe_floor_logx)
    n = opts.base_probes
    return [-math.exp(hi * k / (n - 1)) for k in range(n)]


def deep_schedule(opts: PosetOptions):
    lo = math.log(-opts.probe_floor_logx)
    hi = float(opts.probe_floor_loglogx)
    n = opts.deep_probes
    if hi <= lo or n <= 0:
        return []
    return [_num.deep_t(lo + (hi - lo) * k / n) for k in range(1, n + 1)]


def _iter_loglog(g, t, n):
    v = t
    for _ in range(n):
        v = g.loglog(v)
    return v


def ln_ratio(f: ef.ExtFun, g: ef.ExtFun, n: int, t):
    """ln f(x) - ln g^(n)(x) at x = e^t, arranged to avoid cancellation.

    For f = T(a), g = T(b) both sides are t minus a slowly varying term; the
    t parts cancel exactly, leaving -ln a(x) + sum_k ln b(x_k) over the
    iterates x_k of T(b).
    """
    if type(f) is ef.TTransform and type(g) is ef.TTransform:
        la = f.child.loglog(t)
        if la in (_num.NEG_INF, _num.INF):
            return _num.NEG_INF
        acc, v = -la, t
        for _ in range(n):
            lb = g.child.loglog(v)
            if lb in (_num.NEG_INF, _num.INF):
                return _num.INF
            acc = acc + lb
            v = v - lb
        return acc
    lf = f.loglog(t)
    if lf == _num.NEG_INF:
        return _num.NEG_INF
    lg = _iter_loglog(g, t, n)
    if lg == _num.NEG_INF:
        return _num.INF
    return lf - lg


def _classify_series(rs, ln_thr):
    """'blowup' | 'bounded' | 'open' for a probe series ordered toward 0."""
    if len(rs) < 3:
        return "open"
    last = rs[-3:]
    tol = 1e-12
    rising = all(last[i + 1] >= last[i] - tol * max(1.0, abs(float(last[i]))) for i in range(2))
    if rs[-1] > ln_thr and rising:
        return "blowup"
    top = max(float(r) for r in rs)
    if top <= _M_CAP_LOG2 * LN2 and float(rs[-1]) - float(rs[-3]) <= 1e-6 * max(1.0, abs(float(rs[-1]))):
        return "bounded"
    return "open"


def _classify_witness(points, rs, ln_thr):
    """Witness mode over explicitly supplied points; blowup needs three qualifying
    points, one of them among the two deepest."""
    order = sorted(range(len(points)), key=lambda i: -float(points[i]) if not _num.is_mpfr(points[i])
                   else -float(gmpy2.mpfr(points[i])))
    q = [i for i in order if rs[i] > ln_thr]
    if len(q) >= 3 and any(i in q for i in order[-2:]):
        return "blowup", q
    return "open", q


@dataclass
class ProbeReport:
    ts: list
    ratios: dict  # N -> list of ln ratios
    status: dict  # N -> blowup|bounded|open
    witness_mode: bool = False
    qualifying: dict = field(default_factory=dict)

    def to_json(self):
        return {"ln_x": [_num.fmt(t) for t in self.ts],
                "ln_ratio": {str(n): [_num.fmt(r) for r in rs] for n, rs in self.ratios.items()},
                "status": {str(n): s for n, s in self.status.items()},
                "witness_mode": self.witness_mode}


def probe(f, g, ts, opts: PosetOptions, witness_mode=False) -> ProbeReport:
    ln_thr = math.log(opts.ratio_threshold)
    ratios, status, qual = {}, {}, {}
    for n in range(1, opts.n_max + 1):
        rs = [ln_ratio(f, g, n, t) for t in ts]
        ratios[n] = rs
        if witness_mode:
            status[n], qual[n] = _classify_witness(ts, rs, ln_thr)
        else:
            status[n] = _classify_series(rs, ln_thr)
            qual[n] = [i for i, r in enumerate(rs) if r > ln_thr]
    return ProbeReport(list(ts), ratios, status, witness_mode, qual)


def _blowup_witness(rep: ProbeReport, opts):
    seqs = {}
    for n, rs in rep.ratios.items():
        seqs[str(n)] = [[_num.fmt(rep.ts[i]), _num.fmt(rs[i])] for i in rep.qualifying[n]]
    return {"condition": RATIO_BLOWUP, "ln_threshold": math.log(opts.ratio_threshold),
            "witness_mode": rep.witness_mode, "sequences": seqs}


def _clip(ts, floor):
    if floor is None:
        return list(ts)
    return [t for t in ts if t >= floor]


# ---------------------------------------------------------------- queries

def _slope_condition(f, g, opts):
    cf, ef_, sf = inf_class(f, opts)
    cg, eg, sg = inf_class(g, opts)
    holds = None
    if cf == "sublinear" or cg == "linear":
        holds = False
    elif cf == "linear" and cg == "sublinear":
        holds = True
    info = {"f": cf, "g": cg, "exact": ef_ and eg,
            "germ_inf_f": f.germinf.to_json(), "germ_inf_g": g.germinf.to_json()}
    if sf or sg:
        info["samples_f"] = [[_num.fmt(t), _num.fmt(v)] for t, v in sf]
        info["samples_g"] = [[_num.fmt(t), _num.fmt(v)] for t, v in sg]
    return holds, info


def _inf_reason(c1):
    if c1["f"] == "sublinear":
        return "f sublinear at infinity"
    return "g linear at infinity"


def contains_single(f: ef.ExtFun, g: ef.ExtFun, opts=None, **kw) -> Verdict:
    """Is the algebra generated by f contained in the one generated by g?"""
    o = _options(opts, kw)
    _check_generator(f, "f", True)
    _check_generator(g, "g", False)
    if _is_zero(g):
        raise HypothesisViolation("g must be nonzero")
    base = dict(options=o.to_json(), f=f.to_json(), g=g.to_json())
    notes = [f"reductions: f -> {reduction_label(f, o)}, g -> {reduction_label(g, o)}"]

    m = structural_bound(f, g)
    if m is not None:
        cert = {"kind": "structural", "N": 1, "m": _ceil_int(m), "bound": str(m),
                "ln_delta": "inf", "infinity_side": "global domination f <= m g"}
        return Verdict(CONTAINED, CERTIFIED, cert, None, notes, **base)

    c1, c1info = _slope_condition(f, g, o)
    if c1:
        wit = {"condition": SLOPE_AT_INFINITY, **c1info}
        return Verdict(NOT_CONTAINED, CERTIFIED if c1info["exact"] else EMPIRICAL, None, wit, notes, **base)

    floor = _resolved_floor(f, g)
    if floor is not None:
        notes.append(f"probes restricted to ln x >= {_num.fmt(floor)} (resolved prefix)")

    if o.extra_probe_logx:
        pts = _clip([_num.parse_real(t) if isinstance(t, str) else t for t in o.extra_probe_logx], floor)
        rep = probe(f, g, pts, o, witness_mode=True)
        if all(s == "blowup" for s in rep.status.values()):
            return Verdict(NOT_CONTAINED, EMPIRICAL, None, _blowup_witness(rep, o), notes, **base)
        notes.append("supplied witness points did not separate for every N")

    gd = germ_decision(f, g)
    if gd is not None and gd[0] == CONTAINED and c1 is False:
        N, mult = gd[1], gd[2]
        cert = {"kind": "germ", "N": N, "m": mult, "ln_delta": _num.fmt(_germ_delta(f, g, N, mult)),
                "germ0_f": f.germ0.to_json(), "germ0_g": g.germ0.to_json(),
                "infinity_side": _inf_reason(c1info)}
        return Verdict(CONTAINED, CERTIFIED, cert, None, notes, **base)

    ts = _clip(base_schedule(o), floor)
    rep = probe(f, g, ts, o)
    numeric = not (f.germ0.exact and g.germ0.exact)
    need_deep = any(s != "blowup" for s in rep.status.values())
    if gd is not None and gd[0] == NOT_CONTAINED:
        numeric = True  # deepen until the witnesses clear the threshold
    if o.deep and numeric and need_deep:
        ts = ts + _clip(deep_schedule(o), floor)
        rep = probe(f, g, ts, o)

    if gd is not None and gd[0] == NOT_CONTAINED:
        if any(s != "blowup" for s in rep.status.values()):
            notes.append("germs decide the query; finite probes did not reach the threshold for every N")
        return Verdict(NOT_CONTAINED, CERTIFIED, None, _blowup_witness(rep, o), notes, **base)

    if all(s == "blowup" for s in rep.status.values()):
        return Verdict(NOT_CONTAINED, EMPIRICAL, None, _blowup_witness(rep, o), notes, **base)
    bounded = [n for n, s in rep.status.items() if s == "bounded"]
    if bounded and c1 is False:
        n = bounded[0]
        top = max(float(r) for r in rep.ratios[n])
        mult = 2 ** max(0, math.ceil(top / LN2))
        cert = {"kind": "grid", "N": n, "m": mult, "ln_delta": _num.fmt(ts[0]),
                "infinity_side": _inf_reason(c1info),
                "probes": [[_num.fmt(t), _num.fmt(r)] for t, r in zip(ts, rep.ratios[n])]}
        return Verdict(CONTAINED, EMPIRICAL, cert, None, notes, **base)
    notes.append("probes inconclusive")
    return Verdict(UNDETERMINED, EMPIRICAL, None, {"probes": rep.to_json(), "slope_condition": c1info},
                   notes, **base)


def words(G, depth: int):
    """All compositions g_1 o ... o g_k with k <= depth over G."""
    out, layer = list(G), list(G)
    for _ in range(depth - 1):
        layer = [ef.compose(a, w) for a in G for w in layer]
        out.extend(layer)
    return out


def contains_family(F, G, opts=None, **kw) -> Verdict:
    """Containment between the algebras generated by the families F and G.

    The slope condition is read from generator germs first.  The ratio blow-up is
    tested against the sum W of all composition words of length up to
    word_depth: every word is dominated by W, so blow-up against W is
    blow-up against every enumerated word.
    """
    o = _options(opts, kw)
    F, G = list(F), list(G)
    if not F or not G:
        raise HypothesisViolation("families must be nonempty")
    for g in G:
        _check_generator(g, "g", False)
    Gnz = [g for g in G if not _is_zero(g)]
    base = dict(options=o.to_json(), f=[f.to_json() for f in F], g=[g.to_json() for g in G])
    notes = [f"words of length <= {o.word_depth}; deeper words are not enumerated"]
    # the slope condition first: a generator linear at infinity against a sublinear family
    gcls = [inf_class(g, o) for g in G]
    for f in F:
        _check_generator(f, "f", False)
        cf, exact, _ = inf_class(f, o)
        if cf == "linear" and all(c == "sublinear" for c, _, _ in gcls):
            wit = {"condition": SLOPE_AT_INFINITY, "f": f.to_json(),
                   "germ_inf_f": f.germinf.to_json(),
                   "germ_inf_g": [g.germinf.to_json() for g in G]}
            ok = exact and all(e for _, e, _ in gcls)
            return Verdict(NOT_CONTAINED, CERTIFIED if ok else EMPIRICAL, None, wit, notes, **base)
    for f in F:
        _check_generator(f, "f", True)
    if not Gnz:
        if all(_is_zero(f) for f in F):
            return Verdict(CONTAINED, CERTIFIED, {"kind": "zero"}, None, notes, **base)
        raise HypothesisViolation("G generates the zero algebra")
    W = Gnz[0] if len(Gnz) == 1 and o.word_depth == 1 else ef.add(*words(Gnz, o.word_depth))
    per_f, certs, undecided = [], [], []
    for f in F:
        if _is_zero(f):
            certs.append({"kind": "zero"})
            continue
        best = None
        for g in Gnz:
            v = contains_single(f, g, o, n_max=max(o.n_max, o.word_depth), deep=False)
            if v.relation == CONTAINED:
                best = v
                if v.certainty == CERTIFIED:
                    break
        if best is None:
            v = contains_single(f, W, o, n_max=1)
            if v.relation == NOT_CONTAINED:
                v.notes = notes + v.notes
                v.options, v.f, v.g = base["options"], base["f"], base["g"]
                v.witness = {**(v.witness or {}), "against": "sum of all words", "f": f.to_json()}
                return v
            if v.relation == CONTAINED:
                best = v
        if best is None:
            undecided.append(f.to_json())
        else:
            certs.append(best.certificate)
            per_f.append(best.certainty)
    if undecided:
        return Verdict(UNDETERMINED, EMPIRICAL, None, {"undecided": undecided}, notes, **base)
    certainty = CERTIFIED if all(c == CERTIFIED for c in per_f) else EMPIRICAL
    return Verdict(CONTAINED, certainty, {"kind": "family", "per_generator": certs}, None, notes, **base)


# ---------------------------------------------------------------- classification

REGIONS = ("ZeroAlg", "BottomSucc", "ICOD0bdd", "ICOD0", "ICODbdd", "ICODfin", "Full")


@dataclass(frozen=True)
class RegionLabel:
    name: str
    bounds: tuple = ()

    def __post_init__(self):
        if self.name not in REGIONS + ("Intermediate",):
            raise ValueError(f"unknown region {self.name}")
        if (self.name == "Intermediate") != bool(self.bounds):
            raise ValueError("only Intermediate labels carry bounds")

    def __str__(self):
        if self.bounds:
            return f"Intermediate({self.bounds[0]}, {self.bounds[1]})"
        return self.name

    def to_json(self):
        return {"name": self.name, "bounds": list(self.bounds)} if self.bounds else {"name": self.name}


def classify_top_region(F) -> RegionLabel:
    F = list(F)
    if not F:
        raise HypothesisViolation("the family must be nonempty")
    for f in F:
        chk = ef.check_class(f, "ICOD")
        if chk.status == "FailsAt":
            raise HypothesisViolation(f"generator is not ICOD (fails near {chk.at})")
    if any(f.germ0.kind == ef.INFINITE for f in F):
        return RegionLabel("Full")
    nz = [f for f in F if not _is_zero(f)]
    if not nz:
        return RegionLabel("ZeroAlg")
    classes = [inf_class(f)[0] for f in nz]
    if "unknown" in classes:
        raise HypothesisViolation("growth at infinity could not be classified")
    sub = all(c == "sublinear" for c in classes)
    if any(f.germ0.kind == ef.POSITIVE_LIMIT for f in nz):
        return RegionLabel("ICODbdd" if sub else "ICODfin")
    if all(f.germ0.kind == ef.POWER_LIKE and f.germ0.p == 1 for f in nz) and sub:
        return RegionLabel("BottomSucc")
    return RegionLabel("Intermediate", ("BottomSucc", "ICOD0bdd" if sub else "ICOD0"))


DISCRETE_CLASSES = ("ZeroAlg", "Compacts", "RCAlgebra", "FullDiscrete")


def classify_discrete(S):
    """Class of the algebra on l2(N) generated by increasing integer sequences."""
    S = list(S)
    if not S:
        raise HypothesisViolation("the family must be nonempty")
    ones = [s(1) for s in S]
    if all(v == 0 for v in ones):
        return "ZeroAlg"
    if any(v == _num.INF for v in ones):
        return "FullDiscrete"
    # a sum of k copies of t maps 1 to k t(1) >= k, so any finite blow-up point is reached
    if any(v >= 1 for v in ones) and any(_num.INF in s.values for s in S):
        return "FullDiscrete"
    for s in S:
        if s.germ is None:
            raise HypothesisViolation("sequences need a germ tag at infinity to separate compacts from RC")
    if any(v >= 1 for v in ones) and any(s.growth_exponent >= 1 for s in S):
        return "RCAlgebra"
    return "Compacts"


def rc_multiplier(S):
    """Smallest k with k s >= id on the stored prefix and under the germ, for the first unbounded s."""
    for s in S:
        if s.germ is not None and s.growth_exponent >= 1 and s(1) >= 1:
            kind, a, b = s.germ
            k = 1
            for n in range(1, len(s.values)):
                k = max(k, math.ceil(Fraction(n, max(s(n), 1))))
            # eventually a n + b (or a n^p with p >= 1) needs k >= 1/a
            return max(k, math.ceil(1 / a))
    return None


# ---------------------------------------------------------------- re-verification

@dataclass
class Check:
    ok: bool
    reasons: list

    def to_json(self):
        return {"ok": self.ok, "reasons": self.reasons}


def verify(verdict) -> Check:
    """Re-check the internal evidence of a serialized verdict without recomputing it."""
    d = verdict.to_json() if isinstance(verdict, Verdict) else dict(verdict)
    reasons = []
    rel, cert, wit = d.get("relation"), d.get("certificate"), d.get("witness")
    opts = d.get("options") or {}
    n_max = int(opts.get("n_max", 1))
    if rel == NOT_CONTAINED:
        if not wit:
            reasons.append("NotContained without a witness")
        elif wit.get("condition") == SLOPE_AT_INFINITY:
            fcls = wit.get("f")
            if isinstance(fcls, str) and (fcls != "linear" or wit.get("g") != "sublinear"):
                reasons.append("slope witness does not show f linear and g sublinear")
            if "germ_inf_f" not in wit:
                reasons.append("slope witness lacks germ data")
        elif wit.get("condition") == RATIO_BLOWUP:
            thr = float(wit["ln_threshold"])
            seqs = wit.get("sequences", {})
            for n in range(1, n_max + 1):
                seq = seqs.get(str(n), [])
                if not seq:
                    reasons.append(f"no witness sequence for N={n}")
                    continue
                xs = [_num.parse_real(a) for a, _ in seq]
                rs = [_num.parse_real(b) for _, b in seq]
                if any(r <= thr for r in rs):
                    reasons.append(f"N={n}: a recorded ratio is below the threshold")
                if not wit.get("witness_mode") and any(b >= a for a, b in zip(xs, xs[1:])):
                    reasons.append(f"N={n}: probe points are not decreasing")
                if len(seq) < 3:
                    reasons.append(f"N={n}: fewer than three witness points")
        else:
            reasons.append("unknown witness condition")
    elif rel == CONTAINED:
        if not cert:
            reasons.append("Contained without a certificate")
        elif cert.get("kind") in ("structural", "germ", "grid"):
            if int(cert.get("N", 0)) < 1 or int(cert.get("m", 0)) < 1:
                reasons.append("certificate needs N >= 1 and m >= 1")
            if cert.get("kind") == "grid":
                lm = math.log(int(cert["m"]))
                for t, r in cert.get("probes", []):
                    if _num.parse_real(r) > lm + 1e-9:
                        reasons.append(f"probe at ln x = {t} exceeds ln m")
                        break
            if cert.get("kind") != "structural" and "infinity_side" not in cert:
                reasons.append("certificate lacks the infinity-side argument")
            if d.get("certainty") == CERTIFIED and cert.get("kind") == "grid":
                reasons.append("grid certificates cannot be Certified")
        elif cert.get("kind") == "family":
            for c in cert.get("per_generator", []):
                sub = verify({"relation": CONTAINED, "certificate": c, "options": opts,
                              "certainty": EMPIRICAL})
                reasons.extend(sub.reasons)
    elif rel != UNDETERMINED:
        reasons.append(f"unknown relation {rel!r}")
    return Check(not reasons, reasons)


def _ln_delta(c):
    v = c.get("ln_delta", "inf")
    return math.inf if v in ("inf", None) else float(_num.parse_real(v))


def _germ_delta(f, g, N, m, start=-1.0, floor=-1e6):
    """Largest ln x of the form start * 2^k below which f <= m g^(N) holds on a probe grid.

    The germs guarantee the inequality eventually; this places the threshold where
    the pieces away from 0 (caps, tails) no longer interfere.
    """
    t = start
    while t > floor:
        if check_certificate({"N": N, "m": m, "ln_delta": _num.fmt(t)}, f, g, floor=min(4 * t, -200.0)):
            return t
        t *= 2
    return t


def compose_certificates(c1: dict, c2: dict, g: ef.ExtFun | None = None) -> dict:
    """Chain f <= m1 g^(N1) on (0, d1] and g <= m2 h^(N2) on (0, d2].

    For ISOD h, h^(N2)(m y) <= m h^(N2)(y), so g^(N1) <= m2^N1 h^(N1 N2) as long as
    the intermediate values g^(k)(x), k < N1, stay below d2.  The composite is
    f <= m1 m2^N1 h^(N1 N2) on (0, d]; d is found by halving ln x until the
    intermediate iterates of ``g`` clear d2 (global certificates need no g).
    """
    for c in (c1, c2):
        if c.get("kind") not in ("structural", "germ", "grid"):
            raise ValueError(f"cannot compose a {c.get('kind')!r} certificate")
    n1, n2, m1, m2 = int(c1["N"]), int(c2["N"]), int(c1["m"]), int(c2["m"])
    d1, d2 = _ln_delta(c1), _ln_delta(c2)
    if c1["kind"] == c2["kind"] == "structural":
        b = Fraction(c1["bound"]) * Fraction(c2["bound"])
        return {"kind": "structural", "N": 1, "m": _ceil_int(b), "bound": str(b), "ln_delta": "inf",
                "infinity_side": "global domination f <= m g"}
    d = d1
    if d2 < math.inf and n1 > 1:
        if g is None:
            raise ValueError("a local second certificate needs g to place the threshold")
        d = min(d, d2)
        while d > -1e6 and any(float(_iter_loglog(g, d, k)) > d2 for k in range(1, n1)):
            d = 2 * d if d < 0 else -1.0
    elif d2 < math.inf:
        d = min(d, d2)
    kind = "grid" if "grid" in (c1["kind"], c2["kind"]) else "germ"
    return {"kind": kind, "N": n1 * n2, "m": m1 * m2 ** n1, "ln_delta": _num.fmt(d),
            "composed_of": [c1, c2],
            "infinity_side": "; ".join(c.get("infinity_side", "") for c in (c1, c2))}


def check_certificate(cert: dict, f: ef.ExtFun, g: ef.ExtFun, floor: float = -200.0, points: int = 64) -> bool:
    """Independent grid check of f <= m g^(N) at ln x in [floor, ln_delta] (clipped at 0)."""
    N, m = int(cert["N"]), int(cert["m"])
    top = min(_ln_delta(cert), 0.0)
    lm = math.log(m)
    for t in np.linspace(min(floor, top), top, points):
        lf = float(f.loglog(float(t)))
        lg = float(_iter_loglog(g, float(t), N))
        if lf == -math.inf:
            continue
        if lf > lm + lg + 1e-9 * max(1.0, abs(lf)):
            return False
    return True

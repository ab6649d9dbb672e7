"""Acceptance battery: one function per criterion, each returning a result dict.

Used by ``suppexp suite paper`` (which writes report.json) and by the
acceptance tests.
"""
from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np

from . import chains, discrete, oplab, poset, transforms
from . import extfun as ef

LN_1E6 = math.log(1e6)


def _result(name, passed, seconds, budget_s, **details):
    return {"criterion": name, "passed": bool(passed) and seconds < budget_s,
            "checks_passed": bool(passed), "seconds": round(seconds, 3), "budget_s": budget_s,
            "details": details}


def criterion_1():
    t = time.perf_counter()
    phi = discrete.phi_sequence(discrete.example_pattern(), 4, "Exact")
    dt = time.perf_counter() - t
    return _result("discrete example", tuple(phi.values) == (0, 3, 4, 6, 6), dt, 0.1,
                   values=list(phi.values))


def capped_half():
    """min(x/2, 1)."""
    return ef.pointwise_min(ef.scale(Fraction(1, 2), ef.identity()), ef.Const(1))


def criterion_2(h=Fraction(1, 1024)):
    t = time.perf_counter()
    op = oplab.build_weighted_composition(capped_half(), 2, oplab.Grid(h=h))
    xs = [0.5, 1.0, 3.0]
    got = oplab.measure_phi(oplab.adjoint(op), xs).values
    want = [min(2 * x, 2.0) for x in xs]
    close = all(abs(a - b) <= 2 * float(h) for a, b in zip(got, want))
    rep = oplab.collapse_check(op, step=1 / 64)
    ok = close and rep.s_a == 2.0 and rep.flat_after
    return _result("collapse example", ok, time.perf_counter() - t, 10,
                   phi_adjoint=list(map(float, got)), expected=want, collapse=rep.to_json())


def random_isod_pwl(rng, n_break=None):
    """Random ISOD PWL with rational breakpoints: increasing, slope-to-origin decreasing."""
    n_break = n_break or int(rng.integers(1, 7))
    xs, x = [], Fraction(0)
    for _ in range(n_break):
        x += Fraction(int(rng.integers(1, 9)), int(rng.integers(1, 5)))
        xs.append(x)
    ys = [Fraction(int(rng.integers(1, 9)), int(rng.integers(1, 5)))]
    for a, b in zip(xs, xs[1:]):
        u = Fraction(int(rng.integers(0, 5)), 4)
        top = ys[-1] * b / a
        ys.append(ys[-1] + u * (top - ys[-1]))
    last_ratio = ys[-1] / xs[-1]
    tail = last_ratio * Fraction(int(rng.integers(0, 5)), 4)
    return ef.PWL([(Fraction(0), Fraction(0))] + list(zip(xs, ys)), tail_slope=tail)


def criterion_3(n=500, seed=0):
    t = time.perf_counter()
    rng = np.random.default_rng(seed)
    bad = []
    for i in range(n):
        f = random_isod_pwl(rng)
        g = transforms.double_conjugate(f)
        pts = sorted({Fraction(0)} | {x for x, _ in f.points} | {x for x, _ in g.points}
                     | {x + 1 for x, _ in f.points})
        for x in pts + [Fraction(10) ** 6]:
            fx, gx = f.eval(x), g.eval(x)
            if not (fx <= gx <= 2 * fx):
                bad.append((i, str(x)))
                break
        if ef.check_class(g, "ICOD").status != "Holds":
            bad.append((i, "icod"))
    sq = ef.Power(1, Fraction(1, 2))
    g = transforms.double_conjugate(sq)
    xs = np.geomspace(1e-6, 1e6, 121)
    err = float(np.max(np.abs(g.eval_array(xs) - np.sqrt(xs)) / np.sqrt(xs)))
    return _result("double conjugate sandwich", not bad and err <= 1e-9, time.perf_counter() - t, 30,
                   failures=bad[:10], sqrt_rel_error=err)


def criterion_4(h=Fraction(1, 1024)):
    t = time.perf_counter()
    rep = oplab.distance_lower_bound(ef.sqrt_capped(), 1, ef.identity(), Fraction(1, 100),
                                     oplab.Grid(h=h), restarts=32)
    floor = 0.9 - 5 * math.sqrt(float(h))
    ok = abs(rep.bound - 0.9) <= 1e-12 and rep.adversary_min >= floor
    return _result("distance lower bound", ok, time.perf_counter() - t, 60, **rep.to_json(),
                   adversary_floor=floor)


def criterion_5():
    t = time.perf_counter()
    op = oplab.build_dyadic_separator(8)
    res = oplab.dyadic_column_residual(op, 8, 4)
    ok = res["residual"] >= 0.984375 - 1e-6 and abs(res["residual"] - 0.984375) <= 1e-6
    return _result("dyadic separator", ok, time.perf_counter() - t, 10, **res)


def _min_ratio(v):
    seqs = (v.witness or {}).get("sequences", {})
    vals = [float(r) if math.isfinite(float(r)) else math.inf for s in seqs.values() for _, r in s]
    return min(vals) if vals else -math.inf


def criterion_6(steps=4, depth=24):
    t = time.perf_counter()
    up = chains.ascend(None, steps, depth)
    down = chains.descend(up)
    rows, ok = [], True
    for fam, name in ((up, "ascend"), (down, "descend")):
        for i in range(len(fam)):
            for j in range(i + 1, len(fam)):
                lo, hi = (fam[i], fam[j]) if name == "ascend" else (fam[j], fam[i])
                a = poset.contains_single(lo, hi)
                b = poset.contains_single(hi, lo)
                good = (a.relation == poset.CONTAINED and b.relation == poset.NOT_CONTAINED
                        and b.certainty == poset.EMPIRICAL and _min_ratio(b) > LN_1E6)
                ok &= good
                rows.append({"chain": name, "i": i, "j": j, "lower_in_upper": str(a),
                             "upper_in_lower": str(b), "min_ln_ratio": _min_ratio(b), "ok": good})
    return _result("chain prefix", ok, time.perf_counter() - t, 300, pairs=rows)


def criterion_7(stages=6):
    t = time.perf_counter()
    f = ef.sqrt_capped()
    tr = chains.antichain_extend([f], stages)
    bad = chains.check_transcript(tr)
    g = tr.result
    icod = ef.check_class(g, "ICOD").status == "Holds"
    xs, zs = tr.witness_points()
    extra = tuple(xs + zs)
    v1 = poset.contains_single(g, f, extra_probe_logx=extra)
    v2 = poset.contains_single(f, g, extra_probe_logx=extra)
    ok = (not bad and icod and all(v.relation == poset.NOT_CONTAINED and _min_ratio(v) > LN_1E6
                                   for v in (v1, v2)))
    return _result("antichain", ok, time.perf_counter() - t, 120, invariant_failures=bad,
                   icod=icod, g_in_f=str(v1), f_in_g=str(v2),
                   min_ln_ratio=[_min_ratio(v1), _min_ratio(v2)])


def criterion_8():
    t = time.perf_counter()
    S = discrete.IntSequence
    got = [poset.classify_discrete([S((0, 0, 0), ("affine", 0, 0))]),
           poset.classify_discrete([S((0, 5, 5), ("affine", 0, 5))]),
           poset.classify_discrete([S((0, 1, 2), ("affine", 1, 0))]),
           poset.classify_discrete([S((0, math.inf, math.inf))])]
    want = ["ZeroAlg", "Compacts", "RCAlgebra", "FullDiscrete"]
    top = [str(poset.classify_top_region([ef.x_plus_one()])),
           str(poset.classify_top_region([ef.Const(1)]))]
    ok = got == want and top == ["ICODfin", "ICODbdd"]
    return _result("classification", ok, time.perf_counter() - t, 1, discrete=got, top=top)


def random_pattern(rng, max_cols=12):
    n_cols = int(rng.integers(1, max_cols + 1))
    n_rows = int(rng.integers(1, 16))
    dens = float(rng.uniform(0.05, 0.6))
    cols = [sorted(set(np.nonzero(rng.random(n_rows) < dens)[0].tolist())) for _ in range(n_cols)]
    return discrete.SparsePattern(n_rows, n_cols, cols)


def criterion_9(n=200, seed=1):
    t = time.perf_counter()
    rng = np.random.default_rng(seed)
    mismatches = []
    for i in range(n):
        p = random_pattern(rng)
        k = p.n_cols
        if list(discrete.phi_sequence(p, k, "Exact").values) != list(discrete.exhaustive_phi(p, k)):
            mismatches.append(i)
    viol = []
    for i in range(n):
        a = oplab.random_block_operator(12, 0.2, seed=10 * i + 1)
        b = oplab.random_block_operator(12, 0.2, seed=10 * i + 2)
        h = a.h
        pa, _, _ = oplab.phi_function(a)
        pb, vb, _ = oplab.phi_function(b)
        _, vab, _ = oplab.phi_function(a @ b)
        _, vs, _ = oplab.phi_function(a + b)
        _, va, _ = oplab.phi_function(a)
        for k in range(13):
            if vab[k] > pa(vb[k]) + 4 * h + 1e-12 or vs[k] > va[k] + vb[k] + 4 * h + 1e-12:
                viol.append((i, k))
                break
    return _result("exact vs exhaustive and Phi laws", not mismatches and not viol,
                   time.perf_counter() - t, 120, mismatches=mismatches[:10], law_violations=viol[:10])


def exact_phi_corpus(seed=2):
    """Exact Phi sequences of the operators built across the battery."""
    out = []
    h = Fraction(1, 256)
    g = oplab.Grid(h=h, length=16)
    for name, f, r in (("capped half", capped_half(), 2), ("sqrt capped", ef.sqrt_capped(), 1),
                       ("identity", ef.identity(), 1)):
        op = oplab.build_weighted_composition(f, r, g)
        for o, tag in ((op, name), (oplab.adjoint(op), name + " adjoint")):
            vals, mode = oplab.phi_sequence(o)
            out.append((tag, vals, mode, float(h)))
    hs = oplab.build_haar_separator(6, oplab.Grid(h=Fraction(1, 64), length=1))
    vals, mode = oplab.phi_sequence(hs)
    out.append(("haar", vals, mode, hs.h))
    ds = oplab.build_dyadic_separator(5)
    vals, mode = oplab.phi_sequence(ds)
    out.append(("dyadic", vals, mode, ds.h))
    for i in range(30):
        o = oplab.random_block_operator(12, 0.25, seed=seed * 1000 + i)
        vals, mode = oplab.phi_sequence(o)
        out.append((f"random {i}", vals, mode, o.h))
    return out


def criterion_10():
    t = time.perf_counter()
    bad = []
    for tag, vals, mode, h in exact_phi_corpus():
        if mode != "Exact":
            continue
        xs = h * np.arange(len(vals))
        if not oplab.isod_law(xs, vals, h):
            bad.append(tag)
    return _result("measured Phi is ISOD", not bad, time.perf_counter() - t, math.inf, failures=bad)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def _run_one(i):
    r = CRITERIA[i - 1]()
    r["index"] = i
    return r


def run_all(only=None, jobs: int = 1):
    """Run the battery; with ``jobs > 1`` criteria run in separate processes.

    Each criterion seeds its own generator, so results do not depend on ``jobs``
    (wall-clock timings do).
    """
    idx = [i for i in range(1, len(CRITERIA) + 1) if not only or i in only]
    if jobs <= 1:
        return [_run_one(i) for i in idx]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, idx))

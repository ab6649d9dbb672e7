import json
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from suppexp import chains, poset
from suppexp import extfun as ef
from suppexp.errors import HypothesisViolation

HALF = Fraction(1, 2)
UNIT = np.linspace(1e-6, 1.0, 400)


@pytest.fixture(scope="module")
def transcript6():
    return chains.antichain_extend([ef.sqrt_capped()], 6)


# ---------------------------------------------------------------- ascending / descending

@pytest.mark.parametrize("depth", [4, 10, 24])
def test_first_step_at_one(depth):
    f1 = chains.ascend(steps=1, depth=depth)[1]
    # every iterate fixes 1, so the series is a finite geometric sum
    oracle = sum(Fraction(1, 2 ** n) for n in range(1, depth + 1))
    assert oracle == 1 - Fraction(1, 2 ** depth)
    assert abs(float(f1.eval(1)) - float(oracle)) <= 1e-15


def test_first_step_formula():
    f1 = chains.ascend(steps=1, depth=8)[1]
    for x in (0.01, 0.3, 0.9):
        want = sum(2.0 ** -n * x ** (2.0 ** -n) for n in range(1, 9))
        assert abs(float(f1.eval(x)) - want) <= 1e-14


def test_zero_steps():
    f0 = ef.sqrt_capped()
    assert chains.ascend(f0, steps=0) == [f0]


def test_constant_after_one():
    chain = chains.ascend(steps=2, depth=12)
    for f in chain[1:]:
        assert np.allclose(f.eval_array(np.array([1.0, 2.0, 50.0])), float(f.eval(1)), rtol=0, atol=1e-15)


def test_seed_hypotheses_rejected():
    with pytest.raises(HypothesisViolation):
        chains.ascend(ef.identity(), steps=1)
    with pytest.raises(HypothesisViolation):
        chains.ascend(ef.Const(1), steps=1)


def test_chain_monotone_on_unit_interval():
    depth = 16
    chain = chains.ascend(steps=3, depth=depth)
    # each member carries its own 2^-depth truncation, and later steps iterate the
    # truncated ones, so the slack grows with the step index
    for k, (a, b) in enumerate(zip(chain, chain[1:])):
        assert np.all(a.eval_array(UNIT) <= b.eval_array(UNIT) + 2 * (k + 1) * 2.0 ** -depth)
    # away from 1 the truncation is invisible
    inner = UNIT[UNIT < 0.5]
    for a, b in zip(chain, chain[1:]):
        assert np.all(a.eval_array(inner) <= b.eval_array(inner))


def test_ascending_verdicts_first_pair():
    f0, f1 = chains.ascend(steps=1, depth=24)
    up, down = poset.contains_single(f0, f1), poset.contains_single(f1, f0)
    assert up.relation == "Contained"
    assert down.relation == "NotContained" and down.certainty == "Empirical"
    assert poset.verify(down).ok


def test_descend_single():
    out = chains.descend([ef.sqrt_capped()])
    assert len(out) == 1


def test_descend_pointwise_formula():
    g = chains.descend([ef.sqrt_capped()])[0]
    xs = np.geomspace(1e-10, 1e4, 200)
    assert np.allclose(g.eval_array(xs), np.where(xs <= 1, np.sqrt(xs), xs), rtol=1e-14)


def test_descend_reverses_first_pair():
    t0, t1 = chains.descend(chains.ascend(steps=1, depth=24))
    assert poset.contains_single(t1, t0).relation == "Contained"
    assert poset.contains_single(t0, t1).relation == "NotContained"


def test_descend_rejects_small_member():
    with pytest.raises(HypothesisViolation):
        chains.descend([ef.truncated_identity()])


def test_limit_step_between_members():
    chain = chains.ascend(steps=2, depth=12)
    lim = chains.limit_step(chain)
    want = 0.5 * chain[0].eval_array(UNIT) + 0.25 * chain[1].eval_array(UNIT) + 0.125 * chain[2].eval_array(UNIT)
    assert np.allclose(lim.eval_array(UNIT), want, rtol=1e-14)


# ---------------------------------------------------------------- affine lines

@settings(max_examples=200, deadline=None)
@given(st.integers(1, 50), st.integers(1, 50), st.integers(1, 50))
def test_affine_line_through_point(x, y, b):
    y, b = max(y, b), min(y, b)
    line = chains.AffineLine.exact(Fraction(x, 7), Fraction(y, 5), Fraction(b, 11))
    assert abs(math.exp(line.loglog(math.log(x / 7))) - y / 5) <= 1e-12 * y
    assert line.value(0) == Fraction(math.exp(line.ln_b))


def test_affine_line_rejects_y_below_b():
    with pytest.raises(ValueError):
        chains.AffineLine.exact(1, 1, 2)


# ---------------------------------------------------------------- antichain

def test_antichain_invariants(transcript6):
    assert chains.check_transcript(transcript6) == []
    for s, k in zip(transcript6.stages, transcript6.threshold):
        assert s.ln_ratio1 > math.log(max(s.n, k)) and s.ln_ratio2 > math.log(max(s.n, k))


def test_antichain_ordering(transcript6):
    st_ = transcript6.stages
    for a, b in zip(st_, st_[1:]):
        assert b.ln_x < a.ln_z < a.ln_x
        assert b.ln_b < a.ln_b
    assert all(s.ln_b < s.ln_y for s in st_)


def test_antichain_result_icod(transcript6):
    assert ef.check_class(transcript6.result, "ICOD").status == "Holds"


def test_antichain_slopes_strictly_decreasing(transcript6):
    # slope of line n, recomputed at 60 digits from the recorded ln values
    mpmath.mp.dps = 60
    slopes = []
    for s in transcript6.stages:
        y, b, x = (mpmath.exp(mpmath.mpf(float(v))) for v in (s.ln_y, s.ln_b, s.ln_x))
        slopes.append((y - b) / x)
    assert all(a < b for a, b in zip(slopes, slopes[1:]))


def test_antichain_incomparable(transcript6):
    f, g = ef.sqrt_capped(), transcript6.result
    xs, zs = transcript6.witness_points()
    extra = tuple(xs + zs)
    for a, b in ((g, f), (f, g)):
        v = poset.contains_single(a, b, extra_probe_logx=extra)
        assert v.relation == "NotContained"
        assert poset.verify(v).ok


def test_antichain_single_stage():
    tr = chains.antichain_extend([ef.sqrt_capped()], 1)
    assert len(tr.stages) == 1 and chains.check_transcript(tr) == []
    assert ef.check_class(tr.result, "ICOD").status == "Holds"


def test_antichain_two_generators():
    F = [ef.sqrt_capped(), ef.pointwise_min(ef.Power(1, Fraction(2, 3)), ef.Const(1))]
    tr = chains.antichain_extend(F, 5)
    assert chains.check_transcript(tr) == []
    xs, zs = tr.witness_points()
    g = tr.result
    for f in F:
        for a, b in ((g, f), (f, g)):
            assert poset.contains_single(a, b, extra_probe_logx=tuple(xs + zs)).relation == "NotContained"


def test_antichain_rescales_generator():
    tr = chains.antichain_extend([ef.scale(3, ef.sqrt_capped())], 2)
    assert tr.rescaled == ["rescaled by 1/3"]
    assert chains.check_transcript(tr) == []


def test_antichain_rejects_linear_germ():
    with pytest.raises(HypothesisViolation):
        chains.antichain_extend([ef.truncated_identity()], 2)


def test_transcript_round_trip(transcript6):
    tr = chains.ZigZagTranscript.from_json(json.loads(transcript6.dumps()))
    assert tr.dumps() == transcript6.dumps()
    assert chains.check_transcript(tr) == []


def test_transcript_tampering_detected(transcript6):
    d = json.loads(transcript6.dumps())
    d["stages"][2]["ln_b"] = d["stages"][1]["ln_b"]
    assert chains.check_transcript(chains.ZigZagTranscript.from_json(d))


def test_verdict_reproducible_from_transcript(transcript6):
    tr = chains.ZigZagTranscript.from_json(json.loads(transcript6.dumps()))
    xs, zs = tr.witness_points()
    extra = tuple(xs + zs)
    a = poset.contains_single(tr.result, ef.sqrt_capped(), extra_probe_logx=extra)
    b = poset.contains_single(transcript6.result, ef.sqrt_capped(), extra_probe_logx=extra)
    assert a.dumps() == b.dumps()

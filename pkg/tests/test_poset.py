import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from suppexp import extfun as ef
from suppexp import poset
from suppexp.discrete import IntSequence
from suppexp.errors import HypothesisViolation

HALF = Fraction(1, 2)
EXPONENTS = [Fraction(1), Fraction(3, 4), Fraction(2, 3), Fraction(1, 2), Fraction(1, 3)]


def capped_power(c, p, cap):
    return ef.pointwise_min(ef.Power(c, p), ef.Const(cap))


def grid_dominates(f, g, m, xs):
    """f <= m g at every x of a plain float grid."""
    return bool(np.all(f.eval_array(xs) <= m * g.eval_array(xs) * (1 + 1e-12)))


# ---------------------------------------------------------------- single generator

def test_sqrt_capped_not_in_identity():
    v = poset.contains_single(ef.sqrt_capped(), ef.identity())
    assert v.relation == "NotContained"
    assert v.witness["condition"] == "RatioBlowupAtZero"
    assert poset.verify(v).ok


@pytest.mark.parametrize("g", [ef.identity(), ef.sqrt_capped(), ef.x_plus_one(), ef.Power(1, HALF),
                               ef.Const(1), capped_power(2, Fraction(1, 3), 5)])
def test_truncated_identity_in_everything(g):
    v = poset.contains_single(ef.truncated_identity(), g)
    assert v.relation == "Contained"
    assert poset.verify(v).ok


def test_min_x_and_min_2x_equal():
    a = ef.pointwise_min(ef.identity(), ef.Const(1))
    b = ef.pointwise_min(ef.scale(2, ef.identity()), ef.Const(3))
    ab, ba = poset.contains_single(a, b), poset.contains_single(b, a)
    assert (ab.relation, ba.relation) == ("Contained", "Contained")
    # global domination needs m = 1 one way and m = 3 the other
    xs = np.geomspace(1e-12, 1e12, 2000)
    assert grid_dominates(a, b, 1, xs) and grid_dominates(b, a, 3, xs)
    assert not grid_dominates(b, a, 2, xs)
    # the certificates are local to (0, delta], where 2 already suffices
    assert (ab.certificate["m"], ba.certificate["m"]) == (1, 2)
    for (f, g), v in (((a, b), ab), ((b, a), ba)):
        near = xs[xs <= math.exp(float(v.certificate["ln_delta"]))]
        assert grid_dominates(f, g, v.certificate["m"], near)


def test_positive_limit_rejected():
    with pytest.raises(HypothesisViolation):
        poset.contains_single(ef.Const(1), ef.identity())


def test_zero_g_rejected():
    with pytest.raises(HypothesisViolation):
        poset.contains_single(ef.sqrt_capped(), ef.Const(0))


def test_linear_vs_sublinear_slope_witness():
    v = poset.contains_single(ef.identity(), ef.truncated_identity())
    assert v.relation == "NotContained" and v.certainty == "Certified"
    assert v.witness["condition"] == "SlopeAtInfinity"
    assert poset.verify(v).ok


def test_verdict_json_round_trip():
    v = poset.contains_single(ef.sqrt_capped(), ef.identity())
    d = json.loads(v.dumps())
    assert poset.verify(d).ok
    d["witness"]["sequences"]["1"][0][1] = "1.0"
    assert not poset.verify(d).ok


# ---------------------------------------------------------------- families

def test_family_x_plus_one_vs_bounded():
    v = poset.contains_family([ef.x_plus_one()], [ef.pointwise_min(ef.identity(), ef.Const(1))])
    assert v.relation == "NotContained"


@pytest.mark.parametrize("F", [[ef.sqrt_capped()], [ef.sqrt_capped(), ef.truncated_identity()],
                               [ef.identity()]])
def test_family_reflexive(F):
    v = poset.contains_family(F, F)
    assert v.relation == "Contained"
    assert poset.verify(v).ok


def test_family_generatorwise_domination():
    v = poset.contains_family([ef.sqrt_capped()], [ef.sqrt_capped(), ef.truncated_identity()])
    assert v.relation == "Contained"
    assert v.certificate["per_generator"][0]["m"] == 1
    xs = np.geomspace(1e-12, 1e12, 500)
    assert grid_dominates(ef.sqrt_capped(), ef.sqrt_capped(), 1, xs)


# ---------------------------------------------------------------- classification

def test_classify_x_plus_one():
    assert str(poset.classify_top_region([ef.x_plus_one()])) == "ICODfin"


def test_classify_bounded_positive_limit():
    assert str(poset.classify_top_region([ef.Const(1)])) == "ICODbdd"


def test_classify_sqrt_capped():
    lab = poset.classify_top_region([ef.sqrt_capped()])
    assert lab.name == "Intermediate" and tuple(lab.bounds) == ("BottomSucc", "ICOD0bdd")


def test_classify_rejects_non_icod():
    f = ef.pointwise_max(ef.Power(1, HALF), ef.scale(HALF, ef.identity()))
    with pytest.raises(HypothesisViolation):
        poset.classify_top_region([f])


@pytest.mark.parametrize("seqs,label", [
    ([IntSequence([0, 0, 0], ("affine", 0, 0))], "ZeroAlg"),
    ([IntSequence([0, 5, 5], ("affine", 0, 5))], "Compacts"),
    ([IntSequence([0, 1, 2], ("affine", 1, 0))], "RCAlgebra"),
    ([IntSequence([0, "inf"])], "FullDiscrete"),
])
def test_classify_discrete(seqs, label):
    assert poset.classify_discrete(seqs) == label


# ---------------------------------------------------------------- properties

def _contained_triple(draw):
    ps = sorted(draw(st.lists(st.sampled_from(EXPONENTS), min_size=3, max_size=3)), reverse=True)
    return [capped_power(draw(st.integers(1, 6)), p, draw(st.integers(1, 5))) for p in ps]


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_certificate_transitivity(data):
    f, g, h = _contained_triple(data.draw)
    v1, v2 = poset.contains_single(f, g), poset.contains_single(g, h)
    assert v1.relation == v2.relation == "Contained"
    assert v1.certainty == v2.certainty == "Certified"
    cert = poset.compose_certificates(v1.certificate, v2.certificate, g)
    assert cert["N"] == v1.certificate["N"] * v2.certificate["N"]
    # independent check: f <= m h^(N) on a float grid below the threshold
    top = min(float(cert["ln_delta"]), 0.0)
    xs = np.exp(np.linspace(-60.0, top, 400))
    hN = ef.iterate(h, cert["N"])
    assert grid_dominates(f, hN, cert["m"], xs)
    assert poset.check_certificate(cert, f, h)


def germ_class(f):
    """Germ data up to the equivalence iterates induce: x^p with p < 1 iterates past every x^q."""
    g = f.germ0
    return (g.kind, g.p == 1) if g.kind == ef.POWER_LIKE else (g.kind,)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(EXPONENTS), st.sampled_from(EXPONENTS), st.integers(1, 4), st.integers(1, 4))
def test_both_ways_certified_forces_same_germ(p, q, c, d):
    f, g = capped_power(c, p, 2), capped_power(d, q, 3)
    a, b = poset.contains_single(f, g), poset.contains_single(g, f)
    both = a.relation == b.relation == "Contained" and a.certainty == b.certainty == "Certified"
    assert both == (germ_class(f) == germ_class(g))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(EXPONENTS), st.sampled_from(EXPONENTS), st.sampled_from([2, 10]))
def test_scale_invariance(p, q, k):
    f, g = capped_power(1, p, 1), capped_power(1, q, 1)
    assert poset.contains_single(f, g).relation == poset.contains_single(ef.scale(k, f), g).relation


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(EXPONENTS), st.sampled_from(EXPONENTS), st.sampled_from(EXPONENTS))
def test_monotonicity(p1, p2, q):
    p1, p2 = max(p1, p2), min(p1, p2)  # x^p1 <= x^p2 on (0, 1]
    f1, f2, g = capped_power(1, p1, 1), capped_power(1, p2, 1), capped_power(1, q, 1)
    v2 = poset.contains_single(f2, g)
    if v2.relation == "Contained" and v2.certainty == "Certified":
        v1 = poset.contains_single(f1, g)
        assert not (v1.relation == "NotContained" and v1.certainty == "Certified")


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(EXPONENTS), st.sampled_from(EXPONENTS), st.integers(1, 3))
def test_emitted_verdicts_verify(p, q, n_max):
    v = poset.contains_single(capped_power(1, p, 1), capped_power(2, q, 3), n_max=n_max)
    assert poset.verify(v).ok, poset.verify(v).reasons

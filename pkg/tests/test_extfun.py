import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from suppexp import extfun as ef
from _strategies import icod_pwl, isod_pwl

HALF = Fraction(1, 2)
SQRT = ef.Power(1, HALF)

# direct summation of 2^-n for n = 1..20, frozen
SERIES_20_AT_ONE = Fraction(1048575, 1048576)


def test_power_at_four():
    assert SQRT.eval(4) == 2


@pytest.mark.parametrize("f", [SQRT, ef.sqrt_capped(), ef.x_plus_one(), ef.Series(SQRT, depth=5),
                               ef.PWL([(0, 0), (1, 2)]), ef.infinite_function()])
def test_value_at_zero_is_zero(f):
    assert f.eval(0) == 0


def test_series_at_one_matches_direct_summation():
    oracle = sum(Fraction(1, 2 ** n) for n in range(1, 21))
    assert oracle == SERIES_20_AT_ONE
    got = ef.Series(SQRT, depth=20).eval(1)
    assert abs(float(got) - float(SERIES_20_AT_ONE)) <= 1e-15
    assert abs(float(got) - 0.999999046) < 1e-9


def test_loglog_power_deep():
    assert SQRT.loglog(-10000.0) == -5000.0


def test_loglog_sum_logsumexp():
    f = ef.add(SQRT, ef.identity())
    oracle = float(mpmath.log(mpmath.exp(-50) + mpmath.exp(-100)))
    assert abs(float(f.loglog(-100.0)) - oracle) <= 1e-12
    assert abs(float(f.loglog(-100.0)) + 50) < 1e-20


def test_loglog_iterate():
    assert abs(float(ef.iterate(SQRT, 3).loglog(-800.0)) + 100) <= 1e-12


def test_loglog_zero_function():
    assert ef.Const(0).loglog(-5.0) == -math.inf


def test_add_germ():
    g = ef.add(SQRT, SQRT).germ0
    assert (g.kind, g.c, g.p) == (ef.POWER_LIKE, 2, HALF)


def test_compose_germ_matches_eval_grid():
    f = ef.compose(SQRT, ef.Power(4, 1))
    g = f.germ0
    assert (g.kind, g.c, g.p) == (ef.POWER_LIKE, 2, HALF)
    xs = np.geomspace(1e-12, 1e-2, 50)
    assert np.allclose(f.eval_array(xs), 2 * np.sqrt(xs), rtol=1e-12)


def test_compose_with_identity():
    f = ef.sqrt_capped()
    xs = np.geomspace(1e-8, 1e8, 200)
    assert np.array_equal(ef.compose(f, ef.identity()).eval_array(xs), f.eval_array(xs))


def test_iterate_one_is_identity_map():
    assert ef.iterate(SQRT, 1) is SQRT


def test_check_class_power():
    assert ef.check_class(SQRT, "ICOD").status == "Holds"


def test_isod_not_icod_example():
    # max(sqrt x, x) through its exact breakpoints
    f = ef.PWL([(0, 0), (Fraction(1, 4), HALF), (1, 1)], tail_slope=1)
    icod = ef.check_class(f, "ICOD")
    assert icod.status == "FailsAt" and icod.at[0] == 1
    assert ef.check_class(f, "ISOD").status == "Holds"


def test_germ_power_zero():
    g = SQRT.germ0
    assert (g.kind, g.c, g.p) == (ef.POWER_LIKE, 1, HALF)


def test_germ_capped_half_at_infinity():
    f = ef.pointwise_min(ef.scale(HALF, ef.identity()), ef.Const(1))
    g = f.germinf
    assert (g.kind, g.c) == (ef.POSITIVE_LIMIT, 1)


def test_series_germ_is_slowly_varying():
    f = ef.Series(SQRT, depth=20)
    assert f.germ0.kind == ef.SLOWLY_VARYING
    # independent check: f(x) / x^0.01 is huge at ln x = -1e4
    t = -1e4
    ln_ratio = float(f.loglog(t)) - 0.01 * t
    oracle = float(mpmath.log(mpmath.fsum(mpmath.mpf(2) ** -n * mpmath.exp(t * mpmath.mpf(2) ** -n)
                                          for n in range(1, 21)))) - 0.01 * t
    assert abs(ln_ratio - oracle) <= 1e-9 * abs(oracle)
    assert ln_ratio > 50


def test_unknown_class_rejected():
    with pytest.raises(ValueError):
        ef.check_class(SQRT, "Concave")


@pytest.mark.parametrize("f", [SQRT, ef.sqrt_capped(), ef.x_plus_one(), ef.Series(SQRT, depth=6),
                               ef.compose(SQRT, ef.Power(4, 1)), ef.PWL([(0, 0), (1, 3)], tail_slope=1),
                               ef.scale(3, ef.truncated_identity())])
def test_json_round_trip(f):
    g = ef.from_json(f.to_json())
    xs = np.geomspace(1e-6, 1e6, 40)
    assert np.array_equal(f.eval_array(xs), g.eval_array(xs))
    assert g.to_json() == f.to_json()


def test_pwl_rejects_decreasing():
    with pytest.raises(ValueError):
        ef.PWL([(0, 0), (1, 2), (2, 1)])


# ---------------------------------------------------------------- properties

@settings(max_examples=1000, deadline=None)
@given(icod_pwl(), icod_pwl(), st.booleans())
def test_icod_closed_under_add_and_compose(f, g, use_compose):
    h = ef.compose(f, g) if use_compose else ef.add(f, g)
    assert ef.check_class(h, "ICOD").status == "Holds"


@settings(max_examples=1000, deadline=None)
@given(isod_pwl(), st.integers(0, 1023), st.integers(0, 1023))
def test_isod_subadditive(f, i, j):
    grid = ef.probe_grid(1e-6, 1e6, 64)
    x, y = float(grid[i % len(grid)]), float(grid[j % len(grid)])
    # x + y is rounded in floats, so the slack scales with the magnitude
    rhs = float(f.eval(x)) + float(f.eval(y))
    assert float(f.eval(x + y)) <= rhs + 1e-12 * max(1.0, rhs)


def _build(f, ops):
    e = f
    for op, k in ops:
        if op == "add":
            e = ef.add(e, f if k % 2 else e)
        elif op == "compose":
            e = ef.compose(e, f) if k % 2 else ef.compose(f, e)
        else:
            e = ef.scale(Fraction(k + 1, 2), e)
    return e


@settings(max_examples=200, deadline=None)
@given(icod_pwl(max_pieces=3),
       st.lists(st.tuples(st.sampled_from(["add", "compose", "scale"]), st.integers(0, 5)), max_size=4))
def test_domination_by_iterate_sums(f, ops):
    f0 = _build(f, ops)
    coeffs = ef.iterate_domination(f0, f)
    assert coeffs is not None
    xs = ef.probe_grid(1e-8, 1e8, 16)
    bound = sum(n * ef.iterate(f, k).eval_array(xs) for k, n in coeffs.items())
    assert np.all(f0.eval_array(xs) <= bound * (1 + 1e-12) + 1e-300)


CORPUS = [SQRT, ef.sqrt_capped(), ef.x_plus_one(), ef.truncated_identity(), ef.Series(SQRT, depth=8),
          ef.compose(SQRT, ef.Power(4, 1)), ef.iterate(SQRT, 3), ef.add(SQRT, ef.identity()),
          ef.PWL([(0, 0), (1, 2), (3, 3)], tail_slope=Fraction(1, 4)), ef.scale(5, ef.sqrt_capped()),
          ef.pointwise_max(SQRT, ef.scale(HALF, ef.identity()))]


@pytest.mark.parametrize("f", CORPUS)
def test_loglog_agrees_with_eval(f):
    for x in ef.probe_grid(1e-30, 1e30, 8):
        v = float(f.eval(float(x)))
        if 0 < v < math.inf:
            assert abs(float(f.loglog(math.log(x))) - math.log(v)) <= 1e-9


@pytest.mark.parametrize("f", CORPUS)
@pytest.mark.parametrize("endpoint", [ef.AT_ZERO, ef.AT_INF])
def test_germ_soundness(f, endpoint):
    ok, pred, got = ef.germ_soundness(f, endpoint)
    assert ok, (pred, got)

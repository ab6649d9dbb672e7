import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from suppexp import extfun as ef
from suppexp import oplab
from suppexp.errors import HypothesisViolation
from suppexp.suite import capped_half

H = Fraction(1, 1024)
h = float(H)


def identity_op(n=64, cell=Fraction(1, 64)):
    g = oplab.Grid(h=cell, length=n * cell)
    return oplab.GridOperator(sp.identity(n, format="csr"), g, label="id")


def coverage_oracle(op, k):
    """Weighted max coverage by enumeration: each active entry occupies h of its row."""
    m = op.support_mask().toarray()
    cols = [set(np.nonzero(m[:, j])[0]) for j in range(m.shape[1])]
    k = min(k, len(cols))
    return op.h * max(len(set().union(*(cols[j] for j in c))) for c in itertools.combinations(range(len(cols)), k))


# ---------------------------------------------------------------- weighted compositions

def test_weighted_composition_phi_example():
    op = oplab.build_weighted_composition(capped_half(), 2, oplab.Grid(h=H))
    got = oplab.measure_phi(op, [1.0]).values[0]
    assert abs(got - 0.5) <= 2 * h


def test_weighted_composition_identity():
    op = oplab.build_weighted_composition(ef.identity(), 1, oplab.Grid(h=Fraction(1, 64), length=2))
    d = op.dense()
    assert np.allclose(d[:64, :64], np.eye(64)) and not d[64:].any() and not d[:, 64:].any()
    xs = [0.25, 0.5, 1.0, 1.5]
    assert np.allclose(oplab.measure_phi(op, xs).values, np.minimum(xs, 1), atol=2 / 64)


def test_weighted_composition_sqrt():
    op = oplab.build_weighted_composition(ef.sqrt_capped(), 1, oplab.Grid(h=H))
    xs = [0.01, 0.25, 1.0]
    got = oplab.measure_phi(op, xs).values
    assert np.all(np.abs(got - np.sqrt(xs)) <= 5 * math.sqrt(h))


def test_weighted_composition_norm():
    op = oplab.build_weighted_composition(ef.sqrt_capped(), 1, oplab.Grid(h=Fraction(1, 256)))
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.normal(size=op.shape[1])
        assert np.linalg.norm(oplab.apply(op, v)) <= (1 + 5 * math.sqrt(1 / 256)) * np.linalg.norm(v)


def test_weighted_composition_rejects_flat():
    flat = ef.PWL([(0, 0), (1, 1), (2, 1)])
    with pytest.raises(HypothesisViolation):
        oplab.build_weighted_composition(flat, 2, oplab.Grid(h=Fraction(1, 16), length=4))


# ---------------------------------------------------------------- adjoints

def test_adjoint_phi_example():
    op = oplab.build_weighted_composition(capped_half(), 2, oplab.Grid(h=H))
    xs = [0.5, 1.0, 3.0]
    got = oplab.measure_phi(oplab.adjoint(op), xs).values
    assert np.all(np.abs(got - np.minimum(2 * np.array(xs), 2)) <= 2 * h)


def test_identity_self_adjoint():
    op = identity_op()
    assert (oplab.adjoint(op).kernel != op.kernel).nnz == 0


@pytest.mark.parametrize("seed", range(5))
def test_adjoint_inner_product(seed):
    op = oplab.random_block_operator(40, 0.1, seed=seed)
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=40), rng.normal(size=40)
    lhs = np.dot(oplab.apply(op, x), y)
    rhs = np.dot(x, oplab.apply(oplab.adjoint(op), y))
    assert abs(lhs - rhs) <= 1e-9


# ---------------------------------------------------------------- measurement

def test_identity_phi():
    op = oplab.build_weighted_composition(ef.identity(), 1, oplab.Grid(h=Fraction(1, 64), length=1))
    xs = [0.0, 0.25, 0.75, 1.0]
    assert np.allclose(oplab.measure_phi(op, xs).values, xs)


def test_phi_matches_f_for_example():
    op = oplab.build_weighted_composition(capped_half(), 2, oplab.Grid(h=H))
    xs = np.array([0.25, 1.0, 1.5, 2.0, 5.0])
    assert np.all(np.abs(oplab.measure_phi(op, xs).values - np.minimum(xs / 2, 1)) <= 2 * h)


@pytest.mark.parametrize("seed", range(10))
def test_random_block_exact_vs_enumeration(seed):
    op = oplab.random_block_operator(10, 0.25, seed=seed)
    vals, mode = oplab.phi_sequence(op)
    assert mode == "Exact"
    for k in range(11):
        assert abs(vals[k] - coverage_oracle(op, k)) <= 1e-12


def test_greedy_mode_tag():
    op = oplab.random_block_operator(10, 0.25, seed=1)
    s = oplab.measure_phi(op, [0.25, 0.5], "Greedy")
    assert s.mode == "GreedyLowerBound"
    assert all(row.endswith(",GreedyLowerBound") for row in s.csv().splitlines()[1:])
    exact = oplab.measure_phi(op, [0.25, 0.5]).values
    assert np.all(s.values <= exact + 1e-12)


def test_rank_one_full_support():
    g = oplab.Grid(h=Fraction(1, 8), length=2)
    op = oplab.build_rank_one(g)
    assert list(oplab.measure_phi(op, [0, 0.125, 1, 2]).values) == [0, 2, 2, 2]


# ---------------------------------------------------------------- separators

def test_haar_phi_bounded_but_not_small():
    op = oplab.build_haar_separator(6, oplab.Grid(h=H, length=1))
    assert abs(oplab.measure_phi(op, [0.01]).values[0] - 1) <= 2 * h
    xs = np.linspace(0, 1, 17)
    assert np.all(oplab.measure_phi(op, xs).values <= 1 + 2 * h)
    assert np.all(oplab.measure_phi(oplab.adjoint(op), xs).values <= 1 + 2 * h)


def test_haar_single_term():
    g = oplab.Grid(h=Fraction(1, 16), length=1)
    op = oplab.build_haar_separator(1, g)
    # I_1 = [0, 1/2] maps onto eta_1, supported on all of (0, 1)
    assert set(np.unique(op.support_mask().nonzero()[1])) == set(range(8))
    assert len(op.left_support()) * op.h == 1


def test_haar_witness_norm():
    op = oplab.build_haar_separator(6, oplab.Grid(h=H, length=1))
    for n, xi in op.meta["witnesses"].items():
        assert abs(np.linalg.norm(oplab.apply(op, xi)) - 1) <= 1e-12


def test_dyadic_residual():
    op = oplab.build_dyadic_separator(8)
    res = oplab.dyadic_column_residual(op, 8, 4)
    assert res["bound"] == (2 ** 8 - 4) / 2 ** 8 == 0.984375
    assert res["residual"] >= res["bound"] - 1e-12


def test_dyadic_first_term():
    op = oplab.build_dyadic_separator(3)
    g = op.grid
    assert np.allclose(oplab.apply(op, g.indicator(0, 1)), g.indicator(1, 2))


def test_dyadic_norm():
    op = oplab.build_dyadic_separator(6)
    rng = np.random.default_rng(1)
    for _ in range(50):
        v = rng.normal(size=op.shape[1])
        assert np.linalg.norm(oplab.apply(op, v)) <= np.linalg.norm(v) * (1 + 1e-12)


# ---------------------------------------------------------------- distance and collapse

def test_distance_sqrt_vs_identity():
    rep = oplab.distance_lower_bound(ef.sqrt_capped(), 1, ef.identity(), Fraction(1, 100))
    assert abs(rep.bound - (1 - 0.01 / 0.1)) <= 1e-12
    assert rep.adversary_min >= rep.bound - 5 * math.sqrt(h)


def test_distance_same_function():
    f = ef.sqrt_capped()
    assert oplab.distance_lower_bound(f, 1, f, Fraction(1, 3), oplab.Grid(h=Fraction(1, 256))).bound == 0


def test_distance_halves():
    g = ef.pointwise_min(ef.scale(Fraction(1, 4), ef.identity()), ef.Const(1))
    rep = oplab.distance_lower_bound(capped_half(), 2, g, 1, oplab.Grid(h=Fraction(1, 256)))
    assert abs(rep.bound - 0.5) <= 1e-12
    assert rep.adversary_min >= 0.5 - 5 * math.sqrt(1 / 256)


def test_distance_rejects_bad_x0():
    with pytest.raises(HypothesisViolation):
        oplab.distance_lower_bound(ef.sqrt_capped(), 1, ef.identity(), 2)


def test_collapse_example():
    op = oplab.build_weighted_composition(capped_half(), 2, oplab.Grid(h=H))
    rep = oplab.collapse_check(op, step=1 / 64)
    assert (rep.r_a, rep.r_adj, rep.s_a, rep.flat_after) == (0.0, 2.0, 2.0, True)


def test_collapse_identity():
    rep = oplab.collapse_check(identity_op())
    assert rep.s_a == math.inf and rep.flat_after is None


@pytest.mark.parametrize("seed", range(8))
def test_collapse_self_adjoint_random(seed):
    op = oplab.random_block_operator(12, 0.2, seed=seed, self_adjoint=True)
    rep = oplab.collapse_check(op)
    assert rep.s_a == math.inf or rep.flat_after


# ---------------------------------------------------------------- laws

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.05, 0.4))
def test_isod_law_random(seed, density):
    op = oplab.random_block_operator(12, density, seed=seed)
    vals, mode = oplab.phi_sequence(op)
    assert mode == "Exact"
    assert oplab.isod_law(op.h * np.arange(len(vals)), vals, op.h)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_product_and_sum_laws(seed):
    a = oplab.random_block_operator(12, 0.2, seed=seed)
    b = oplab.random_block_operator(12, 0.2, seed=seed + 1)
    pa, va, _ = oplab.phi_function(a)
    _, vb, _ = oplab.phi_function(b)
    _, vab, _ = oplab.phi_function(a @ b)
    _, vs, _ = oplab.phi_function(a + b)
    for k in range(13):
        assert vab[k] <= pa(vb[k]) + 4 * a.h + 1e-12
        assert vs[k] <= va[k] + vb[k] + 4 * a.h + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_left_support_identities(seed):
    a = oplab.random_block_operator(14, 0.2, seed=seed)
    aa = oplab.GridOperator(a.kernel @ a.kernel.T, a.grid)
    assert np.array_equal(aa.left_support(), a.left_support())
    s = oplab.random_block_operator(14, 0.2, seed=seed, self_adjoint=True)
    d = np.zeros(14)
    d[s.left_support()] = 1
    assert np.allclose((s.kernel @ sp.diags(d)).toarray(), s.dense())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 6))
def test_truncation_never_increases_phi(seed, j):
    a = oplab.random_block_operator(12, 0.3, seed=seed)
    full, _ = oplab.phi_sequence(a)
    cut, _ = oplab.phi_sequence(a.truncate(6 - j, 6 + j))
    assert np.all(np.asarray(cut) <= np.asarray(full) + 1e-12)


def test_coo_export_header():
    op = oplab.build_dyadic_separator(2)
    text = op.export_coo()
    head, first = text.splitlines()[:2]
    assert head == "# h=1/4 origin=0 dims=32x32"
    i, j, v = first.split()
    float(v)

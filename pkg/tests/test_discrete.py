import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from suppexp import discrete
from suppexp.discrete import SparsePattern
from _strategies import patterns


def coverage_oracle(p: SparsePattern, k: int) -> int:
    """max over k-subsets of columns of the size of their row union, by enumeration."""
    k = min(k, p.n_cols)
    return max((len(set().union(*(p.columns[j] for j in c))) for c in itertools.combinations(range(p.n_cols), k)),
               default=0)


def test_example_pattern_phi():
    phi = discrete.phi_sequence(discrete.example_pattern(), 4, "Exact")
    assert tuple(phi.values) == (0, 3, 4, 6, 6)
    assert phi.mode == "Exact"


def test_identity_pattern_phi():
    p = SparsePattern(7, 7, [[i] for i in range(7)])
    assert list(discrete.phi_sequence(p, 7).values) == list(range(8))


def test_random_8x8_exact_vs_enumeration():
    rng = np.random.default_rng(8)
    cols = [sorted(set(np.nonzero(rng.random(8) < 0.35)[0].tolist())) for _ in range(8)]
    p = SparsePattern(8, 8, cols)
    got = list(discrete.phi_sequence(p, 8).values)
    assert got == [coverage_oracle(p, k) for k in range(9)]
    assert got == list(discrete.exhaustive_phi(p, 8))


def test_rc_finite_examples():
    assert str(discrete.is_rc_finite(SparsePattern(5, 5, [[i] for i in range(5)]))) == "Yes(1)"
    assert str(discrete.is_rc_finite(discrete.example_pattern())) == "Yes(3)"
    assert str(discrete.is_rc_finite(SparsePattern(6, 2, [list(range(6)), [0]]))) == "Yes(6)"


def test_left_support_examples():
    assert discrete.left_support(discrete.example_pattern()) == frozenset(range(6))
    assert discrete.left_support(SparsePattern(3, 3, [[], [], []])) == frozenset()


@settings(max_examples=200, deadline=None)
@given(patterns())
def test_adjoint_involution(p):
    q = discrete.adjoint(discrete.adjoint(p))
    assert q.to_json() == p.to_json()


def test_combo_disjoint_supports():
    assert str(discrete.random_combo_support_check([{0: 1}, {1: 1}], coefficients=[3, -7])) == "UnionAchieved"


def test_combo_forced_cancellation():
    res = discrete.random_combo_support_check([{0: 1}, {0: -1}], coefficients=[1, 1])
    assert str(res) == "CancellationAt(2)"


def test_combo_random_families():
    rng = np.random.default_rng(3)
    for seed in range(100):
        vecs = []
        for _ in range(int(rng.integers(1, 6))):
            idx = rng.choice(12, size=int(rng.integers(1, 5)), replace=False)
            vecs.append({int(i): Fraction(int(rng.integers(-9, 10)) or 1, int(rng.integers(1, 5))) for i in idx})
        res = discrete.random_combo_support_check(vecs, seed=seed)
        # oracle: recompute the partial sums directly
        acc, union = {}, set()
        for lam, v in zip(res.coefficients, vecs):
            for i, x in v.items():
                acc[i] = acc.get(i, 0) + lam * x
            union |= set(v)
            assert {i for i, x in acc.items() if x != 0} == union
        assert res.union_achieved


def test_pattern_coo_round_trip(tmp_path):
    p = discrete.example_pattern()
    path = tmp_path / "p.txt"
    path.write_text(p.to_coo_text())
    assert discrete.load_pattern(str(path)).to_json() == p.to_json()


# ---------------------------------------------------------------- properties

@settings(max_examples=1000, deadline=None)
@given(patterns())
def test_phi_sequence_invariants(p):
    vals = list(discrete.phi_sequence(p, p.n_cols).values)
    assert vals[0] == 0
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert all(v <= n * vals[1] for n, v in enumerate(vals)) if len(vals) > 1 else True
    for n in range(1, len(vals) - 1):
        if vals[n] == vals[n + 1]:
            assert all(v == vals[n] for v in vals[n:])
            break


@settings(max_examples=300, deadline=None)
@given(patterns(max_cols=7))
def test_exact_matches_enumeration(p):
    assert list(discrete.phi_sequence(p, p.n_cols).values) == [coverage_oracle(p, k) for k in range(p.n_cols + 1)]


@settings(max_examples=300, deadline=None)
@given(patterns(max_rows=8, max_cols=6), patterns(max_rows=8, max_cols=6))
def test_product_and_sum_laws(a, b):
    # resize so the shapes compose: a is r x m, b is m x c
    b = SparsePattern(a.n_cols, b.n_cols, [[i for i in c if i < a.n_cols] for c in b.columns])
    pa = list(discrete.phi_sequence(a, a.n_cols).values)
    pb = list(discrete.phi_sequence(b, b.n_cols).values)
    pab = list(discrete.phi_sequence(discrete.product(a, b), b.n_cols).values)
    phi_a = lambda n: pa[min(n, len(pa) - 1)]
    assert all(pab[n] <= phi_a(pb[n]) for n in range(len(pab)))
    c = SparsePattern(a.n_rows, a.n_cols, [[i for i in col] for col in a.columns[::-1]])
    pc = list(discrete.phi_sequence(c, c.n_cols).values)
    ps = list(discrete.phi_sequence(discrete.union(a, c), a.n_cols).values)
    assert all(ps[n] <= pa[n] + pc[n] for n in range(len(ps)))


@settings(max_examples=200, deadline=None)
@given(patterns(max_cols=8), st.integers(0, 10 ** 6))
def test_vector_supports_never_exceed_coverage(p, seed):
    for cols, size in discrete.vector_support_sizes(p, p.n_cols, 5, seed):
        union = len(set().union(*(p.columns[j] for j in cols))) if cols else 0
        assert size <= union
        assert size == union  # random 20-bit coefficients: cancellation has probability ~0


@settings(max_examples=300, deadline=None)
@given(patterns(max_cols=10))
def test_greedy_within_one_minus_inverse_e(p):
    ex = discrete.phi_sequence(p, p.n_cols, "Exact").values
    gr = discrete.phi_sequence(p, p.n_cols, "Greedy")
    assert gr.mode == "GreedyLowerBound"
    for e, g in zip(ex, gr.values):
        assert e >= g >= (1 - 1 / math.e) * e - 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=10),
       st.lists(st.integers(-5, 5), min_size=10, max_size=10))
def test_support_lower_semicontinuous(v, w):
    """supp(lim v_n) is contained in supp(v_n) for all large n, along v + w/n."""
    v = np.array(v, dtype=float)
    w = np.array(w[:len(v)], dtype=float)
    limit = set(np.nonzero(v)[0])
    for n in (10 ** 3, 10 ** 6, 10 ** 9):
        assert limit <= set(np.nonzero(v + w / n)[0])


def test_greedy_upper_column():
    phi = discrete.phi_sequence(discrete.example_pattern(), 4, "Greedy")
    assert all(g <= u for g, u in zip(phi.values, phi.upper))


@pytest.mark.parametrize("bad", [([1, 0], None), ([0, 2, 1], None), ([0, 1], ("cubic", 1, 1))])
def test_int_sequence_rejects(bad):
    with pytest.raises(ValueError):
        discrete.IntSequence(*bad)

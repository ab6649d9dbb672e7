"""Shared hypothesis strategies for random piecewise-linear functions and patterns."""
from fractions import Fraction

from hypothesis import strategies as st

from suppexp import discrete
from suppexp import extfun as ef

small_q = st.builds(Fraction, st.integers(1, 12), st.integers(1, 6))


@st.composite
def icod_pwl(draw, max_pieces=5):
    """Increasing concave PWL through rational breakpoints (slopes decreasing)."""
    n = draw(st.integers(1, max_pieces))
    dxs = draw(st.lists(small_q, min_size=n, max_size=n))
    slopes = sorted(draw(st.lists(small_q, min_size=n + 1, max_size=n + 1)), reverse=True)
    pts, x, y = [(Fraction(0), Fraction(0))], Fraction(0), Fraction(0)
    for dx, s in zip(dxs, slopes):
        x, y = x + dx, y + s * dx
        pts.append((x, y))
    tail = slopes[-1] if draw(st.booleans()) else Fraction(0)
    return ef.PWL(pts, tail_slope=tail)


@st.composite
def isod_pwl(draw, max_pieces=5):
    """Increasing PWL with y/x decreasing at the breakpoints (so isod, not always concave)."""
    n = draw(st.integers(1, max_pieces))
    xs, x = [], Fraction(0)
    for dx in draw(st.lists(small_q, min_size=n, max_size=n)):
        x += dx
        xs.append(x)
    ys = [draw(small_q)]
    for a, b in zip(xs, xs[1:]):
        u = draw(st.integers(0, 4))
        ys.append(ys[-1] + Fraction(u, 4) * (ys[-1] * b / a - ys[-1]))
    tail = ys[-1] / xs[-1] * Fraction(draw(st.integers(0, 4)), 4)
    return ef.PWL([(Fraction(0), Fraction(0))] + list(zip(xs, ys)), tail_slope=tail)


@st.composite
def patterns(draw, max_rows=10, max_cols=8):
    n_rows = draw(st.integers(1, max_rows))
    n_cols = draw(st.integers(1, max_cols))
    cols = [sorted(draw(st.sets(st.integers(0, n_rows - 1), max_size=n_rows))) for _ in range(n_cols)]
    return discrete.SparsePattern(n_rows, n_cols, cols)

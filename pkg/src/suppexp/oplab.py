"""Discretised L2(R) laboratory.

Operators act on the orthonormal cell basis e_i = chi_{cell_i} / sqrt(h) of a
uniform grid.  Besides the kernel each operator carries an occupancy matrix:
entry (j, i) is the measure of supp(a e_i) inside cell j.  Support measures of
images are computed from occupancies, so a map that compresses a cell into
half a cell is measured as such instead of being rounded up to whole cells.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from . import extfun as ef
from .errors import BudgetExceeded, HypothesisViolation

EXACT_CLASS_CAP = 28
DEFAULT_H = Fraction(1, 1024)

__all__ = [
    "Grid", "GridOperator", "build_weighted_composition", "build_haar_separator",
    "build_dyadic_separator", "measure_phi", "distance_lower_bound", "collapse_check",
    "build_rank_one", "adjoint", "apply", "PhiSamples",
]


@dataclass(frozen=True)
class Grid:
    h: Fraction = DEFAULT_H
    origin: Fraction = Fraction(0)
    length: Fraction = Fraction(16)

    def __post_init__(self):
        object.__setattr__(self, "h", Fraction(self.h))
        object.__setattr__(self, "origin", Fraction(self.origin))
        object.__setattr__(self, "length", Fraction(self.length))
        n = self.length / self.h
        if n.denominator != 1 or n <= 0:
            raise ValueError("the cell width must divide the grid length")

    @property
    def n(self) -> int:
        return int(self.length / self.h)

    def edges(self) -> np.ndarray:
        return float(self.origin) + float(self.h) * np.arange(self.n + 1)

    def cell_of(self, x) -> int:
        return int(math.floor((Fraction(x) - self.origin) / self.h))

    def indicator(self, a, b) -> np.ndarray:
        """Cell coefficients of chi_[a, b]."""
        e = self.edges()
        overlap = np.clip(np.minimum(e[1:], float(b)) - np.maximum(e[:-1], float(a)), 0, None)
        return overlap / math.sqrt(float(self.h))


@dataclass
class GridOperator:
    kernel: sp.csr_matrix
    grid: Grid
    occupancy: sp.csr_matrix | None = None
    eps_supp: float = 1e-12
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kernel = sp.csr_matrix(self.kernel)
        if self.occupancy is not None:
            self.occupancy = sp.csr_matrix(self.occupancy)

    @property
    def h(self) -> float:
        return float(self.grid.h)

    @property
    def shape(self):
        return self.kernel.shape

    def support_mask(self) -> sp.csr_matrix:
        """Boolean pattern of entries above the relative support threshold."""
        k = self.kernel.tocsc()
        norms = np.sqrt(np.asarray(abs(k).power(2).sum(axis=0))).ravel()
        top = norms.max() if norms.size else 0.0
        if top == 0:
            return sp.csr_matrix(k.shape, dtype=bool)
        m = abs(k) > self.eps_supp * top
        return sp.csr_matrix(m)

    def occupancy_matrix(self) -> sp.csc_matrix:
        mask = self.support_mask()
        if self.occupancy is None:
            return (mask.astype(float) * self.h).tocsc()
        return self.occupancy.multiply(mask).tocsc()

    def left_support(self) -> np.ndarray:
        """Rows carrying a nonzero entry."""
        return np.unique(self.support_mask().nonzero()[0])

    def dense(self):
        return self.kernel.toarray()

    def truncate(self, lo: int, hi: int) -> "GridOperator":
        """p a p where p keeps the cells lo..hi-1."""
        d = np.zeros(self.shape[0])
        d[lo:hi] = 1
        p = sp.diags(d)
        occ = None if self.occupancy is None else p @ self.occupancy @ p
        return GridOperator(p @ self.kernel @ p, self.grid, occ, self.eps_supp, self.label + "|trunc")

    def export_coo(self) -> str:
        k = self.kernel.tocoo()
        head = f"# h={self.grid.h} origin={self.grid.origin} dims={self.shape[0]}x{self.shape[1]}"
        rows = [head] + [f"{i} {j} {float(v)!r}" for i, j, v in zip(k.row, k.col, k.data)]
        return "\n".join(rows) + "\n"

    def __matmul__(self, other: "GridOperator") -> "GridOperator":
        return GridOperator(self.kernel @ other.kernel, self.grid, None, self.eps_supp, "product")

    def __add__(self, other: "GridOperator") -> "GridOperator":
        return GridOperator(self.kernel + other.kernel, self.grid, None, self.eps_supp, "sum")


def apply(op: GridOperator, xi) -> np.ndarray:
    return op.kernel @ np.asarray(xi)


def adjoint(op: GridOperator) -> GridOperator:
    occ = op.meta.get("adjoint_occupancy")
    back = op.occupancy
    out = GridOperator(op.kernel.conj().T.tocsr(), op.grid, occ, op.eps_supp, op.label + "*")
    if back is not None:
        out.meta["adjoint_occupancy"] = back
    return out


# ---------------------------------------------------------------- constructors

def build_weighted_composition(f: ef.ExtFun, r, grid: Grid | None = None) -> GridOperator:
    """(a xi)(y) = sqrt((f^-1)'(y)) xi(f^-1(y)) on [0, f(r)], built from cells of [0, r].

    Entry (j, i) is p_ji / sqrt(h L_i), where L_i is the length of f(cell_i)
    and p_ji the overlap of f(cell_i) with cell j.
    """
    grid = grid or Grid()
    r = Fraction(r)
    h = float(grid.h)
    if grid.origin != 0:
        raise HypothesisViolation("weighted compositions are built on grids starting at 0")
    ncols = int(math.floor(r / grid.h))
    if ncols <= 0 or r > grid.length:
        raise HypothesisViolation("r must lie inside the grid and exceed one cell")
    xs = [Fraction(i) * grid.h for i in range(ncols + 1)]
    ys = [float(f.eval(x)) for x in xs]
    if ys[0] != 0:
        raise HypothesisViolation("f must vanish at 0")
    if any(b <= a for a, b in zip(ys, ys[1:])):
        raise HypothesisViolation("f must be strictly increasing (injective) on [0, r]")
    if ys[-1] > float(grid.length):
        raise HypothesisViolation("f(r) exceeds the grid")
    rows, cols, vals, occ, adj = [], [], [], [], []
    for i in range(ncols):
        y0, y1 = ys[i], ys[i + 1]
        L = y1 - y0
        j0, j1 = int(math.floor(y0 / h)), min(int(math.ceil(y1 / h)), grid.n)
        for j in range(j0, j1):
            p = min(y1, (j + 1) * h) - max(y0, j * h)
            if p <= 0:
                continue
            rows.append(j); cols.append(i)
            vals.append(p / math.sqrt(h * L))
            occ.append(p)
            adj.append(p * h / L)
    n = grid.n
    k = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    o = sp.csr_matrix((occ, (rows, cols)), shape=(n, n))
    op = GridOperator(k, grid, o, label="a_{f,r}")
    op.meta["adjoint_occupancy"] = sp.csr_matrix((adj, (cols, rows)), shape=(n, n))
    op.meta["f"], op.meta["r"] = f, r
    return op


def _rademacher(n: int, centers: np.ndarray) -> np.ndarray:
    """+1 / -1 on alternating dyadic intervals of length 2^-n inside (0, 1)."""
    inside = (centers > 0) & (centers < 1)
    k = np.floor(centers * 2 ** n).astype(np.int64)
    return np.where(inside, np.where(k % 2 == 0, 1.0, -1.0), 0.0)


def build_haar_separator(K: int, grid: Grid | None = None) -> GridOperator:
    """a xi = sum_{n=1..K} sqrt(2^n) <xi, chi_{I_n}> eta_n with I_n = [(2^n-2)/2^n, (2^n-1)/2^n]."""
    grid = grid or Grid(length=1)
    step = Fraction(1, 2 ** K)
    if (step / grid.h).denominator != 1 or grid.origin != 0 or grid.length < 1:
        raise ValueError("the grid must start at 0, cover [0, 1] and resolve 2^-K intervals")
    h = float(grid.h)
    centers = grid.edges()[:-1] + h / 2
    rows, cols, vals = [], [], []
    witnesses = {}
    for n in range(1, K + 1):
        lo, hi = Fraction(2 ** n - 2, 2 ** n), Fraction(2 ** n - 1, 2 ** n)
        eta = _rademacher(n, centers)
        nz = np.nonzero(eta)[0]
        for i in range(grid.cell_of(lo), grid.cell_of(hi)):
            rows.extend(nz.tolist()); cols.extend([i] * len(nz))
            vals.extend((math.sqrt(2 ** n) * h * eta[nz]).tolist())
        witnesses[n] = math.sqrt(2 ** n) * grid.indicator(lo, hi)
    k = sp.csr_matrix((vals, (rows, cols)), shape=(grid.n, grid.n))
    op = GridOperator(k, grid, label=f"haar(K={K})")
    op.meta["witnesses"] = witnesses
    return op


def build_dyadic_separator(K: int, grid: Grid | None = None) -> GridOperator:
    """a xi = sum_{n=0..K} 2^{-n/2} <xi, chi_[n, n+1]> chi_[2^n, 2^{n+1}]."""
    grid = grid or Grid(h=Fraction(1, 4), length=2 ** (K + 1))
    if grid.origin != 0 or grid.origin + grid.length < 2 ** (K + 1) or (1 / grid.h).denominator != 1:
        raise ValueError(f"the grid must span [0, {2 ** (K + 1)}] with cells dividing 1")
    rows, cols, vals = [], [], []
    for n in range(K + 1):
        src = grid.indicator(n, n + 1)
        dst = grid.indicator(2 ** n, 2 ** (n + 1))
        ci, ri = np.nonzero(src)[0], np.nonzero(dst)[0]
        for i in ci:
            rows.extend(ri.tolist()); cols.extend([int(i)] * len(ri))
            vals.extend((dst[ri] * src[i] / math.sqrt(2 ** n)).tolist())
    k = sp.csr_matrix((vals, (rows, cols)), shape=(grid.n, grid.n))
    return GridOperator(k, grid, label=f"dyadic(K={K})")


def build_rank_one(grid: Grid | None = None, vector=None) -> GridOperator:
    """Projection onto one unit vector with full support on the grid interval.

    The finite stand-in for an operator whose support expansion function is
    infinite on (0, inf]: every column reaches every row, so Phi(x) equals the
    grid length for x >= h.  A finite grid cannot carry infinite support, so
    this only mirrors the qualitative behaviour.
    """
    grid = grid or Grid()
    if vector is None:
        centers = grid.edges()[:-1] + float(grid.h) / 2
        vector = np.exp(-centers)
    v = np.asarray(vector, dtype=float)
    v = v / np.linalg.norm(v)
    op = GridOperator(sp.csr_matrix(np.outer(v, v)), grid, label="rank-one")
    op.meta["vector"] = v
    return op


def dyadic_column_residual(op: GridOperator, n: int, budget) -> dict:
    """min over b with supp(b chi_[n,n+1]) of measure <= budget of ||(a - b) chi_[n,n+1]||^2."""
    xi = op.grid.indicator(n, n + 1)
    v = apply(op, xi)
    cells = int(math.floor(Fraction(budget) / op.grid.h))
    kept = np.sort(v ** 2)[::-1][:cells].sum()
    total = float((v ** 2).sum())
    return {"column": n, "budget": str(budget), "norm_sq": total, "residual": total - float(kept),
            "bound": (2 ** n - float(budget)) / 2 ** n}


# ---------------------------------------------------------------- Phi measurement

@dataclass
class PhiSamples:
    xs: np.ndarray
    values: np.ndarray
    mode: str

    def csv(self) -> str:
        lines = ["x,phi,mode"]
        lines += [f"{x!r},{v!r},{self.mode}" for x, v in zip(self.xs.tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"

    def to_json(self):
        return {"x": self.xs.tolist(), "phi": self.values.tolist(), "mode": self.mode}


def _coverage(occ_rows: list, h: float, chosen) -> float:
    acc = {}
    for i in chosen:
        for r, v in occ_rows[i].items():
            acc[r] = acc.get(r, 0.0) + v
    return sum(min(h, v) for v in acc.values())


def _columns(occ: sp.csc_matrix):
    out = []
    for i in range(occ.shape[1]):
        s, e = occ.indptr[i], occ.indptr[i + 1]
        out.append(dict(zip(occ.indices[s:e].tolist(), occ.data[s:e].tolist())))
    return out


def _bb_weighted(cols: list, h: float, k: int, seed_val: float) -> float:
    """Branch and bound for max sum_r min(h, sum occ) using at most k columns."""
    cols = sorted(cols, key=lambda c: -sum(min(h, v) for v in c.values()))
    n = len(cols)
    best = seed_val

    def gain(c, acc):
        return sum(min(h, acc.get(r, 0.0) + v) - min(h, acc.get(r, 0.0)) for r, v in c.items())

    def dfs(start, left, acc, val):
        nonlocal best
        if val > best:
            best = val
        if left == 0 or start >= n:
            return
        gains = sorted((gain(cols[i], acc) for i in range(start, n)), reverse=True)
        if val + sum(gains[:left]) <= best + 1e-15:
            return
        for i in range(start, n):
            g = gain(cols[i], acc)
            if g <= 0:
                continue
            nxt = dict(acc)
            for r, v in cols[i].items():
                nxt[r] = nxt.get(r, 0.0) + v
            dfs(i + 1, left - 1, nxt, val + g)

    dfs(0, k, {}, 0.0)
    return best


def _greedy_weighted(cols: list, h: float, kmax: int) -> list:
    """Lazy greedy; returns coverage after 0..kmax picks."""
    acc, out = {}, [0.0]
    heap = [(-sum(min(h, v) for v in c.values()), i) for i, c in enumerate(cols)]
    heapq.heapify(heap)
    total = 0.0
    while len(out) <= kmax and heap:
        neg, i = heapq.heappop(heap)
        g = sum(min(h, acc.get(r, 0.0) + v) - min(h, acc.get(r, 0.0)) for r, v in cols[i].items())
        if heap and g < -heap[0][0] - 1e-15:
            heapq.heappush(heap, (-g, i))
            continue
        if g <= 0:
            break
        for r, v in cols[i].items():
            acc[r] = acc.get(r, 0.0) + v
        total += g
        out.append(total)
    while len(out) <= kmax:
        out.append(total)
    return out


def phi_sequence(op: GridOperator, kmax: int | None = None, mode: str = "Exact"):
    """Phi(k h) for k = 0..kmax; returns (values, mode_tag)."""
    occ = op.occupancy_matrix()
    h = op.h
    n = occ.shape[1]
    kmax = n if kmax is None else min(kmax, n)
    row_sums = np.asarray(occ.sum(axis=1)).ravel()
    colmass = np.asarray(np.minimum(occ.toarray() if n <= 2048 else occ.todense(), h).sum(axis=0)).ravel() \
        if n <= 4096 else None
    if row_sums.size and row_sums.max() <= h * (1 + 1e-9):
        # disjoint images: coverage is additive so the best columns are the heaviest
        if colmass is None:
            colmass = np.asarray(occ.sum(axis=0)).ravel()
        vals = np.concatenate([[0.0], np.cumsum(np.sort(colmass)[::-1])])[: kmax + 1]
        return vals, "Exact"
    cols = [c for c in _columns(occ) if c]
    if mode == "Greedy":
        return np.array(_greedy_weighted(cols, h, kmax)), "GreedyLowerBound"
    # distinct columns; duplicates only help when occupancies do not saturate
    distinct = {}
    for c in cols:
        key = tuple(sorted(c.items()))
        distinct.setdefault(key, []).append(c)
    saturating = all(abs(v - h) <= 1e-12 * h for c in cols for v in c.values())
    if saturating:
        pool = [v[0] for v in distinct.values()]
    elif len(cols) <= EXACT_CLASS_CAP:
        pool = cols
    else:
        raise BudgetExceeded(
            f"exact measurement needs at most {EXACT_CLASS_CAP} column classes, got {len(distinct)}")
    if len(pool) > EXACT_CLASS_CAP:
        raise BudgetExceeded(
            f"exact measurement needs at most {EXACT_CLASS_CAP} column classes, got {len(pool)}")
    greedy = _greedy_weighted(pool, h, len(pool))
    vals = [0.0]
    full = greedy[-1]
    for k in range(1, kmax + 1):
        if k >= len(pool):
            vals.append(full)
        else:
            vals.append(_bb_weighted(pool, h, k, greedy[k]))
    return np.array(vals), "Exact"


def measure_phi(op: GridOperator, x_values, mode: str = "Exact") -> PhiSamples:
    xs = np.asarray(x_values, dtype=float)
    h = op.h
    ks = np.floor(xs / h + 1e-9).astype(np.int64)
    ks = np.clip(ks, 0, op.shape[1])
    vals, tag = phi_sequence(op, int(ks.max()) if ks.size else 0, mode)
    out = vals[np.minimum(ks, len(vals) - 1)]
    return PhiSamples(xs, out, tag)


def phi_function(op: GridOperator, mode: str = "Exact"):
    """Step function x -> Phi(floor(x/h) h) of the measured sequence."""
    vals, tag = phi_sequence(op, None, mode)
    h = op.h

    def phi(x):
        k = int(min(math.floor(float(x) / h + 1e-9), len(vals) - 1))
        return float(vals[max(k, 0)])

    return phi, vals, tag


# ---------------------------------------------------------------- distance bounds

@dataclass
class DistanceReport:
    bound: float
    x0: float
    f_x0: float
    g_x0: float
    witness: np.ndarray
    image: np.ndarray
    adversary_min: float | None = None
    restarts: int = 0

    def to_json(self):
        return {"bound": self.bound, "x0": self.x0, "f_x0": self.f_x0, "g_x0": self.g_x0,
                "adversary_min_residual": self.adversary_min, "restarts": self.restarts}


def distance_lower_bound(f: ef.ExtFun, r, g: ef.ExtFun, x0, grid: Grid | None = None,
                         restarts: int = 32, seed: int = 0) -> DistanceReport:
    """d(a_{f,r}, B_g)^2 >= 1 - g(x0)/f(x0), with the witness and an adversarial check.

    The witness is xi = sqrt(f') / sqrt(f(x0)) on [0, x0]; an adversary b with
    supp(b xi) of measure at most g(x0) can at best keep the part of a xi on
    its support, so its residual is ||a xi||^2 minus the kept mass.
    """
    grid = grid or Grid()
    x0, r = Fraction(x0), Fraction(r)
    if not (0 < x0 <= r):
        raise HypothesisViolation("x0 must lie in (0, r]")
    if f.germ0.kind in (ef.POSITIVE_LIMIT, ef.INFINITE):
        raise HypothesisViolation("f must tend to 0 at 0")
    if not ef.check_class(g, "ISOD").ok:
        raise HypothesisViolation("g must be ISOD")
    fx0, gx0 = float(f.eval(x0)), float(g.eval(x0))
    bound = max(0.0, 1.0 - gx0 / fx0)
    op = build_weighted_composition(f, r, grid)
    h = float(grid.h)
    m = int(math.floor(x0 / grid.h))
    edges = [float(f.eval(Fraction(i) * grid.h)) for i in range(m + 1)]
    lengths = np.diff(edges)
    xi = np.zeros(grid.n)
    xi[:m] = np.sqrt(lengths / fx0)
    part = float(x0 - m * grid.h)
    if part > 0 and m < grid.n:
        # partial last cell: <xi, e_m> ~ sqrt(part * L) / sqrt(h f(x0))
        L = float(f.eval(x0)) - edges[-1]
        xi[m] = math.sqrt(part * L / (h * fx0))
    v = apply(op, xi)
    report = DistanceReport(bound, float(x0), fx0, gx0, xi, v)
    cells = int(math.floor(gx0 / h + 1e-9))
    w = v ** 2
    total = float(w.sum())
    rng = np.random.default_rng(seed)
    nz = np.nonzero(w)[0]
    best = total - float(np.sort(w)[::-1][:cells].sum())
    for _ in range(restarts - 1):
        # random start on the support, then greedy improvement by swapping in heavier cells
        pick = rng.choice(nz, size=min(cells, nz.size), replace=False) if nz.size else nz
        kept = set(pick.tolist())
        rest = sorted((i for i in nz if i not in kept), key=lambda i: -w[i])
        for i in rest:
            j = min(kept, key=lambda q: w[q]) if kept else None
            if j is None or w[i] <= w[j]:
                break
            kept.remove(j); kept.add(i)
        best = min(best, total - float(sum(w[i] for i in kept)))
    report.adversary_min = best
    report.restarts = restarts
    return report


# ---------------------------------------------------------------- collapse

@dataclass
class CollapseReport:
    r_a: float
    r_adj: float
    s_a: float
    flat_after: bool | None
    spread: float | None
    x_max: float

    def to_json(self):
        enc = lambda v: "inf" if v == math.inf else v
        return {"r_a": enc(self.r_a), "r_a_adjoint": enc(self.r_adj), "s_a": enc(self.s_a),
                "flat_after": self.flat_after, "spread": self.spread, "x_max": self.x_max}


def _first_drop(xs, vals):
    """Last sample before the first one with Phi(x) < x (no tolerance); inf if none."""
    for i, (x, v) in enumerate(zip(xs, vals)):
        if v < x:
            return float(xs[i - 1]) if i > 0 else float(x)
    return math.inf


def collapse_check(op: GridOperator, step=None, mode: str = "Exact") -> CollapseReport:
    h = op.h
    x_max = op.shape[1] * h
    step = h if step is None else float(step)
    xs = np.arange(0.0, x_max + step / 2, step)
    pa = measure_phi(op, xs, mode).values
    pb = measure_phi(adjoint(op), xs, mode).values
    r_a, r_b = _first_drop(xs, pa), _first_drop(xs, pb)
    s_a = max(r_a, r_b)
    if s_a == math.inf:
        return CollapseReport(r_a, r_b, s_a, None, None, x_max)
    tail = pa[xs >= s_a - 1e-12]
    spread = float(tail.max() - tail.min()) if tail.size else 0.0
    return CollapseReport(r_a, r_b, s_a, spread <= 2 * h, spread, x_max)


def isod_law(xs, vals, h) -> bool:
    """Increasing with slope-to-origin decreasing across samples, within 2h."""
    xs, vals = np.asarray(xs, float), np.asarray(vals, float)
    if np.any(np.diff(vals) < -2 * h):
        return False
    pos = xs > 0
    x, v = xs[pos], vals[pos]
    # v_j / x_j <= v_i / x_i + slack for x_i < x_j, i.e. v_j x_i <= v_i x_j + 2h x_j
    for i in range(len(x)):
        if np.any(v[i + 1:] * x[i] > v[i] * x[i + 1:] + 2 * h * x[i + 1:]):
            return False
    return True


def random_block_operator(n: int, density: float, seed: int, grid: Grid | None = None,
                          self_adjoint: bool = False) -> GridOperator:
    grid = grid or Grid(h=Fraction(1, 8), length=Fraction(n, 8))
    rng = np.random.default_rng(seed)
    a = (rng.random((n, n)) < density) * rng.normal(size=(n, n))
    if self_adjoint:
        a = a + a.T
    return GridOperator(sp.csr_matrix(a), grid, label="random")

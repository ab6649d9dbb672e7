"""Support expansion sequences of finite binary patterns on l2(N).

Phi(n) is the largest number of rows reachable from at most n columns, i.e.
a maximum-coverage problem over the column supports.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import BudgetExceeded

INF = float("inf")
EXACT_COLUMN_CAP = 28

__all__ = [
    "SparsePattern", "PhiSequence", "IntSequence", "phi_sequence", "is_rc_finite",
    "left_support", "adjoint", "random_combo_support_check", "exhaustive_phi",
    "example_pattern", "product", "union",
]


@dataclass(frozen=True)
class SparsePattern:
    n_rows: int
    n_cols: int
    columns: tuple  # tuple of sorted tuples of row indices

    def __init__(self, n_rows, n_cols, columns):
        if n_rows < 0 or n_cols < 0 or len(columns) != n_cols:
            raise ValueError("pattern shape does not match its column list")
        cols = []
        for c in columns:
            rows = tuple(sorted(set(int(r) for r in c)))
            if rows and (rows[0] < 0 or rows[-1] >= n_rows):
                raise ValueError("row index out of range")
            cols.append(rows)
        object.__setattr__(self, "n_rows", int(n_rows))
        object.__setattr__(self, "n_cols", int(n_cols))
        object.__setattr__(self, "columns", tuple(cols))

    # -- constructors
    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a)
        return cls(a.shape[0], a.shape[1], [np.nonzero(a[:, j])[0].tolist() for j in range(a.shape[1])])

    @classmethod
    def identity(cls, n):
        return cls(n, n, [[i] for i in range(n)])

    @classmethod
    def from_coo_text(cls, text: str):
        lines = [ln.split("#")[0].strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        n_rows, n_cols = (int(v) for v in lines[0].split())
        cols = [[] for _ in range(n_cols)]
        for ln in lines[1:]:
            r, c = (int(v) for v in ln.split()[:2])
            cols[c].append(r)
        return cls(n_rows, n_cols, cols)

    def to_coo_text(self) -> str:
        out = [f"{self.n_rows} {self.n_cols}"]
        for j, col in enumerate(self.columns):
            out.extend(f"{i} {j}" for i in col)
        return "\n".join(out) + "\n"

    @classmethod
    def from_json(cls, d):
        return cls(d["n_rows"], d["n_cols"], d["columns"])

    def to_json(self):
        return {"n_rows": self.n_rows, "n_cols": self.n_cols,
                "columns": [list(c) for c in self.columns]}

    def dense(self):
        a = np.zeros((self.n_rows, self.n_cols), dtype=bool)
        for j, col in enumerate(self.columns):
            a[list(col), j] = True
        return a

    def masks(self):
        return [sum(1 << i for i in col) for col in self.columns]

    def row_degrees(self):
        deg = [0] * self.n_rows
        for col in self.columns:
            for i in col:
                deg[i] += 1
        return deg


def example_pattern() -> SparsePattern:
    """The 6x4 pattern with columns {1,2},{3,4},{5,6},{1,3,5} (0-indexed here)."""
    return SparsePattern(6, 4, [[0, 1], [2, 3], [4, 5], [0, 2, 4]])


def adjoint(p: SparsePattern) -> SparsePattern:
    cols = [[] for _ in range(p.n_rows)]
    for j, col in enumerate(p.columns):
        for i in col:
            cols[i].append(j)
    return SparsePattern(p.n_cols, p.n_rows, cols)


def left_support(p: SparsePattern) -> frozenset:
    return frozenset(i for col in p.columns for i in col)


def product(a: SparsePattern, b: SparsePattern) -> SparsePattern:
    """Boolean pattern of the product a @ b."""
    if a.n_cols != b.n_rows:
        raise ValueError("inner dimensions differ")
    cols = [sorted({i for k in col for i in a.columns[k]}) for col in b.columns]
    return SparsePattern(a.n_rows, b.n_cols, cols)


def union(a: SparsePattern, b: SparsePattern) -> SparsePattern:
    """Pattern of a + b for generic (non-cancelling) entries."""
    if (a.n_rows, a.n_cols) != (b.n_rows, b.n_cols):
        raise ValueError("shapes differ")
    return SparsePattern(a.n_rows, a.n_cols,
                         [sorted(set(x) | set(y)) for x, y in zip(a.columns, b.columns)])


# ---------------------------------------------------------------- Phi

@dataclass(frozen=True)
class PhiSequence:
    values: tuple
    mode: str               # "Exact" or "GreedyLowerBound"
    upper: tuple = ()       # for greedy mode: values[1] * n capped by the union size

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return len(self.values)

    def csv(self) -> str:
        head = "n,phi,mode" + (",upper" if self.upper else "")
        rows = [head]
        for n, v in enumerate(self.values):
            row = f"{n},{v},{self.mode}"
            if self.upper:
                row += f",{self.upper[n]}"
            rows.append(row)
        return "\n".join(rows) + "\n"

    def to_json(self):
        d = {"values": list(self.values), "mode": self.mode}
        if self.upper:
            d["upper"] = list(self.upper)
        return d


def _greedy_nested(masks):
    """Greedy order: each step adds the column with the largest marginal gain."""
    covered, chosen, out = 0, set(), [0]
    for _ in range(len(masks)):
        best, gain = None, -1
        for j, m in enumerate(masks):
            if j in chosen:
                continue
            g = (m & ~covered).bit_count()
            if g > gain:
                best, gain = j, g
        if gain <= 0:
            break
        chosen.add(best)
        covered |= masks[best]
        out.append(covered.bit_count())
    return out


def _max_cover(masks, k, seed_value):
    """Largest union of at most k masks; branch and bound with marginal-gain bounds."""
    masks = sorted(set(m for m in masks if m), key=lambda m: -m.bit_count())
    best = seed_value
    n = len(masks)
    if k >= n:
        total = 0
        for m in masks:
            total |= m
        return total.bit_count()

    def dfs(start, left, covered, count):
        nonlocal best
        if count > best:
            best = count
        if left == 0 or start >= n:
            return
        gains = sorted(((masks[i] & ~covered).bit_count() for i in range(start, n)), reverse=True)
        if count + sum(gains[:left]) <= best:
            return
        for i in range(start, n):
            g = (masks[i] & ~covered).bit_count()
            if g == 0:
                continue
            dfs(i + 1, left - 1, covered | masks[i], count + g)

    dfs(0, k, 0, 0)
    return best


def phi_sequence(p: SparsePattern, n_max: int, mode: str = "Exact") -> PhiSequence:
    masks = p.masks()
    greedy = _greedy_nested(masks)
    full = greedy[-1]

    def g_at(n):
        return greedy[n] if n < len(greedy) else full

    if mode == "Exact":
        if p.n_cols > EXACT_COLUMN_CAP:
            raise BudgetExceeded(f"exact mode supports at most {EXACT_COLUMN_CAP} columns, got {p.n_cols}")
        vals = [0]
        for n in range(1, n_max + 1):
            vals.append(full if n >= len(greedy) - 1 else _max_cover(masks, n, g_at(n)))
        return PhiSequence(tuple(vals), "Exact")
    if mode == "Greedy":
        vals = tuple(g_at(n) for n in range(n_max + 1))
        one = vals[1] if n_max >= 1 else 0
        up = tuple(min(one * n, p.n_rows if p.n_cols else 0) for n in range(n_max + 1))
        return PhiSequence(vals, "GreedyLowerBound", up)
    raise ValueError(f"unknown mode {mode!r}")


def exhaustive_phi(p: SparsePattern, n_max: int):
    """Oracle: enumerate every subset of at most n columns."""
    masks = p.masks()
    out = [0]
    for n in range(1, n_max + 1):
        best = 0
        for k in range(1, min(n, len(masks)) + 1):
            for combo in combinations(masks, k):
                u = 0
                for m in combo:
                    u |= m
                best = max(best, u.bit_count())
        out.append(best)
    return tuple(out)


@dataclass(frozen=True)
class RCFinite:
    yes: bool
    N: int | None = None

    def __str__(self):
        return f"Yes({self.N})" if self.yes else "No"

    def to_json(self):
        return {"rc_finite": self.yes, "N": self.N}


def is_rc_finite(p: SparsePattern) -> RCFinite:
    """Finite patterns are always uniformly RC-finite; N is the largest row or column degree."""
    col = max((len(c) for c in p.columns), default=0)
    row = max(p.row_degrees(), default=0)
    return RCFinite(True, max(col, row))


def vector_support_sizes(p: SparsePattern, n: int, trials: int, seed: int):
    """|supp(a xi)| for random integer matrices with pattern p and random xi with |supp xi| <= n."""
    rng = np.random.default_rng(seed)
    a = p.dense().astype(np.int64) * rng.integers(1, 1 << 20, size=(p.n_rows, p.n_cols))
    out = []
    for _ in range(trials):
        k = int(rng.integers(0, min(n, p.n_cols) + 1))
        cols = rng.choice(p.n_cols, size=k, replace=False) if k else np.array([], dtype=int)
        xi = np.zeros(p.n_cols, dtype=object)
        for j in cols:
            xi[j] = int(rng.integers(1, 1 << 20)) * (1 if rng.random() < 0.5 else -1)
        v = a.astype(object).dot(xi)
        out.append((tuple(sorted(int(j) for j in cols)), int(np.count_nonzero(v != 0))))
    return out


# ---------------------------------------------------------------- generic coefficients

@dataclass(frozen=True)
class ComboCheck:
    union_achieved: bool
    index: int | None = None
    coefficients: tuple = ()

    def __str__(self):
        return "UnionAchieved" if self.union_achieved else f"CancellationAt({self.index})"

    def to_json(self):
        return {"result": str(self), "coefficients": [str(c) for c in self.coefficients]}


def _support(v: dict):
    return {k for k, x in v.items() if x != 0}


def random_combo_support_check(vectors, seed=0, coefficients=None, bits=62) -> ComboCheck:
    """Check supp(sum_{i<=k} lam_i xi_i) = union_{i<=k} supp(xi_i) for every k.

    ``vectors`` are dicts index -> rational.  Coefficients are drawn from
    [1, 2**bits) unless forced.  Index in CancellationAt is 1-based.
    """
    rng = random.Random(seed)
    if coefficients is None:
        coefficients = [rng.randrange(1, 1 << bits) for _ in vectors]
    coefficients = tuple(Fraction(c) for c in coefficients)
    acc, want = {}, set()
    for k, (lam, xi) in enumerate(zip(coefficients, vectors), start=1):
        for i, x in xi.items():
            acc[i] = acc.get(i, Fraction(0)) + lam * Fraction(x)
        want |= _support(xi)
        if _support(acc) != want:
            return ComboCheck(False, k, coefficients)
    return ComboCheck(True, None, coefficients)


# ---------------------------------------------------------------- sequences

@dataclass(frozen=True)
class IntSequence:
    """Increasing map N -> N u {inf}, given by its first values and a germ tag at inf.

    ``germ`` is ("affine", slope, intercept), ("power", c, p) or None.
    """
    values: tuple
    germ: tuple | None = None

    def __init__(self, values, germ=None):
        vals = tuple(INF if (isinstance(v, float) and v == INF) or v == "inf" else int(v) for v in values)
        if not vals or vals[0] != 0:
            raise ValueError("sequences start with s(0) = 0")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ValueError("sequences must be increasing")
        if germ is not None:
            kind = germ[0]
            if kind not in ("affine", "power"):
                raise ValueError(f"unknown germ tag {kind!r}")
            germ = (kind, Fraction(germ[1]), Fraction(germ[2]))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "germ", germ)

    def __call__(self, n):
        if n < len(self.values):
            return self.values[n]
        if self.germ is None:
            raise ValueError("value beyond the stored prefix needs a germ tag")
        kind, a, b = self.germ
        return (a * n + b) if kind == "affine" else a * Fraction(n) ** b

    @property
    def growth_exponent(self):
        if self.germ is None:
            return None
        kind, a, b = self.germ
        if kind == "affine":
            return Fraction(1) if a > 0 else Fraction(0)
        return b

    @classmethod
    def from_json(cls, d):
        g = d.get("germ")
        return cls(d["values"], tuple(g) if g else None)

    def to_json(self):
        d = {"values": ["inf" if v == INF else v for v in self.values]}
        if self.germ:
            d["germ"] = [self.germ[0], str(self.germ[1]), str(self.germ[2])]
        return d


def load_pattern(path: str) -> SparsePattern:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return SparsePattern.from_json(json.loads(text))
    return SparsePattern.from_coo_text(text)

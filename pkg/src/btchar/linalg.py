"""Exact sparse linear algebra over the rationals.

Vectors are ``dict[int, Fraction]`` holding only nonzero entries; a matrix
stores its rows as such dicts.  Nothing here uses floating point.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable

Vec = dict


def vclean(v: Vec) -> Vec:
    return {k: x for k, x in v.items() if x}


def vadd(u: Vec, w: Vec, scale=1) -> Vec:
    """u + scale * w (new dict)."""
    out = dict(u)
    for k, x in w.items():
        y = out.get(k, 0) + scale * x
        if y:
            out[k] = y
        else:
            out.pop(k, None)
    return out


def vadd_inplace(u: Vec, w: Vec, scale=1) -> None:
    for k, x in w.items():
        y = u.get(k, 0) + scale * x
        if y:
            u[k] = y
        else:
            u.pop(k, None)


def vscale(v: Vec, s) -> Vec:
    if not s:
        return {}
    return {k: s * x for k, x in v.items()}


def vdot(u: Vec, w: Vec):
    if len(u) > len(w):
        u, w = w, u
    return sum((x * w[k] for k, x in u.items() if k in w), Fraction(0))


class SparseMatrix:
    """Row-sparse rational matrix."""

    def __init__(self, nrows: int, ncols: int, rows: dict | None = None):
        self.nrows = nrows
        self.ncols = ncols
        self.rows: dict[int, Vec] = {}
        if rows:
            for i, r in rows.items():
                r = vclean(r)
                if r:
                    self.rows[i] = r

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "SparseMatrix":
        return cls(nrows, ncols)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(n, n, {i: {i: Fraction(1)} for i in range(n)})

    @classmethod
    def diagonal(cls, entries: list) -> "SparseMatrix":
        n = len(entries)
        return cls(n, n, {i: {i: Fraction(x)} for i, x in enumerate(entries) if x})

    @classmethod
    def from_columns(cls, nrows: int, cols: list[Vec]) -> "SparseMatrix":
        rows: dict[int, Vec] = {}
        for j, c in enumerate(cols):
            for i, x in c.items():
                if x:
                    rows.setdefault(i, {})[j] = x
        return cls(nrows, len(cols), rows)

    @classmethod
    def from_dense(cls, data) -> "SparseMatrix":
        data = [list(r) for r in data]
        n = len(data)
        m = len(data[0]) if n else 0
        return cls(n, m, {i: {j: Fraction(x) for j, x in enumerate(r) if x}
                          for i, r in enumerate(data)})

    def copy(self) -> "SparseMatrix":
        return SparseMatrix(self.nrows, self.ncols, {i: dict(r) for i, r in self.rows.items()})

    # access -------------------------------------------------------------
    def __getitem__(self, ij):
        i, j = ij
        return self.rows.get(i, {}).get(j, Fraction(0))

    def set(self, i: int, j: int, x) -> None:
        if x:
            self.rows.setdefault(i, {})[j] = Fraction(x)
        elif i in self.rows:
            self.rows[i].pop(j, None)
            if not self.rows[i]:
                del self.rows[i]

    def nnz(self) -> int:
        return sum(len(r) for r in self.rows.values())

    def columns(self) -> list[Vec]:
        cols: list[Vec] = [dict() for _ in range(self.ncols)]
        for i, r in self.rows.items():
            for j, x in r.items():
                cols[j][i] = x
        return cols

    def column(self, j: int) -> Vec:
        return {i: r[j] for i, r in self.rows.items() if j in r}

    def to_dense(self) -> list[list[Fraction]]:
        out = [[Fraction(0)] * self.ncols for _ in range(self.nrows)]
        for i, r in self.rows.items():
            for j, x in r.items():
                out[i][j] = x
        return out

    def triplets(self) -> list[tuple[int, int, Fraction]]:
        return [(i, j, self.rows[i][j]) for i in sorted(self.rows) for j in sorted(self.rows[i])]

    # algebra ------------------------------------------------------------
    def transpose(self) -> "SparseMatrix":
        rows: dict[int, Vec] = {}
        for i, r in self.rows.items():
            for j, x in r.items():
                rows.setdefault(j, {})[i] = x
        return SparseMatrix(self.ncols, self.nrows, rows)

    def matvec(self, v: Vec) -> Vec:
        out = {}
        for i, r in self.rows.items():
            s = vdot(r, v)
            if s:
                out[i] = s
        return out

    def rmatvec(self, v: Vec) -> Vec:
        """v^T A as a vector indexed by columns."""
        out: Vec = {}
        for i, x in v.items():
            r = self.rows.get(i)
            if r:
                vadd_inplace(out, r, x)
        return out

    def __matmul__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.ncols != other.nrows:
            raise ValueError("shape mismatch")
        rows = {}
        for i, r in self.rows.items():
            acc: Vec = {}
            for k, x in r.items():
                ro = other.rows.get(k)
                if ro:
                    vadd_inplace(acc, ro, x)
            if acc:
                rows[i] = acc
        return SparseMatrix(self.nrows, other.ncols, rows)

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        self._same(other)
        out = self.copy()
        for i, r in other.rows.items():
            acc = out.rows.setdefault(i, {})
            vadd_inplace(acc, r)
            if not acc:
                del out.rows[i]
        return out

    def __sub__(self, other: "SparseMatrix") -> "SparseMatrix":
        return self + other.scale(-1)

    def scale(self, s) -> "SparseMatrix":
        s = Fraction(s)
        return SparseMatrix(self.nrows, self.ncols, {i: vscale(r, s) for i, r in self.rows.items()})

    def _same(self, other: "SparseMatrix") -> None:
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            raise ValueError("shape mismatch")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (self.nrows, self.ncols) == (other.nrows, other.ncols) and self.rows == other.rows

    def is_zero(self) -> bool:
        return not self.rows

    def trace(self) -> Fraction:
        return sum((r.get(i, 0) for i, r in self.rows.items()), Fraction(0))

    def restrict_rows(self, keep) -> "SparseMatrix":
        keep = set(keep)
        return SparseMatrix(self.nrows, self.ncols, {i: r for i, r in self.rows.items() if i in keep})

    def power(self, k: int) -> "SparseMatrix":
        out = SparseMatrix.identity(self.nrows)
        for _ in range(k):
            out = self @ out
        return out

    def rank(self) -> int:
        return rank(list(self.rows.values()))

    def __repr__(self) -> str:
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz()})"


def trace_of_product(a: SparseMatrix, b: SparseMatrix) -> Fraction:
    """trace(a @ b) without forming the product."""
    bt = b.transpose()
    return sum((vdot(r, bt.rows.get(i, {})) for i, r in a.rows.items()), Fraction(0))


class Echelon:
    """Incremental echelon basis of a span of sparse vectors.

    Stored vectors are kept fully reduced (zero at every other pivot) and
    remember which combination of the inserted vectors produced them, so
    membership tests and coordinate solves are exact single passes.
    """

    def __init__(self):
        self.pivots: list[int] = []
        self.vecs: list[Vec] = []
        self.combos: list[Vec] = []
        self.by_pivot: dict[int, int] = {}
        self.count = 0

    def _reduce(self, v: Vec, track: bool):
        rem = dict(v)
        combo: Vec = {}
        for k, x in v.items():
            slot = self.by_pivot.get(k)
            if slot is None:
                continue
            vadd_inplace(rem, self.vecs[slot], -x)
            if track:
                vadd_inplace(combo, self.combos[slot], -x)
        return rem, combo

    def insert(self, v: Vec) -> Vec | None:
        """Add a vector.

        Returns None when the span grows, otherwise the linear relation
        (coefficients on inserted vectors, 1 on the new one) that kills it.
        """
        idx = self.count
        self.count += 1
        r, combo = self._reduce(v, True)
        combo[idx] = combo.get(idx, 0) + Fraction(1)
        if not r:
            return vclean(combo)
        piv = min(r)
        s = 1 / r[piv]
        r = vscale(r, s)
        combo = vscale(vclean(combo), s)
        for t, w in enumerate(self.vecs):
            if piv in w:
                x = w[piv]
                vadd_inplace(w, r, -x)
                vadd_inplace(self.combos[t], combo, -x)
        self.by_pivot[piv] = len(self.vecs)
        self.pivots.append(piv)
        self.vecs.append(r)
        self.combos.append(combo)
        return None

    @property
    def rank(self) -> int:
        return len(self.vecs)

    def contains(self, v: Vec) -> bool:
        r, _ = self._reduce(v, False)
        return not r

    def coordinates(self, v: Vec) -> Vec | None:
        """Coefficients on the inserted vectors, or None outside the span."""
        r, combo = self._reduce(v, True)
        if r:
            return None
        return vclean(vscale(combo, -1))


def rank(vectors: Iterable[Vec]) -> int:
    ech = Echelon()
    for v in vectors:
        ech.insert(v)
    return ech.rank


def independent_subset(vectors: list[Vec]) -> list[int]:
    """Indices of a maximal independent subset, chosen greedily in order."""
    ech = Echelon()
    keep = []
    for i, v in enumerate(vectors):
        if ech.insert(v) is None:
            keep.append(i)
    return keep


def nullspace(m: SparseMatrix) -> list[Vec]:
    """Basis of {x : m x = 0}, as column-index vectors."""
    ech = Echelon()
    basis = []
    for c in m.columns():
        rel = ech.insert(c)
        if rel is not None:
            basis.append(rel)
    return basis


def solve(m: SparseMatrix, b: Vec) -> Vec | None:
    """Some x with m x = b, or None."""
    ech = Echelon()
    for c in m.columns():
        ech.insert(c)
    return ech.coordinates(b)


def matrix_from_vectors(n: int, vectors: list[Vec]) -> SparseMatrix:
    return SparseMatrix.from_columns(n, vectors)

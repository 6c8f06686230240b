"""Representation models and the invariant fibers V^{U_F^(e)}.

Functions on P^1(Q_p) are stored on the standard cells of level L, which are
the fibers of P^1(Z_p) -> P^1(Z/p^L).  Affine cells ``x + p^L Z_p`` carry
index ``x`` (0 <= x < p^L); cells at infinity ``{1/y : y in y0 + p^L Z_p}``
with ``y0`` in ``pZ/p^L`` carry index ``p^L + y0/p``.  Level 0 is the single
cell P^1.

The group U_x^(e) attached to a vertex x with basis B_x is
``B_x K(e+1) B_x^-1`` where K(n) is the principal congruence subgroup
``1 + p^n M_2(Z_p)``.  Its orbits on P^1 are the images under B_x of the
level-(e+1) cells, so its invariants are spanned by indicator functions of
those images ("blocks").  An edge group is generated by the groups of its
endpoints; its blocks are the finest common coarsening of the endpoint
blocks.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import BudgetExceeded, FiberCoercionError, PrecisionExhausted
from .padic import Matrix2, frac_mod, frac_val
from .tree import Vertex, act, base_vertex, distance

Point = Fraction | None   # None is the point at infinity


# cells ------------------------------------------------------------------------

def n_cells(p: int, level: int) -> int:
    return 1 if level == 0 else p ** level + p ** (level - 1)


def cell_center(p: int, level: int, idx: int) -> Point:
    if level == 0:
        return Fraction(0)
    q = p ** level
    if idx < q:
        return Fraction(idx)
    y = p * (idx - q)
    return None if y == 0 else Fraction(1, y)


def cell_of_point(p: int, level: int, x: Point) -> int:
    if level == 0:
        return 0
    q = p ** level
    if x is None:
        return q
    if x == 0 or frac_val(x, p) >= 0:
        return frac_mod(x, p, level)
    return q + frac_mod(1 / x, p, level) // p


def parent_cell(p: int, level: int, idx: int, coarse: int) -> int:
    """Index at level ``coarse`` of the cell containing cell ``idx`` of ``level``."""
    if coarse == 0:
        return 0
    if coarse > level:
        raise ValueError("parent level must not exceed the cell level")
    q = p ** level
    if idx < q:
        return idx % p ** coarse
    y = p * (idx - q)
    return p ** coarse + (y % p ** coarse) // p


def children(p: int, level: int, idx: int) -> list[int]:
    """Cells of level+1 inside cell ``idx`` of ``level``."""
    if level == 0:
        return list(range(n_cells(p, 1)))
    q = p ** level
    q1 = q * p
    if idx < q:
        return [idx + j * q for j in range(p)]
    y = p * (idx - q)
    return [q1 + (y + j * q) // p for j in range(p)]


def cell_points(p: int, level: int, idx: int, depth: int = 2) -> list[Point]:
    """A few sample points of a cell (the center and some deeper ones)."""
    pts = [cell_center(p, level, idx)]
    if level == 0:
        return pts + [Fraction(1, p), Fraction(p), None]
    q = p ** level
    for t in range(1, depth + 1):
        if idx < q:
            pts.append(Fraction(idx) + q * t)
        else:
            y = p * (idx - q) + q * t
            pts.append(None if y == 0 else Fraction(1, y))
    return pts


def mobius(m: tuple, x: Point) -> Point:
    """Image of a point under the fractional linear map of (a, b, c, d)."""
    a, b, c, d = m
    if x is None:
        return None if c == 0 else Fraction(a) / c
    den = c * x + d
    if den == 0:
        return None
    return (a * x + b) / den


def matrix_entries(g) -> tuple:
    if isinstance(g, Matrix2):
        return g.to_fractions()
    return tuple(Fraction(t) for t in g)


def _vertex_adj(x: Vertex) -> tuple:
    """Entries of adj(B_x); as a Mobius map it is B_x^-1."""
    m11, _, m21, m22 = x.basis()
    return (m22, 0, -m21, m11)


def _vertex_basis(x: Vertex) -> tuple:
    m11, m12, m21, m22 = x.basis()
    return (m11, m12, m21, m22)


# balls of P^1 -------------------------------------------------------------------

@dataclass(frozen=True)
class PBall:
    """A ball of P^1(Q_p).

    chart ``"aff"``: {x : v(x - center) >= k};
    chart ``"inf"``: {x : v(1/x - center) >= k} (contains infinity when
    ``v(center) >= k``);
    chart ``"all"``: the whole line.
    """
    p: int
    chart: str
    center: Fraction
    k: int

    @classmethod
    def cell(cls, p: int, level: int, idx: int) -> "PBall":
        if level == 0:
            return cls(p, "all", Fraction(0), 0)
        q = p ** level
        if idx < q:
            return cls(p, "aff", Fraction(idx), level)
        return cls(p, "inf", Fraction(p * (idx - q)), level)

    def contains(self, x: Point) -> bool:
        if self.chart == "all":
            return True
        if self.chart == "aff":
            return x is not None and frac_val(x - self.center, self.p) >= self.k
        if x is None:
            return frac_val(self.center, self.p) >= self.k
        if x == 0:
            return False
        return frac_val(1 / x - self.center, self.p) >= self.k

    def sample(self, count: int = 4) -> list[Point]:
        """Points inside the ball."""
        pk = Fraction(self.p) ** self.k
        if self.chart == "all":
            return [Fraction(0), Fraction(1), None, Fraction(1, self.p)][:count]
        out = []
        for t in range(count):
            z = self.center + pk * t
            if self.chart == "aff":
                out.append(z)
            else:
                out.append(None if z == 0 else 1 / z)
        return out

    def boundary_sample(self, count: int = 3) -> list[Point]:
        """Points just outside the ball."""
        if self.chart == "all":
            return []
        pk = Fraction(self.p) ** (self.k - 1)
        out = []
        for t in range(1, count + 1):
            if t % self.p == 0:
                continue
            z = self.center + pk * t
            if self.chart == "aff":
                out.append(z)
            else:
                out.append(None if z == 0 else 1 / z)
        return out


def mobius_image(g, B: PBall) -> PBall:
    """Image of a ball under an invertible fractional linear map."""
    a, b, c, d = matrix_entries(g)
    p = B.p
    if B.chart == "all":
        return B
    if B.chart == "inf":
        # g(B) = (g J)(D) with J(x) = 1/x and D the affine ball in the y chart
        a, b, c, d = b, a, d, c
    det = a * d - b * c
    center = B.center
    pole_inside = c != 0 and frac_val(center + d / c, p) >= B.k
    if not pole_inside:
        den = c * center + d
        img = (a * center + b) / den
        k = B.k + frac_val(det, p) - 2 * frac_val(den, p)
        return PBall(p, "aff", img, k)
    # the image contains infinity: describe it through y = 1/g(x)
    a2, b2, c2, d2 = c, d, a, b
    den = c2 * center + d2
    if den == 0:
        raise ValueError("ball contains both the pole and the zero of the map")
    img = (a2 * center + b2) / den
    k = B.k + frac_val(a2 * d2 - b2 * c2, p) - 2 * frac_val(den, p)
    return PBall(p, "inf", img, k)


# step functions -----------------------------------------------------------------

@dataclass(frozen=True)
class StepFunction:
    """A locally constant rational function, stored on standard cells of one level."""
    p: int
    level: int
    values: tuple

    @classmethod
    def constant(cls, p: int, value=1) -> "StepFunction":
        return cls(p, 0, (Fraction(value),))

    @classmethod
    def indicator(cls, p: int, level: int, cells) -> "StepFunction":
        cells = set(cells)
        return cls(p, level, tuple(Fraction(1 if i in cells else 0)
                                   for i in range(n_cells(p, level))))

    @classmethod
    def from_ball(cls, B: PBall, level: int | None = None) -> "StepFunction":
        """Indicator of a ball (needs k >= 0 in its chart or the whole line)."""
        p = B.p
        if B.chart == "all":
            return cls.constant(p)
        L = max(B.k, 1) if level is None else level
        if L < B.k:
            raise ValueError("level too coarse for the ball")
        vals = []
        for i in range(n_cells(p, L)):
            vals.append(Fraction(1 if B.contains(cell_center(p, L, i)) else 0))
        f = cls(p, L, tuple(vals))
        return f

    def __call__(self, x: Point) -> Fraction:
        return self.values[cell_of_point(self.p, self.level, x)]

    def refine(self, level: int) -> "StepFunction":
        if level == self.level:
            return self
        if level < self.level:
            raise ValueError("cannot refine to a coarser level")
        p = self.p
        vals = tuple(self.values[parent_cell(p, level, i, self.level)]
                     for i in range(n_cells(p, level)))
        return StepFunction(p, level, vals)

    def normalize(self) -> "StepFunction":
        """Coarsest level on which the function is still represented exactly."""
        f = self
        p = self.p
        while f.level > 0:
            L = f.level - 1
            vals = []
            ok = True
            for i in range(n_cells(p, L)):
                kids = children(p, L, i)
                v = f.values[kids[0]]
                if any(f.values[k] != v for k in kids[1:]):
                    ok = False
                    break
                vals.append(v)
            if not ok:
                break
            f = StepFunction(p, L, tuple(vals))
        return f

    def _common(self, other: "StepFunction"):
        L = max(self.level, other.level)
        return self.refine(L), other.refine(L)

    def __add__(self, other: "StepFunction") -> "StepFunction":
        a, b = self._common(other)
        return StepFunction(self.p, a.level, tuple(x + y for x, y in zip(a.values, b.values)))

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        return self + other.scale(-1)

    def scale(self, s) -> "StepFunction":
        s = Fraction(s)
        return StepFunction(self.p, self.level, tuple(s * x for x in self.values))

    def equals(self, other: "StepFunction") -> bool:
        a, b = self._common(other)
        return a.values == b.values

    def is_zero(self) -> bool:
        return not any(self.values)

    def support_cells(self) -> list[int]:
        return [i for i, x in enumerate(self.values) if x]


def expansion(g) -> int:
    """Distance from the base vertex to g . base; g^-1 expands cells by at most p^this."""
    if isinstance(g, Matrix2):
        p = g.p
        return distance(base_vertex(p), act(g, base_vertex(p)))
    raise TypeError("expansion needs a Matrix2")


def act_on_step(g: Matrix2, f: StepFunction) -> StepFunction:
    """(g . f)(x) = f(g^-1 x), computed exactly."""
    p = f.p
    if f.level == 0:
        return f
    shift = expansion(g)
    L = f.level + shift
    _check_digits(g, L)
    a, b, c, d = g.to_fractions()
    ginv = (d, -b, -c, a)
    vals = tuple(f.values[cell_of_point(p, f.level, mobius(ginv, cell_center(p, L, i)))]
                 for i in range(n_cells(p, L)))
    return StepFunction(p, L, vals).normalize()


def _check_digits(g: Matrix2, level: int) -> None:
    ns = [x.N for x in g.entries() if x.v is not None]
    if ns and min(ns) < level + 1:
        raise PrecisionExhausted(f"matrix known to {min(ns)} digits, level {level} requested")


def coarsen_average(f: StepFunction, level: int) -> StepFunction:
    """Replace f by its average over each cell of the given level.

    All subcells of a cell have equal Haar measure in their chart, which is
    the measure invariant under the congruence subgroup of that level.
    """
    p = f.p
    if level >= f.level:
        return f
    sums = [Fraction(0)] * n_cells(p, level)
    counts = [0] * n_cells(p, level)
    for i, v in enumerate(f.values):
        j = parent_cell(p, f.level, i, level)
        sums[j] += v
        counts[j] += 1
    return StepFunction(p, level, tuple(s / n for s, n in zip(sums, counts))).normalize()


# partitions ---------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """A partition of P^1 into blocks, each a union of standard cells of ``level``."""
    p: int
    level: int
    block_of: tuple
    nblocks: int

    def block_of_point(self, x: Point) -> int:
        return self.block_of[cell_of_point(self.p, self.level, x)]

    def block_cells(self, b: int) -> list[int]:
        return [i for i, t in enumerate(self.block_of) if t == b]

    @property
    def rep_points(self) -> tuple:
        return _rep_points(self)

    def refine(self, level: int) -> "Partition":
        if level == self.level:
            return self
        p = self.p
        return Partition(p, level, tuple(self.block_of[parent_cell(p, level, i, self.level)]
                                          for i in range(n_cells(p, level))), self.nblocks)

    def indicator(self, b: int) -> StepFunction:
        return StepFunction(self.p, self.level,
                            tuple(Fraction(1 if t == b else 0) for t in self.block_of))

    def combination(self, coeffs) -> StepFunction:
        """The function taking value coeffs[b] on block b."""
        return StepFunction(self.p, self.level,
                            tuple(Fraction(coeffs[t]) for t in self.block_of))

    def coordinates(self, f: StepFunction) -> list[Fraction]:
        """Block values of f; raises if f is not constant on blocks."""
        L = max(self.level, f.level)
        P = self.refine(L)
        g = f.refine(L)
        out: list = [None] * self.nblocks
        for i, b in enumerate(P.block_of):
            v = g.values[i]
            if out[b] is None:
                out[b] = v
            elif out[b] != v:
                raise FiberCoercionError("function is not constant on a block")
        return [Fraction(0) if v is None else v for v in out]

    def is_coarser_than(self, other: "Partition") -> bool:
        """Every block of ``other`` lies inside a block of self."""
        L = max(self.level, other.level)
        a = self.refine(L).block_of
        b = other.refine(L).block_of
        seen: dict = {}
        for x, y in zip(a, b):
            if seen.setdefault(y, x) != x:
                return False
        return True


_REP_CACHE: dict = {}


def _rep_points(P: Partition) -> tuple:
    key = (P.p, P.level, P.block_of)
    got = _REP_CACHE.get(key)
    if got is None:
        first = {}
        for i, b in enumerate(P.block_of):
            first.setdefault(b, i)
        got = tuple(cell_center(P.p, P.level, first[b]) for b in range(P.nblocks))
        _REP_CACHE[key] = got
    return got


def relabel(labels) -> tuple[tuple, int]:
    """Relabel block ids by order of first appearance."""
    m: dict = {}
    out = []
    for t in labels:
        if t not in m:
            m[t] = len(m)
        out.append(m[t])
    return tuple(out), len(m)


def join(P: Partition, Q: Partition) -> Partition:
    """Finest partition coarser than both (blocks = connected unions)."""
    L = max(P.level, Q.level)
    a = P.refine(L).block_of
    b = Q.refine(L).block_of
    parent = list(range(P.nblocks + Q.nblocks))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for x, y in zip(a, b):
        rx, ry = find(x), find(P.nblocks + y)
        if rx != ry:
            parent[rx] = ry
    labels, n = relabel(find(x) for x in a)
    return Partition(P.p, L, labels, n)


def trivial_partition(p: int) -> Partition:
    return Partition(p, 0, (0,), 1)


# congruence groups ----------------------------------------------------------------

def congruence_generators(p: int, n: int) -> list[tuple]:
    """Topological generators of K(n) = 1 + p^n M_2(Z_p), n >= 1."""
    q = p ** n
    gens = [(1, q, 0, 1), (1, 0, q, 1), (1 + q, 0, 0, 1), (1, 0, 0, 1 + q)]
    if p == 2 and n == 1:
        gens += [(-1, 0, 0, 1), (1, 0, 0, -1)]
    return [tuple(Fraction(t) for t in g) for g in gens]


def _mat_mul(x: tuple, y: tuple) -> tuple:
    a, b, c, d = x
    e, f, g, h = y
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def _mat_inv(x: tuple) -> tuple:
    a, b, c, d = x
    det = Fraction(a * d - b * c)
    return (d / det, -b / det, -c / det, a / det)


def facet_vertices(F) -> tuple:
    return (F,) if isinstance(F, Vertex) else (F.tail, F.head)


@dataclass(frozen=True)
class UGroup:
    """The depth-e group attached to a vertex or an edge."""
    facet: object
    e: int

    @property
    def p(self) -> int:
        return facet_vertices(self.facet)[0].p

    def generators(self) -> list[tuple]:
        out = []
        for x in facet_vertices(self.facet):
            B = tuple(Fraction(t) for t in _vertex_basis(x))
            Bi = _mat_inv(B)
            for k in congruence_generators(x.p, self.e + 1):
                out.append(_mat_mul(_mat_mul(B, k), Bi))
        return out

    def generator_matrices(self) -> list[Matrix2]:
        p = self.p
        return [Matrix2.from_rows([[a, b], [c, d]], p) for a, b, c, d in self.generators()]

    def fixes(self, f: StepFunction) -> bool:
        return all(act_on_step(g, f).equals(f) for g in self.generator_matrices())


def invariant_partition_at_level(F, e: int, level: int) -> Partition:
    """Blocks of V_level^U: orbits of the generators on level-``level`` cells.

    A level-L function is fixed by g exactly when it is constant across
    every pair of cells (c, c') with g(c) meeting c'.  Tracking the cells of
    g(center) and g^-1(center) captures every such pair.
    """
    p = facet_vertices(F)[0].p
    n = n_cells(p, level)
    gens = UGroup(F, e).generators()
    maps = gens + [_mat_inv(g) for g in gens]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        z = cell_center(p, level, i)
        for g in maps:
            j = cell_of_point(p, level, mobius(g, z))
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
    labels, nb = relabel(find(i) for i in range(n))
    return Partition(p, level, labels, nb)


def sufficient_level(F, e: int, start: int = 1, max_level: int = 12,
                     repeats: int = 2) -> tuple[int, int, list[int]]:
    """Raise the level until the invariant dimension has stayed put ``repeats`` times.

    Returns (level, dimension, dimension history).
    """
    hist = []
    L = max(start, 1)
    while True:
        if L > max_level:
            raise BudgetExceeded("invariant dimension did not stabilize within the level budget")
        hist.append(invariant_partition_at_level(F, e, L).nblocks)
        if len(hist) > repeats and len(set(hist[-repeats - 1:])) == 1:
            return L - repeats, hist[-1], hist
        L += 1


# models -----------------------------------------------------------------------------

class Model:
    """A smooth representation realized on functions on P^1, with its fibers."""
    name = "model"

    def __init__(self, p: int):
        self.p = p
        self._cache: dict = {}

    def partition(self, F, e: int) -> Partition:
        key = (F, e)
        got = self._cache.get(key)
        if got is None:
            got = self._compute(F, e)
            self._cache[key] = got
        return got

    def _compute(self, F, e: int) -> Partition:
        raise NotImplementedError

    def fiber_dim(self, F, e: int) -> int:
        return self.partition(F, e).nblocks

    def tag(self) -> str:
        return self.name


class TrivialModel(Model):
    """The trivial representation: constants on P^1."""
    name = "trivial"

    def _compute(self, F, e: int) -> Partition:
        return trivial_partition(self.p)


class PrincipalSeriesModel(Model):
    """Locally constant functions on P^1 with (g f)(x) = f(g^-1 x).

    ``level`` is the smallest cell level used for representing fibers; the
    level actually used for a vertex at distance d from the base vertex is
    max(level, e + 1 + d), which always suffices.
    """
    name = "principal"

    def __init__(self, p: int, level: int = 2):
        super().__init__(p)
        self.level = level

    def tag(self) -> str:
        return f"principal:{self.level}"

    def vertex_level(self, x: Vertex, e: int) -> int:
        d = x.a + x.c
        return max(self.level, e + 1 + d)

    def _compute(self, F, e: int) -> Partition:
        p = self.p
        if isinstance(F, Vertex):
            L = self.vertex_level(F, e)
            adj = _vertex_adj(F)
            labels = [cell_of_point(p, e + 1, mobius(adj, cell_center(p, L, i)))
                      for i in range(n_cells(p, L))]
            lab, n = relabel(labels)
            return Partition(p, L, lab, n)
        return join(self.partition(F.tail, e), self.partition(F.head, e))


def make_model(tag: str, p: int) -> Model:
    """Build a model from ``trivial`` or ``principal[:level]``."""
    if tag == "trivial":
        return TrivialModel(p)
    if tag.startswith("principal"):
        parts = tag.split(":")
        level = int(parts[1]) if len(parts) > 1 else 2
        return PrincipalSeriesModel(p, level)
    raise ValueError(f"unknown model {tag!r}")


@dataclass
class InvariantSpace:
    facet: object
    e: int
    model_tag: str
    partition: Partition

    @property
    def dim(self) -> int:
        return self.partition.nblocks

    def basis(self) -> list[StepFunction]:
        return [self.partition.indicator(b) for b in range(self.dim)]


def invariant_space(F, e: int, model: Model) -> InvariantSpace:
    return InvariantSpace(F, e, model.tag(), model.partition(F, e))


def geodesic_convexity_check(x: Vertex, y: Vertex, z: Vertex, e: int, model: Model) -> bool:
    """V^{U_x} and V^{U_y} intersect inside V^{U_z}.

    Partition form: the join of the x and y partitions is coarser than z's.
    """
    both = join(model.partition(x, e), model.partition(y, e))
    return both.is_coarser_than(model.partition(z, e))


# averaging ------------------------------------------------------------------------

def average_congruence(x: Vertex, e: int, f: StepFunction) -> StepFunction:
    """pi(U_x^(e)) f = B_x . (cell average at level e+1) . B_x^-1 f."""
    p = f.p
    B = x.basis_matrix()
    Binv = Matrix2.from_rows([[t for t in _vertex_adj(x)[:2]], [t for t in _vertex_adj(x)[2:]]], p)
    h = act_on_step(Binv, f)
    h = coarsen_average(h, e + 1)
    return act_on_step(B, h)


def average_finite(elements: list[Matrix2], f: StepFunction) -> StepFunction:
    """Exact average of g . f over a finite list of group elements."""
    if not elements:
        raise ValueError("empty group")
    acc = None
    for g in elements:
        h = act_on_step(g, f)
        acc = h if acc is None else acc + h
    return acc.scale(Fraction(1, len(elements))).normalize()


def gl2_mod(p: int, m: int, max_size: int = 100_000) -> list[Matrix2]:
    """Integer representatives of GL_2(Z/p^m)."""
    q = p ** m
    size = (q ** 4) * (1 - Fraction(1, p)) * (1 - Fraction(1, p ** 2))
    if size > max_size:
        raise BudgetExceeded(f"GL2(Z/{q}) has {size} elements")
    out = []
    for a in range(q):
        for b in range(q):
            for c in range(q):
                for d in range(q):
                    if (a * d - b * c) % p:
                        out.append(Matrix2.from_rows([[a, b], [c, d]], p))
    return out


def block_image(g: tuple, P: Partition, Q: Partition) -> list[int]:
    """For each block of P, the block of Q containing its image under g."""
    return [Q.block_of_point(mobius(g, z)) for z in P.rep_points]

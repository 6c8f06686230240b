"""Element classification, fixed and stable facets, tubes and fundamental domains."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import NotCompact, NotRegular
from .padic import Matrix2, PadicScalar, is_square, mat_inv, newton_valuations, val
from .tree import (OrientedEdge, TreeBall, Vertex, act, apartment_projection,
                   ball, base_vertex, edge, geodesic)

ELLIPTIC = "Elliptic"
COMPACT_SPLIT = "CompactNonElliptic"
NONCOMPACT = "NonCompact"


@dataclass(frozen=True)
class ElementClass:
    tag: str
    translation_length: Fraction
    depth: int | None = None
    slopes: tuple[Fraction, Fraction] = (Fraction(0), Fraction(0))

    @property
    def compact(self) -> bool:
        return self.tag != NONCOMPACT

    def as_dict(self) -> dict:
        return {"tag": self.tag,
                "translation_length": str(self.translation_length),
                "depth": self.depth,
                "slopes": [str(s) for s in self.slopes]}


def discriminant(g: Matrix2) -> PadicScalar:
    t = g.trace()
    return t * t - 4 * g.det


def classify(g: Matrix2) -> ElementClass:
    """Analytic classification from the characteristic polynomial."""
    disc = discriminant(g)
    if disc.is_zero:
        raise NotRegular("discriminant vanishes at working precision")
    s1, s2 = newton_valuations(g)
    if s1 != s2:
        return ElementClass(NONCOMPACT, abs(s2 - s1), None, (s1, s2))
    if not is_square(disc):
        return ElementClass(ELLIPTIC, Fraction(0), None, (s1, s2))
    # split with equal eigenvalue valuations: depth of lambda1/lambda2 - 1
    depth = Fraction(val(disc), 2) - s1
    return ElementClass(COMPACT_SPLIT, Fraction(0), int(depth), (s1, s2))


# fixed sets -------------------------------------------------------------------

@dataclass
class FixedSet:
    window: TreeBall
    vertices: list[Vertex]
    edges: list[tuple[OrientedEdge, bool]]   # (reference edge, orientation reversed?)

    @property
    def stable_edges(self) -> list[OrientedEdge]:
        return [e for e, _ in self.edges]

    @property
    def reversed_edges(self) -> list[OrientedEdge]:
        """Edges that are stable but not fixed: only their barycenter is fixed."""
        return [e for e, rev in self.edges if rev]

    @property
    def barycenters(self) -> list[OrientedEdge]:
        return self.reversed_edges

    def summary(self) -> dict:
        return {"fixed_vertices": len(self.vertices),
                "stable_edges": len(self.edges),
                "reversed_edges": len(self.reversed_edges)}


def fixed_set(g: Matrix2, window: TreeBall) -> FixedSet:
    """Fixed vertices and stable edges of g inside the window, by direct action."""
    image = {v: act(g, v) for v in window.vertices}
    verts = [v for v in window.vertices if image[v] == v]
    edges = []
    for e in window.edges:
        gt, gh = image[e.tail], image[e.head]
        if gt == e.tail and gh == e.head:
            edges.append((e, False))
        elif gt == e.head and gh == e.tail:
            edges.append((e, True))
    return FixedSet(window, verts, edges)


def is_convex(vertices, window: TreeBall | None = None) -> bool:
    """Geodesic closure test for a vertex set."""
    vs = list(vertices)
    s = set(vs)
    for i, u in enumerate(vs):
        for w in vs[i + 1:]:
            for z in geodesic(u, w):
                if z not in s:
                    return False
    return True


def distance_to_apartment(v: Vertex) -> int:
    return apartment_projection(v)[1]


def empirical_class(g: Matrix2, window: TreeBall) -> str:
    """Classification read from the fixed set in a window."""
    fs = fixed_set(g, window)
    if not fs.vertices and not fs.edges:
        return NONCOMPACT
    touches = any(window.dist(v) == window.radius for v in fs.vertices)
    return COMPACT_SPLIT if touches else ELLIPTIC


# tori -------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusData:
    """The connected centralizer torus modulo its compact part.

    ``shift`` generates the torus modulo (center x maximal compact subgroup);
    ``compact_gens`` is a finite list of torus elements fixing the base vertex
    that together with ``shift`` move every orbit representative.
    """
    kind: str
    shift: Matrix2
    compact_gens: tuple[Matrix2, ...]


def _is_diagonal(g: Matrix2) -> bool:
    return g.b.is_exact_zero and g.c.is_exact_zero


def _is_standard_elliptic(g: Matrix2) -> bool:
    return (g.a.agrees(g.d) and not g.c.is_zero
            and (g.b - g.c.shift(1)).is_zero)


def torus_data(g: Matrix2, unit_level: int = 3) -> TorusData:
    """Centralizer torus data for diagonal and standard ramified elliptic elements."""
    p = g.p
    if _is_diagonal(g):
        units = [u for u in range(1, p ** unit_level) if u % p]
        gens = tuple(Matrix2.diag(1, u, p) for u in units)
        return TorusData("split", Matrix2.diag(1, p, p), gens)
    if _is_standard_elliptic(g):
        gens = []
        for x in range(p):
            for y in range(p):
                if x % p:
                    gens.append(Matrix2.from_rows([[x, y * p], [y, x]], p))
        return TorusData("elliptic", Matrix2.from_rows([[0, p], [1, 0]], p), tuple(gens))
    raise NotImplementedError("torus data only for diagonal or [[a, b p], [b, a]] elements")


def tube(g: Matrix2, r: int, window: TreeBall) -> set[Vertex]:
    """Vertices of the torus orbit of B(base, r) lying in the window."""
    cls = classify(g)
    if not cls.compact:
        raise NotCompact("tube requires a compact element")
    td = torus_data(g)
    o = base_vertex(g.p)
    core = set(ball(o, r).vertices)
    out = set(v for v in core if v in window)
    inv = mat_inv(td.shift)
    for step in (td.shift, inv):
        cur = core
        for _ in range(2 * window.radius + 2 * r + 2):
            cur = {act(step, v) for v in cur}
            out |= {v for v in cur if v in window}
    # compact part of the torus fixes the base vertex and preserves the ball
    return out


# fundamental domains ----------------------------------------------------------

def _facet_key(f):
    if isinstance(f, Vertex):
        return (0, f.key())
    return (1, f.tail.key(), f.head.key())


def _act_facet(g: Matrix2, f):
    if isinstance(f, Vertex):
        return act(g, f)
    return edge(act(g, f.tail), act(g, f.head))


def _facet_depth(window: TreeBall, f) -> int:
    if isinstance(f, Vertex):
        return window.dist(f)
    return window.edge_depth(f)


@dataclass
class FundamentalDomain:
    facets: list
    orbit_of: dict           # facet -> index into facets
    boundary_fragments: int  # classes dropped as window-boundary pieces

    def vertices(self) -> list[Vertex]:
        return [f for f in self.facets if isinstance(f, Vertex)]

    def edges(self) -> list[OrientedEdge]:
        return [f for f in self.facets if not isinstance(f, Vertex)]


def fundamental_domain(g: Matrix2, window: TreeBall) -> FundamentalDomain:
    """Torus-orbit representatives of the fixed facets in the window.

    Orbits are generated inside the window by the torus generators.  Each
    orbit is represented by its member closest to the window center, ties
    broken by the smallest canonical form.  Classes with no member whose
    apartment projection is the base vertex are window-boundary fragments
    of other orbits and are dropped (the count is reported).
    """
    cls = classify(g)
    fs = fixed_set(g, window)
    facets = list(fs.vertices) + [e for e, _ in fs.edges]
    if not facets:
        raise NotCompact("no fixed facet in the window")
    if cls.tag == ELLIPTIC:
        facets.sort(key=lambda f: (_facet_depth(window, f), _facet_key(f)))
        return FundamentalDomain(facets, {f: i for i, f in enumerate(facets)}, 0)
    td = torus_data(g)
    parent = {f: f for f in facets}

    def find(f):
        while parent[f] != f:
            parent[f] = parent[parent[f]]
            f = parent[f]
        return f

    members = set(facets)
    gens = list(td.compact_gens) + [td.shift, mat_inv(td.shift)]
    for f in facets:
        for h in gens:
            img = _act_facet(h, f)
            if img in members:
                ra, rb = find(f), find(img)
                if ra != rb:
                    parent[ra] = rb
    classes: dict = {}
    for f in facets:
        classes.setdefault(find(f), []).append(f)

    def anchored(f) -> bool:
        if isinstance(f, Vertex):
            return apartment_projection(f)[0] == 0
        k0, d0 = apartment_projection(f.tail)
        k1, d1 = apartment_projection(f.head)
        if d0 == d1 == 0:
            return min(k0, k1) == 0
        return (k0 if d0 >= d1 else k1) == 0

    reps = []
    dropped = 0
    for cl in classes.values():
        anchors = [f for f in cl if anchored(f)]
        if not anchors:
            dropped += 1
            continue
        reps.append(min(anchors, key=lambda f: (_facet_depth(window, f), _facet_key(f))))
    reps.sort(key=lambda f: (_facet_key(f)[0], _facet_depth(window, f), _facet_key(f)))
    index = {}
    for cl in classes.values():
        for i, r in enumerate(reps):
            if r in cl:
                for f in cl:
                    index[f] = i
    return FundamentalDomain(reps, index, dropped)


def orbit_counts(g: Matrix2, r: int, window: TreeBall) -> tuple[FundamentalDomain, list[int]]:
    """For each fundamental-domain facet, how many of its orbit members lie in B(base, r)."""
    fd = fundamental_domain(g, window)
    counts = [0] * len(fd.facets)
    for f, i in fd.orbit_of.items():
        if _facet_depth(window, f) <= r:
            counts[i] += 1
    return fd, counts


def sliding_window_counts(g: Matrix2, length: int, window: TreeBall) -> list[tuple[int, int]]:
    """Fixed-vertex counts whose apartment projection lies in [k, k+length).

    Only start positions k for which the whole strip, thickened by the
    fixed-set depth, fits in the window are reported.
    """
    fs = fixed_set(g, window)
    proj = {v: apartment_projection(v) for v in fs.vertices}
    reach = max((d for _, d in proj.values()), default=0)
    out = []
    R = window.radius
    for k in range(-R, R + 1):
        lo, hi = k, k + length - 1
        if max(abs(lo), abs(hi)) + reach > R:
            continue
        out.append((k, sum(1 for (kk, _) in proj.values() if lo <= kk <= hi)))
    return out

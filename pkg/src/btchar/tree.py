"""The Bruhat-Tits tree of SL2(Q_p) as homothety classes of lattices.

A vertex is stored through a normalized basis ``[[p^a, 0], [b, p^c]]``
(columns span the lattice) with ``a, c >= 0``, ``0 <= b < p^c`` and the
lattice primitive, i.e. ``min(a, c, v(b)) = 0``.  The base vertex is the
class of ``Z_p^2`` and has form ``(0, 0, 0)``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import BudgetExceeded, PrecisionExhausted, SingularMatrix
from .padic import DEFAULT_PRECISION, Matrix2, PadicScalar, int_val

DEFAULT_MAX_VERTICES = 200_000


@dataclass(frozen=True, order=True)
class Vertex:
    a: int
    c: int
    b: int
    p: int = field(compare=True)

    def key(self) -> tuple[int, int, int]:
        return (self.a, self.c, self.b)

    def basis(self) -> tuple[int, int, int, int]:
        """Integer basis matrix entries (m11, m12, m21, m22)."""
        return (self.p ** self.a, 0, self.b, self.p ** self.c)

    def basis_matrix(self, N: int = DEFAULT_PRECISION) -> Matrix2:
        m11, m12, m21, m22 = self.basis()
        return Matrix2.from_rows([[m11, m12], [m21, m22]], self.p, N)

    def label(self) -> str:
        return f"{self.a},{self.c},{self.b}"

    def __repr__(self) -> str:
        return f"V({self.a},{self.c},{self.b})"


def base_vertex(p: int) -> Vertex:
    return Vertex(0, 0, 0, p)


def canon_tri(a: int, c: int, b: int, p: int) -> Vertex:
    """Canonical vertex of the lattice spanned by (p^a, b) and (0, p^c)."""
    b %= p ** c
    k = min(a, c, int_val(b, p)) if b else min(a, c)
    if k:
        a, c, b = a - k, c - k, b // p ** k
    return Vertex(a, c, b, p)


@dataclass(frozen=True, order=True)
class OrientedEdge:
    tail: Vertex
    head: Vertex

    def reverse(self) -> "OrientedEdge":
        return OrientedEdge(self.head, self.tail)

    def unoriented(self) -> "OrientedEdge":
        """The reference orientation: tail is the smaller canonical form."""
        if self.head.key() < self.tail.key():
            return self.reverse()
        return self

    def is_reference(self) -> bool:
        return self.tail.key() < self.head.key()

    def vertices(self) -> tuple[Vertex, Vertex]:
        return (self.tail, self.head)

    def __repr__(self) -> str:
        return f"E({self.tail.label()}->{self.head.label()})"


def edge(u: Vertex, w: Vertex) -> OrientedEdge:
    """Reference-oriented edge on two adjacent vertices."""
    return OrientedEdge(u, w).unoriented()


# lattice reduction ----------------------------------------------------------

def lattice_vertex(columns, p: int) -> Vertex:
    """Canonical vertex of the lattice spanned by p-adic column vectors.

    ``columns`` is a list of pairs of PadicScalar.  The reduction is a column
    Hermite form over Z_p; digits are tracked and exhaustion raises.
    """
    cols = [(x, y) for (x, y) in columns if not (x.is_exact_zero and y.is_exact_zero)]
    if len(cols) < 2:
        raise SingularMatrix("fewer than two nonzero generators")
    top = [(i, x.v) for i, (x, _) in enumerate(cols) if x.v is not None]
    if not top:
        raise SingularMatrix("generators span no vector with nonzero first coordinate")
    piv, a = min(top, key=lambda t: t[1])
    for x, _ in cols:
        if x.v is None and x.N is not None and x.N < a:
            raise PrecisionExhausted("cannot identify the pivot of the first row")
    x0, y0 = cols[piv]
    rest = []
    for i, (x, y) in enumerate(cols):
        if i == piv:
            continue
        if x.is_exact_zero:
            rest.append(y)
        else:
            rest.append(y - (x / x0) * y0)
    low = [y.v for y in rest if y.v is not None]
    if not low:
        raise SingularMatrix("generators span a rank-one lattice")
    c = min(low)
    for y in rest:
        if y.v is None and y.N is not None and y.N < c:
            raise PrecisionExhausted("second elementary divisor not resolved")
    # first basis vector normalized to (p^a, b)
    b = y0 * (PadicScalar.from_int(1, p).shift(a) / x0)
    m = min(a, c, b.v if b.v is not None else c)
    if b.v is not None or b.N is not None:
        if b.abs_prec() < c:
            raise PrecisionExhausted("off-diagonal entry not known modulo p^c")
    bint = 0
    if b.v is not None:
        bs = b.shift(-m)
        bint = bs.residue(c - m)
    return canon_tri(a - m, c - m, bint, p)


def act(g: Matrix2, v: Vertex) -> Vertex:
    """The vertex g . v."""
    p = v.p
    N = min(x.N for x in g.entries() if x.N is not None) if any(
        x.N is not None for x in g.entries()) else DEFAULT_PRECISION
    m11, _, m21, m22 = v.basis()
    s = lambda n: PadicScalar.from_int(n, p, N)
    col1 = (g.a * s(m11) + g.b * s(m21), g.c * s(m11) + g.d * s(m21))
    col2 = (g.b * s(m22), g.d * s(m22))
    return lattice_vertex([col1, col2], p)


def act_edge(g: Matrix2, e: OrientedEdge) -> OrientedEdge:
    return OrientedEdge(act(g, e.tail), act(g, e.head))


# metric -----------------------------------------------------------------------

def _relative(u: Vertex, w: Vertex) -> tuple[int, int, int, int]:
    """Integer matrix adj(B_u) B_w."""
    a11, _, a21, a22 = u.basis()
    w11, _, w21, w22 = w.basis()
    # adj(B_u) = [[a22, 0], [-a21, a11]]
    return (a22 * w11, 0, -a21 * w11 + a11 * w21, a11 * w22)


def distance(u: Vertex, w: Vertex) -> int:
    """Tree distance: difference of the elementary-divisor exponents."""
    if u.p != w.p:
        raise ValueError("mismatched primes")
    p = u.p
    x = _relative(u, w)
    minval = min(int_val(t, p) for t in x if t != 0)
    du = u.a + u.c
    dw = w.a + w.c
    return du + dw - 2 * minval


def neighbors(v: Vertex) -> list[Vertex]:
    """The p+1 adjacent vertices (index-p sublattices)."""
    p = v.p
    out = [canon_tri(v.a, v.c + 1, v.b + t * p ** v.c, p) for t in range(p)]
    out.append(canon_tri(v.a + 1, v.c, p * v.b, p))
    return out


def _hnf_int_columns(cols, p: int) -> Vertex:
    N = DEFAULT_PRECISION + max((abs(int_val(t, p)) for c in cols for t in c if t), default=0)
    return lattice_vertex([(PadicScalar.from_int(x, p, N), PadicScalar.from_int(y, p, N))
                           for x, y in cols], p)


def geodesic(u: Vertex, w: Vertex) -> list[Vertex]:
    """Vertices of the unique geodesic from u to w, in order.

    With L the lattice of u and L' a representative of w contained in L but
    not in pL, the path is the classes of L' + p^k L for k = 0..n.
    """
    p = u.p
    n = distance(u, w)
    if n == 0:
        return [u]
    x = _relative(u, w)
    du = u.a + u.c
    alpha = min(int_val(t, p) for t in x if t != 0) - du
    # L' = p^(-alpha) L_w; work with p^alpha L' = L_w and p^alpha L.
    u11, _, u21, u22 = u.basis()
    w11, _, w21, w22 = w.basis()
    path = []
    for k in range(n + 1):
        e = k + alpha
        shift = max(0, -e)
        sc = p ** shift
        cols = [(w11 * sc, w21 * sc), (0, w22 * sc),
                (u11 * p ** (e + shift), u21 * p ** (e + shift)), (0, u22 * p ** (e + shift))]
        path.append(_hnf_int_columns(cols, p))
    return path


# balls ------------------------------------------------------------------------

def sphere_count(p: int, r: int) -> int:
    return 1 if r == 0 else (p + 1) * p ** (r - 1)


def ball_count(p: int, r: int) -> int:
    return 1 + (p + 1) * (p ** r - 1) // (p - 1)


@dataclass
class TreeBall:
    center: Vertex
    radius: int
    vertices: list[Vertex]
    edges: list[OrientedEdge]
    depth: dict[Vertex, int]
    parent: dict[Vertex, Vertex | None]
    vindex: dict[Vertex, int] = field(default_factory=dict)
    eindex: dict[OrientedEdge, int] = field(default_factory=dict)

    def __post_init__(self):
        self.vindex = {v: i for i, v in enumerate(self.vertices)}
        self.eindex = {e: i for i, e in enumerate(self.edges)}

    @property
    def p(self) -> int:
        return self.center.p

    def __contains__(self, v: Vertex) -> bool:
        return v in self.vindex

    def has_edge(self, e: OrientedEdge) -> bool:
        return e.unoriented() in self.eindex

    def dist(self, v: Vertex) -> int:
        return self.depth[v]

    def edge_depth(self, e: OrientedEdge) -> int:
        """Distance from the center to the farther endpoint."""
        return max(self.depth[e.tail], self.depth[e.head])


def ball(o: Vertex, r: int, max_vertices: int = DEFAULT_MAX_VERTICES) -> TreeBall:
    """Closed ball of radius r about o, enumerated breadth-first."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    if ball_count(o.p, r) > max_vertices:
        raise BudgetExceeded(f"ball of radius {r} has {ball_count(o.p, r)} vertices")
    depth = {o: 0}
    parent: dict[Vertex, Vertex | None] = {o: None}
    order = [o]
    edges = []
    queue = deque([o])
    while queue:
        v = queue.popleft()
        if depth[v] == r:
            continue
        for w in sorted(neighbors(v), key=Vertex.key):
            if w in depth:
                continue
            depth[w] = depth[v] + 1
            parent[w] = v
            order.append(w)
            edges.append(edge(v, w))
            queue.append(w)
    return TreeBall(o, r, order, edges, depth, parent)


def standard_apartment_window(n: int, p: int) -> list[Vertex]:
    """Vertices diag(1, p^k) . base for -n <= k <= n."""
    out = []
    for k in range(-n, n + 1):
        out.append(Vertex(0, k, 0, p) if k >= 0 else Vertex(-k, 0, 0, p))
    return out


def apartment_vertex(k: int, p: int) -> Vertex:
    return Vertex(0, k, 0, p) if k >= 0 else Vertex(-k, 0, 0, p)


def apartment_projection(v: Vertex) -> tuple[int, int]:
    """(k, d): position k of the nearest standard-apartment vertex and the distance d."""
    p = v.p
    span = v.a + v.c + 1
    best = None
    for k in range(-span, span + 1):
        d = distance(v, apartment_vertex(k, p))
        if best is None or d < best[1]:
            best = (k, d)
    return best


def color(v: Vertex) -> int:
    """Parity of the distance to the base vertex."""
    return (v.a + v.c) % 2


def to_dot(tb: TreeBall, highlight_vertices=(), highlight_edges=(), name: str = "tree") -> str:
    """Graphviz rendering of a ball with optional highlighting."""
    hv = set(highlight_vertices)
    he = {e.unoriented() for e in highlight_edges}
    lines = [f"graph {name} {{", "  node [shape=circle, fontsize=8];"]
    for v in tb.vertices:
        style = ', style=filled, fillcolor="#e66"' if v in hv else ""
        lines.append(f'  "{v.label()}" [label="{v.label()}"{style}];')
    for e in tb.edges:
        style = ' [color="#e66", penwidth=2]' if e in he else ""
        lines.append(f'  "{e.tail.label()}" -- "{e.head.label()}"{style};')
    lines.append("}")
    return "\n".join(lines) + "\n"

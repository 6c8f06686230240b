"""Oriented chains with coefficients in the fibers, and operators on them.

A window complex is the finite complex of chains supported in a ball of the
tree.  Degree-q chains are vectors in the basis {(facet, block)}: the value
of a chain on a facet is the step function taking the coordinate of each
block on that block.  Edges are stored in their reference orientation; the
value on the opposite orientation is the negative.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .coeff import (Model, Partition, StepFunction, average_congruence, block_image,
                    matrix_entries, n_cells, parent_cell)
from .errors import (DepthInsufficient, FiberCoercionError, NicenessFailure, NonCycle,
                     WindowEscape)
from .linalg import (Echelon, SparseMatrix, Vec, independent_subset, nullspace, rank,
                     vadd_inplace, vclean, vscale)
from .padic import Matrix2
from .tree import OrientedEdge, TreeBall, Vertex, act, edge, geodesic


def _fr(g) -> tuple:
    return matrix_entries(g)


@dataclass
class SignedPermutation:
    """A linear map sending basis vector j to sign[j] * basis vector target[j]."""
    target: list[int]
    sign: list[int]

    def matrix(self) -> SparseMatrix:
        n = len(self.target)
        rows: dict = {}
        for j, (i, s) in enumerate(zip(self.target, self.sign)):
            rows.setdefault(i, {})[j] = Fraction(s)
        return SparseMatrix(n, n, rows)

    def apply(self, v: Vec) -> Vec:
        out = {}
        for j, x in v.items():
            out[self.target[j]] = out.get(self.target[j], 0) + self.sign[j] * x
        return vclean(out)

    def inverse(self) -> "SignedPermutation":
        n = len(self.target)
        t = [0] * n
        s = [1] * n
        for j, (i, sg) in enumerate(zip(self.target, self.sign)):
            t[i] = j
            s[i] = sg
        return SignedPermutation(t, s)

    def compose(self, other: "SignedPermutation") -> "SignedPermutation":
        """self after other."""
        t = [self.target[i] for i in other.target]
        s = [self.sign[i] * sg for i, sg in zip(other.target, other.sign)]
        return SignedPermutation(t, s)

    def is_identity(self) -> bool:
        return all(i == j and s == 1 for j, (i, s) in enumerate(zip(self.target, self.sign)))

    def order(self, limit: int = 1 << 20) -> int:
        """Smallest k >= 1 with self^k = identity, found by iterating powers."""
        cur = self
        k = 1
        while not cur.is_identity():
            cur = self.compose(cur)
            k += 1
            if k > limit:
                raise NicenessFailure("signed permutation order exceeds the limit")
        return k

    def trace(self) -> int:
        return sum(s for j, (i, s) in enumerate(zip(self.target, self.sign)) if i == j)


class ChainComplex:
    """Chains supported in a window ball, with fibers from a model at depth e."""

    def __init__(self, model: Model, e: int, window: TreeBall):
        self.model = model
        self.e = e
        self.window = window
        self.p = window.p
        self.origin = window.center
        self.vertices = list(window.vertices)
        self.edges = list(window.edges)
        self.vpart = [model.partition(v, e) for v in self.vertices]
        self.epart = [model.partition(E, e) for E in self.edges]
        self.off0 = []
        n = 0
        for P in self.vpart:
            self.off0.append(n)
            n += P.nblocks
        self.n0 = n
        self.off1 = []
        n = 0
        for P in self.epart:
            self.off1.append(n)
            n += P.nblocks
        self.n1 = n
        self.basis0 = [(v, b) for v, P in zip(self.vertices, self.vpart) for b in range(P.nblocks)]
        self.basis1 = [(E, b) for E, P in zip(self.edges, self.epart) for b in range(P.nblocks)]
        self.global_level = max(P.level for P in self.vpart)
        self._cache: dict = {}

    # indexing --------------------------------------------------------------
    def vpos(self, v: Vertex) -> int:
        try:
            return self.window.vindex[v]
        except KeyError:
            raise WindowEscape(f"{v} is outside the window") from None

    def epos(self, E: OrientedEdge) -> int:
        try:
            return self.window.eindex[E.unoriented()]
        except KeyError:
            raise WindowEscape(f"{E} is outside the window") from None

    def index0(self, v: Vertex, b: int) -> int:
        return self.off0[self.vpos(v)] + b

    def index1(self, E: OrientedEdge, b: int) -> int:
        return self.off1[self.epos(E)] + b

    def vertex_partition(self, v: Vertex) -> Partition:
        return self.vpart[self.vpos(v)]

    def edge_partition(self, E: OrientedEdge) -> Partition:
        return self.epart[self.epos(E)]

    def in_indices(self, r: int) -> tuple[list[int], list[int]]:
        """Basis indices of chains supported in the closed ball B(origin, r)."""
        i0 = [i for i, (v, _) in enumerate(self.basis0) if self.window.dist(v) <= r]
        i1 = [i for i, (E, _) in enumerate(self.basis1) if self.window.edge_depth(E) <= r]
        return i0, i1

    # chain construction ----------------------------------------------------
    def vertex_chain(self, v: Vertex, f: StepFunction) -> Vec:
        """delta_v with value f (f must lie in the fiber at v)."""
        coords = self.vertex_partition(v).coordinates(f)
        base = self.index0(v, 0)
        return vclean({base + b: c for b, c in enumerate(coords)})

    def edge_chain(self, E: OrientedEdge, f: StepFunction) -> Vec:
        """Oriented edge E with value f (negated if E is not in reference orientation)."""
        coords = self.edge_partition(E).coordinates(f)
        s = 1 if E.is_reference() else -1
        base = self.index1(E, 0)
        return vclean({base + b: s * c for b, c in enumerate(coords)})

    def value0(self, chain: Vec, v: Vertex) -> StepFunction:
        P = self.vertex_partition(v)
        base = self.index0(v, 0)
        return P.combination([chain.get(base + b, 0) for b in range(P.nblocks)])

    def value1(self, chain: Vec, E: OrientedEdge) -> StepFunction:
        P = self.edge_partition(E)
        base = self.index1(E, 0)
        s = 1 if E.is_reference() else -1
        return P.combination([s * chain.get(base + b, 0) for b in range(P.nblocks)])

    def support0(self, chain: Vec) -> list[Vertex]:
        return sorted({self.basis0[i][0] for i in chain}, key=lambda v: (self.window.dist(v), v.key()))

    def support1(self, chain: Vec) -> list[OrientedEdge]:
        return sorted({self.basis1[i][0] for i in chain},
                      key=lambda E: (self.window.edge_depth(E), E.tail.key(), E.head.key()))

    # boundary and augmentation -----------------------------------------------
    def _vertex_to_edge_blocks(self, v: Vertex, E: OrientedEdge) -> list[int]:
        """For each block of v, the block of E containing it (fiber inclusion)."""
        Pv = self.vertex_partition(v)
        PE = self.edge_partition(E)
        L = max(Pv.level, PE.level)
        p = self.p
        out: list = [None] * Pv.nblocks
        for c in range(n_cells(p, L)):
            bv = Pv.block_of[parent_cell(p, L, c, Pv.level)]
            bE = PE.block_of[parent_cell(p, L, c, PE.level)]
            if out[bv] is None:
                out[bv] = bE
            elif out[bv] != bE:
                raise FiberCoercionError(f"edge fiber of {E} is not inside the fiber of {v}")
        return out

    def boundary(self) -> SparseMatrix:
        """Matrix of the boundary map C_1 -> C_0."""
        if "D" in self._cache:
            return self._cache["D"]
        cols: list[Vec] = []
        for E, PE in zip(self.edges, self.epart):
            head_map = self._vertex_to_edge_blocks(E.head, E)
            tail_map = self._vertex_to_edge_blocks(E.tail, E)
            h0 = self.index0(E.head, 0)
            t0 = self.index0(E.tail, 0)
            for beta in range(PE.nblocks):
                col = {}
                for b, bb in enumerate(head_map):
                    if bb == beta:
                        col[h0 + b] = Fraction(1)
                for b, bb in enumerate(tail_map):
                    if bb == beta:
                        col[t0 + b] = Fraction(-1)
                cols.append(col)
        D = SparseMatrix.from_columns(self.n0, cols)
        self._cache["D"] = D
        return D

    def augmentation(self) -> SparseMatrix:
        """Matrix of the augmentation C_0 -> V, V written on cells of the global level."""
        if "eps" in self._cache:
            return self._cache["eps"]
        L = self.global_level
        p = self.p
        cols: list[Vec] = []
        for v, P in zip(self.vertices, self.vpart):
            cells_of: list[list[int]] = [[] for _ in range(P.nblocks)]
            for c in range(n_cells(p, L)):
                cells_of[P.block_of[parent_cell(p, L, c, P.level)]].append(c)
            for b in range(P.nblocks):
                cols.append({c: Fraction(1) for c in cells_of[b]})
        A = SparseMatrix.from_columns(n_cells(p, L), cols)
        self._cache["eps"] = A
        return A

    def boundary_of(self, chain1: Vec) -> Vec:
        return self.boundary().matvec(chain1)

    def augment(self, chain0: Vec) -> Vec:
        return self.augmentation().matvec(chain0)

    # group action ------------------------------------------------------------
    def action(self, g: Matrix2) -> tuple[SignedPermutation, SignedPermutation]:
        """T_g on C_0 and C_1 as signed permutations of the block bases."""
        gm = _fr(g)
        vimg = {}
        for v in self.vertices:
            w = act(g, v)
            if w not in self.window:
                raise WindowEscape(f"g moves {v} to {w}, outside the window")
            vimg[v] = w
        t0 = [0] * self.n0
        s0 = [1] * self.n0
        for v, P in zip(self.vertices, self.vpart):
            w = vimg[v]
            Q = self.vertex_partition(w)
            imgs = block_image(gm, P, Q)
            base_v = self.index0(v, 0)
            base_w = self.index0(w, 0)
            for b, bb in enumerate(imgs):
                t0[base_v + b] = base_w + bb
        t1 = [0] * self.n1
        s1 = [1] * self.n1
        for E, P in zip(self.edges, self.epart):
            gt, gh = vimg[E.tail], vimg[E.head]
            F = edge(gt, gh)
            sign = 1 if F.tail == gt else -1
            Q = self.edge_partition(F)
            imgs = block_image(gm, P, Q)
            base_E = self.index1(E, 0)
            base_F = self.index1(F, 0)
            for b, bb in enumerate(imgs):
                t1[base_E + b] = base_F + bb
                s1[base_E + b] = sign
        return SignedPermutation(t0, s0), SignedPermutation(t1, s1)

    def action_matrices(self, g: Matrix2) -> tuple[SparseMatrix, SparseMatrix]:
        a0, a1 = self.action(g)
        return a0.matrix(), a1.matrix()

    def averaging(self) -> tuple[SparseMatrix, SparseMatrix]:
        """pi(K) on chains for K = U_origin^(e), as exact matrices.

        K = B K(n) B^-1 with n = e+1 acts on the window data through the
        finite quotient by B K(N) B^-1, N large enough that the latter fixes
        every window facet and block.  The quotient factors as lower
        unipotents x diagonal x upper unipotents, so the average is the
        product of four cyclic averages.
        """
        if "avg" in self._cache:
            return self._cache["avg"]
        p = self.p
        n = self.e + 1
        o = self.origin
        d_o = o.a + o.c
        N = max(self.global_level, self.window.radius) + 2 * d_o + n
        B = tuple(Fraction(t) for t in o.basis())
        a, b, c, d = B
        det = a * d - b * c
        Binv = (d / det, -b / det, -c / det, a / det)

        def conj(m):
            x = _mul(_mul(B, m), Binv)
            return Matrix2.from_rows([[x[0], x[1]], [x[2], x[3]]], p)

        q = p ** n
        size = p ** (N - n)
        families = [
            [(1, 0, q * s, 1) for s in range(size)],
            [(1 + q * s, 0, 0, 1) for s in range(size)],
            [(1, 0, 0, 1 + q * s) for s in range(size)],
            [(1, q * s, 0, 1) for s in range(size)],
        ]
        mats0 = []
        mats1 = []
        for fam in families:
            acc0: dict = {}
            acc1: dict = {}
            for m in fam:
                a0, a1 = self.action(conj(tuple(Fraction(t) for t in m)))
                _accumulate(acc0, a0)
                _accumulate(acc1, a1)
            w = Fraction(1, len(fam))
            mats0.append(SparseMatrix(self.n0, self.n0, {i: vscale(r, w) for i, r in acc0.items()}))
            mats1.append(SparseMatrix(self.n1, self.n1, {i: vscale(r, w) for i, r in acc1.items()}))
        A0 = mats0[0] @ mats0[1] @ mats0[2] @ mats0[3]
        A1 = mats1[0] @ mats1[1] @ mats1[2] @ mats1[3]
        self._cache["avg"] = (A0, A1)
        return A0, A1

    def function_action(self, g: Matrix2) -> tuple[SparseMatrix, SparseMatrix]:
        """T_f for f = 1_{gK}/vol(K): T_g composed with the K-average."""
        T0, T1 = self.action_matrices(g)
        A0, A1 = self.averaging()
        return T0 @ A0, T1 @ A1

    # truncation --------------------------------------------------------------
    def truncation(self, r: int) -> tuple[SparseMatrix, SparseMatrix]:
        """Q^r: projection onto chains supported in X^r = B(origin, r)."""
        i0, i1 = self.in_indices(r)
        m0 = [0] * self.n0
        m1 = [0] * self.n1
        for i in i0:
            m0[i] = 1
        for i in i1:
            m1[i] = 1
        return SparseMatrix.diagonal(m0), SparseMatrix.diagonal(m1)

    # solving the boundary ---------------------------------------------------------
    def solve_boundary(self, chain0: Vec) -> Vec:
        """The unique 1-chain with the given boundary (the window complex has H_1 = 0).

        Leaves are peeled from the outside in: the value at a vertex, after
        removing its children's edges, must be carried by the edge to its
        parent.
        """
        res = dict(chain0)
        out: Vec = {}
        order = sorted(self.vertices, key=lambda v: (-self.window.dist(v), v.key()))
        for x in order:
            if x == self.origin:
                break
            base = self.index0(x, 0)
            P = self.vertex_partition(x)
            vals = [res.get(base + b, 0) for b in range(P.nblocks)]
            if not any(vals):
                continue
            y = self.window.parent[x]
            E = edge(y, x)
            emap = self._vertex_to_edge_blocks(x, E)
            PE = self.edge_partition(E)
            ev: list = [None] * PE.nblocks
            for b, bb in enumerate(emap):
                if ev[bb] is None:
                    ev[bb] = vals[b]
                elif ev[bb] != vals[b]:
                    raise FiberCoercionError(f"value at {x} is not carried by the edge fiber")
            s = 1 if E.head == x else -1
            c = {self.index1(E, bb): s * v for bb, v in enumerate(ev) if v}
            vadd_inplace(out, c)
            vadd_inplace(res, self.boundary().matvec(c), -1)
        if res:
            raise FiberCoercionError("chain is not a boundary")
        return out

    # cycle reduction --------------------------------------------------------------
    def reduce_cycle(self, chain0: Vec, r: int | None = None) -> Vec:
        """Constructive preimage of a 0-cycle, built from the outside in.

        At each step the extreme support vertex x (largest distance to the
        origin, then smallest canonical form) is cleared: every other value
        w_y is averaged over U_x^(e); the average must lie in the fiber of
        the edge from x toward y, and the edge carrying the sum of these
        averages (oriented toward x) is subtracted as a boundary.
        """
        eps = self.augment(chain0)
        if eps:
            raise NonCycle("augmentation of the chain is nonzero")
        if r is not None:
            for v in self.support0(chain0):
                if self.window.dist(v) > r:
                    raise ValueError("cycle is not supported in X^r")
        omega = dict(chain0)
        delta: Vec = {}
        avg_cache = self._cache.setdefault("uavg", {})
        while True:
            supp = self.support0(omega)
            if not supp or supp == [self.origin]:
                if omega:
                    raise NonCycle("residual value at the origin")
                break
            x = min(supp, key=lambda v: (-self.window.dist(v), v.key()))
            dx = self.window.dist(x)
            total = None
            E = None
            for y in supp:
                if y == x:
                    continue
                path = geodesic(x, y)
                z = path[1]
                if self.window.dist(z) >= dx:
                    raise NicenessFailure("geodesic step does not approach the origin")
                F = edge(z, x)
                if E is None:
                    E = F
                elif E != F:
                    raise NicenessFailure("extreme vertex has two inward edges")
                PE = self.edge_partition(F)
                base = self.index0(y, 0)
                Py = self.vertex_partition(y)
                acc = [Fraction(0)] * PE.nblocks
                for b in range(Py.nblocks):
                    cy = omega.get(base + b, 0)
                    if not cy:
                        continue
                    key = (x, y, b)
                    vec = avg_cache.get(key)
                    if vec is None:
                        avg = average_congruence(x, self.e, Py.indicator(b))
                        try:
                            vec = PE.coordinates(avg)
                        except FiberCoercionError:
                            raise DepthInsufficient(
                                f"average over U_{x.label()} of a value at {y.label()} "
                                f"is not in the fiber of {F}") from None
                        avg_cache[key] = vec
                    for i, t in enumerate(vec):
                        acc[i] += cy * t
                total = acc if total is None else [s + t for s, t in zip(total, acc)]
            if E is None:
                raise NonCycle("single support vertex with nonzero value")
            # the x-value equals minus the sum of the averaged values
            c = {self.index1(E, i): (-t if E.head == x else t) for i, t in enumerate(total) if t}
            bc = self.boundary().matvec(c)
            new = dict(omega)
            vadd_inplace(new, bc, -1)
            xb = self.index0(x, 0)
            if any(new.get(xb + b, 0) for b in range(self.vertex_partition(x).nblocks)):
                raise DepthInsufficient(f"averaged values do not cancel the value at {x.label()}")
            for w in self.support0(new):
                if w not in supp and self.window.dist(w) >= dx:
                    raise NicenessFailure("support radius failed to decrease")
            omega = new
            vadd_inplace(delta, c)
        return delta

    def random_cycle(self, rng: random.Random, r: int, terms: int = 4, bound: int = 3) -> Vec:
        """A random 0-cycle supported in B(origin, r), from a kernel basis of the augmentation."""
        basis = self._cycle_basis(r)
        out: Vec = {}
        if not basis:
            return out
        for _ in range(terms):
            vadd_inplace(out, rng.choice(basis), rng.randint(-bound, bound) or 1)
        return out

    def _cycle_basis(self, r: int) -> list[Vec]:
        key = ("zin", r)
        if key not in self._cache:
            i0, _ = self.in_indices(r)
            eps = self.augmentation()
            cols = [eps.column(i) for i in i0]
            sub = SparseMatrix.from_columns(eps.nrows, cols)
            ker = nullspace(sub)
            self._cache[key] = [{i0[k]: x for k, x in v.items()} for v in ker]
        return self._cache[key]


def _mul(x: tuple, y: tuple) -> tuple:
    a, b, c, d = x
    e, f, g, h = y
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def _accumulate(acc: dict, sp: SignedPermutation) -> None:
    for j, (i, s) in enumerate(zip(sp.target, sp.sign)):
        row = acc.setdefault(i, {})
        y = row.get(j, 0) + s
        if y:
            row[j] = y
        else:
            row.pop(j, None)


def geodesic_chain(cx: ChainComplex, x: Vertex, y: Vertex, f: StepFunction) -> Vec:
    """Sum of the oriented edges from x to y, each carrying the value f."""
    path = geodesic(x, y)
    out: Vec = {}
    for u, w in zip(path, path[1:]):
        vadd_inplace(out, cx.edge_chain(OrientedEdge(u, w), f))
    return out


# decompositions and modified truncation ------------------------------------------------

@dataclass
class DecompositionData:
    """C_0 = B_0 + H'_0 and C_1 = B'_0, equivariant under T_gamma.

    ``h_basis`` spans H'_0: its first ``n_in`` vectors span the part inside
    X^r (a complement of the in-cycles in the in-chains), the rest
    complete it to a complement of B_0 in C_0.  B'_0 is all of C_1 because
    the boundary is injective on a tree; the section alpha is the inverse
    of the boundary, and it sends in-boundaries to in-chains.
    """
    complex: ChainComplex
    gamma: Matrix2
    r: int
    in0: list[int]
    in1: list[int]
    h_basis: list[Vec]
    n_in: int
    gamma_order: int
    dims: dict
    _eps_h: Echelon = field(repr=False, default=None)

    def pi_h(self, v: Vec) -> Vec:
        """Projection onto H'_0 along B_0."""
        eps = self.complex.augment(v)
        coords = self._eps_h.coordinates(eps)
        if coords is None:
            raise NicenessFailure("augmentation image not spanned by H'")
        out: Vec = {}
        for k, c in coords.items():
            vadd_inplace(out, self.h_basis[k], c)
        return out

    def pi_b(self, v: Vec) -> Vec:
        out = dict(v)
        vadd_inplace(out, self.pi_h(v), -1)
        return out

    def alpha(self, b: Vec) -> Vec:
        """Section of the boundary on B_0."""
        return self.complex.solve_boundary(b)


def build_decomposition(cx: ChainComplex, gamma: Matrix2, r: int) -> DecompositionData:
    """Nice T_gamma-equivariant decomposition for gamma fixing the origin."""
    if act(gamma, cx.origin) != cx.origin:
        raise NicenessFailure("gamma does not fix the origin")
    D = cx.boundary()
    eps = cx.augmentation()
    in0, in1 = cx.in_indices(r)
    in0set = set(in0)
    rank_D = D.rank()
    if rank_D != cx.n1:
        raise NicenessFailure("H_1 of the window complex is nonzero")
    eps_cols = eps.columns() if False else [eps.column(i) for i in range(cx.n0)]
    rank_eps = rank(eps_cols)
    if rank_D + rank_eps != cx.n0:
        raise NicenessFailure("window complex is not exact in degree 0")
    rank_D_in = rank([D.column(j) for j in in1])
    rank_eps_in = rank([eps_cols[i] for i in in0])
    if rank_D_in + rank_eps_in != len(in0):
        raise NicenessFailure("truncated complex is not exact in degree 0")
    # raw complements: basis vectors whose augmentations are independent
    order = list(in0) + [i for i in range(cx.n0) if i not in in0set]
    picked = independent_subset([eps_cols[i] for i in order])
    S = [order[k] for k in picked]
    S_in = [i for i in S if i in in0set]
    S_out = [i for i in S if i not in in0set]
    ech_in = Echelon()
    for i in S_in:
        ech_in.insert(eps_cols[i])
    ech_all = Echelon()
    for i in S_in + S_out:
        ech_all.insert(eps_cols[i])

    def raw_in(j: int) -> Vec:
        coords = ech_in.coordinates(eps_cols[j])
        return {S_in[k]: c for k, c in coords.items()}

    def raw_out(j: int) -> Vec:
        coords = ech_all.coordinates(eps_cols[j])
        m = len(S_in)
        return {S_out[k - m]: c for k, c in coords.items() if k >= m}

    T0, T1 = cx.action(gamma)
    order_g = max(T0.order(), T1.order())
    powers = []
    cur = SignedPermutation(list(range(cx.n0)), [1] * cx.n0)
    for _ in range(order_g):
        powers.append((cur, cur.inverse()))
        cur = T0.compose(cur)

    def averaged(j: int, raw) -> Vec:
        acc: Vec = {}
        for P, Pinv in powers:
            k = Pinv.target[j]
            s = Pinv.sign[j]
            vadd_inplace(acc, P.apply(raw(k)), s)
        return vscale(acc, Fraction(1, len(powers)))

    h_in = [averaged(i, raw_in) for i in S_in]
    h_out = [averaged(i, raw_out) for i in S_out]
    h_basis = h_in + h_out
    eps_h = Echelon()
    for h in h_basis:
        if eps_h.insert(eps.matvec(h)) is not None:
            raise NicenessFailure("averaged complement is degenerate")
    dec = DecompositionData(cx, gamma, r, in0, in1, h_basis, len(h_in), order_g,
                            {"C0": cx.n0, "C1": cx.n1, "B0": rank_D, "H0": len(h_basis),
                             "C0_in": len(in0), "C1_in": len(in1), "H0_in": len(h_in)},
                            eps_h)
    verify_niceness(dec, T0)
    return dec


def verify_niceness(dec: DecompositionData, T0: SignedPermutation | None = None) -> None:
    cx = dec.complex
    in0set = set(dec.in0)
    if dec.dims["B0"] + dec.dims["H0"] != cx.n0:
        raise NicenessFailure("C_0 is not B_0 + H'_0")
    for h in dec.h_basis[:dec.n_in]:
        if not set(h) <= in0set:
            raise NicenessFailure("inner complement leaves X^r")
    if T0 is None:
        T0, _ = cx.action(dec.gamma)
    span = Echelon()
    for h in dec.h_basis:
        span.insert(h)
    span_in = Echelon()
    for h in dec.h_basis[:dec.n_in]:
        span_in.insert(h)
    for k, h in enumerate(dec.h_basis):
        th = T0.apply(h)
        if not span.contains(th):
            raise NicenessFailure("H'_0 is not T_gamma-stable")
        if k < dec.n_in and not span_in.contains(th):
            raise NicenessFailure("inner part of H'_0 is not T_gamma-stable")
    # in-boundaries have in-preimages: boundary of in-edges spans the in-cycles
    D = cx.boundary()
    for j in dec.in1:
        if not set(D.column(j)) <= in0set:
            raise NicenessFailure("boundary of an in-edge leaves X^r")


@dataclass
class ModifiedTruncation:
    q0: SparseMatrix
    q1: SparseMatrix
    Q0: SparseMatrix
    Q1: SparseMatrix


def modified_truncation(dec: DecompositionData) -> ModifiedTruncation:
    """Q-bar: the block upper-triangular modification of the truncation.

    On C_1 = B'_0 it is alpha . pi_B . Q_0 . boundary; on C_0 = B_0 + H'_0 it
    keeps the B->B, H'->B and H'->H' blocks of Q_0 and drops the B->H' block.
    """
    cx = dec.complex
    Q0, Q1 = cx.truncation(dec.r)
    D = cx.boundary()
    cols1 = []
    for j in range(cx.n1):
        v = Q0.matvec(D.column(j))
        cols1.append(dec.alpha(dec.pi_b(v)))
    qb1 = SparseMatrix.from_columns(cx.n1, cols1)
    cols0 = []
    for i in range(cx.n0):
        ei = {i: Fraction(1)}
        u = dec.pi_b(ei)
        col = Q0.matvec(ei)
        vadd_inplace(col, dec.pi_h(Q0.matvec(u)), -1)
        cols0.append(col)
    qb0 = SparseMatrix.from_columns(cx.n0, cols0)
    return ModifiedTruncation(qb0, qb1, Q0, Q1)


# witnesses and dumps ---------------------------------------------------------------------

def truncation_witness(cx: ChainComplex, r: int) -> dict | None:
    """An edge chain c leaving X^r with Q_0 d c != d Q_1 c, or None."""
    Q0, Q1 = cx.truncation(r)
    D = cx.boundary()
    for E, P in zip(cx.edges, cx.epart):
        if min(cx.window.dist(E.tail), cx.window.dist(E.head)) == r \
                and cx.window.edge_depth(E) == r + 1:
            c = {cx.index1(E, 0): Fraction(1)}
            lhs = Q0.matvec(D.matvec(c))
            rhs = D.matvec(Q1.matvec(c))
            if lhs != rhs:
                return {"edge": E, "chain": c, "Q0_boundary": lhs, "boundary_Q1": rhs}
    return None


def matrix_triplets(m: SparseMatrix) -> str:
    """Sparse triplet text: a header line, then 'row col num/den' per nonzero entry."""
    lines = [f"# {m.nrows} {m.ncols} {m.nnz()}"]
    for i, j, x in m.triplets():
        lines.append(f"{i} {j} {x.numerator}/{x.denominator}")
    return "\n".join(lines) + "\n"


def parse_triplets(text: str) -> SparseMatrix:
    rows_iter = [ln for ln in text.splitlines() if ln.strip()]
    n, m, _ = (int(t) for t in rows_iter[0].lstrip("#").split())
    out = SparseMatrix(n, m)
    for ln in rows_iter[1:]:
        i, j, x = ln.split()
        out.set(int(i), int(j), Fraction(x))
    return out


def chain_to_json(cx: ChainComplex, chain: Vec, degree: int) -> dict:
    """Chain values keyed by canonical facet forms, as block-coordinate lists."""
    out = {}
    if degree == 0:
        for v in cx.support0(chain):
            P = cx.vertex_partition(v)
            base = cx.index0(v, 0)
            out[v.label()] = [str(Fraction(chain.get(base + b, 0))) for b in range(P.nblocks)]
    else:
        for E in cx.support1(chain):
            P = cx.edge_partition(E)
            base = cx.index1(E, 0)
            out[f"{E.tail.label()}|{E.head.label()}"] = [
                str(Fraction(chain.get(base + b, 0))) for b in range(P.nblocks)]
    return {"degree": degree, "e": cx.e, "model": cx.model.tag(), "window": cx.window.radius,
            "origin": cx.origin.label(), "values": out}

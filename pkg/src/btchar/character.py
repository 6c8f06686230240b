"""Character values at compact elements, computed three independent ways.

* fixed-facet sum: signed fiber traces over the stable facets inside X^r;
* Hopf trace: alternating trace of T_gamma . avg_K . Q-bar on the window complex;
* fiber trace: trace of gamma on a single deep invariant fiber.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

from .chains import ChainComplex, build_decomposition, modified_truncation
from .coeff import Model, Partition, block_image, matrix_entries
from .elements import ElementClass, classify, fixed_set
from .errors import BudgetExceeded, FacetNotFixed, KTooLarge, NotCompact, NotRegular
from .linalg import trace_of_product
from .padic import Matrix2
from .tree import Vertex, act, ball, base_vertex
from .truncate import truncated_building


def _stable(gamma: Matrix2, F) -> tuple[bool, bool]:
    """(stable, reversed) for a vertex or edge."""
    if isinstance(F, Vertex):
        return act(gamma, F) == F, False
    t, h = act(gamma, F.tail), act(gamma, F.head)
    if (t, h) == (F.tail, F.head):
        return True, False
    if (t, h) == (F.head, F.tail):
        return True, True
    return False, False


def partition_trace(gamma: Matrix2, P: Partition) -> int:
    """Trace of gamma on the span of block indicators of a gamma-stable partition."""
    imgs = block_image(matrix_entries(gamma), P, P)
    return sum(1 for b, bb in enumerate(imgs) if b == bb)


def fiber_trace(gamma: Matrix2, e: int, F, model: Model) -> Fraction:
    """trace(gamma; V^{U_F^(e)}) for a facet stabilized by gamma."""
    ok, _ = _stable(gamma, F)
    if not ok:
        raise FacetNotFixed(f"{F} is not stabilized by the element")
    return Fraction(partition_trace(gamma, model.partition(F, e)))


def deep_fiber_trace(gamma: Matrix2, model: Model, F=None, e_start: int = 0,
                     e_max: int = 4) -> tuple[Fraction, int, list]:
    """Fiber trace at increasing depth until two consecutive values agree.

    Returns (value, first depth of the plateau, history).  F defaults to
    the base vertex, or to a stable edge when no vertex is fixed.
    """
    if F is None:
        F = _default_facet(gamma)
    hist = []
    for e in range(e_start, e_max + 1):
        hist.append(fiber_trace(gamma, e, F, model))
        if len(hist) >= 2 and hist[-1] == hist[-2]:
            return hist[-1], e - 1, hist
    raise BudgetExceeded(f"fiber trace did not stabilize by depth {e_max}: {hist}")


def _default_facet(gamma: Matrix2):
    p = gamma.p
    o = base_vertex(p)
    if act(gamma, o) == o:
        return o
    fs = fixed_set(gamma, ball(o, 2))
    if fs.vertices:
        return fs.vertices[0]
    if fs.edges:
        return fs.edges[0][0]
    raise NotCompact("no stable facet near the base vertex")


@dataclass
class Contribution:
    facet: object
    degree: int
    reversed: bool
    trace: Fraction
    sign: int

    @property
    def value(self) -> Fraction:
        return self.sign * self.trace

    def as_dict(self) -> dict:
        if isinstance(self.facet, Vertex):
            name = self.facet.label()
        else:
            name = f"{self.facet.tail.label()}|{self.facet.head.label()}"
        return {"facet": name, "q": self.degree, "reversed": self.reversed,
                "fiber_trace": str(self.trace), "sign": self.sign, "contribution": str(self.value)}


def fixed_facet_sum(gamma: Matrix2, e: int, r: int, model: Model,
                    origin: Vertex | None = None) -> tuple[Fraction, list[Contribution]]:
    """Signed sum of fiber traces over the stable facets of X^r = B(origin, r).

    A vertex counts +1; an edge with fixed orientation counts -1 (degree 1);
    an edge whose orientation is reversed picks up an extra -1 and counts +1.
    The element need not fix the origin.
    """
    cls = classify(gamma)
    if not cls.compact:
        raise NotCompact("fixed-facet sum needs a compact element")
    o = origin or base_vertex(gamma.p)
    xr = truncated_building(o, r, method="ball")
    win = ball(o, r)
    fs = fixed_set(gamma, win)
    contribs = []
    for v in fs.vertices:
        if v in xr.vertices:
            contribs.append(Contribution(v, 0, False, fiber_trace(gamma, e, v, model), 1))
    for E, rev in fs.edges:
        if E in xr.edges:
            sign = 1 if rev else -1
            contribs.append(Contribution(E, 1, rev, fiber_trace(gamma, e, E, model), sign))
    return sum((c.value for c in contribs), Fraction(0)), contribs


def k_constancy_ok(gamma: Matrix2, e: int, model: Model, origin: Vertex | None = None,
                   lookahead: int = 1) -> bool:
    """Whether the depth-e group at the origin is small enough around gamma.

    trace(gamma; V^K) is the average of the character over gamma K, so it
    equals the character value only when the character is constant there.
    The test used: shrinking K further (depths e+1, ..., e+lookahead) no
    longer changes the trace.
    """
    o = origin or base_vertex(gamma.p)
    ref = fiber_trace(gamma, e, o, model)
    return all(fiber_trace(gamma, e + k, o, model) == ref for k in range(1, lookahead + 1))


@dataclass
class HopfResult:
    value: Fraction
    fiber_value: Fraction
    per_degree: tuple[Fraction, Fraction]
    transfer: tuple[Fraction, Fraction]
    k_ok: bool
    dims: dict

    @property
    def agrees(self) -> bool:
        return self.value == self.fiber_value


def hopf_character(gamma: Matrix2, e: int, r: int, model: Model, W: int,
                   strict: bool = False, cx: ChainComplex | None = None,
                   origin: Vertex | None = None) -> HopfResult:
    """sum_q (-1)^q trace(T_gamma avg_K Q-bar_q) with K = U_o^(e), o the window center.

    The right-hand side trace(gamma; V^K) is computed on the fiber at o and
    returned alongside.  ``transfer`` holds trace(T_gamma Q_q) - trace(T_gamma
    Q-bar_q) for q = 0, 1 (both zero for a nice decomposition).  With
    ``strict`` a failed K-constancy check raises KTooLarge.
    """
    o = cx.origin if cx is not None else (origin or base_vertex(gamma.p))
    k_ok = k_constancy_ok(gamma, e, model, o)
    if strict and not k_ok:
        raise KTooLarge(f"character not constant on gamma K at depth {e}")
    if cx is None:
        cx = ChainComplex(model, e, ball(o, W))
    dec = build_decomposition(cx, gamma, r)
    mt = modified_truncation(dec)
    T0, T1 = cx.action_matrices(gamma)
    A0, A1 = cx.averaging()
    h0 = trace_of_product(T0 @ A0, mt.q0)
    h1 = trace_of_product(T1 @ A1, mt.q1)
    d0 = trace_of_product(T0, mt.Q0) - trace_of_product(T0, mt.q0)
    d1 = trace_of_product(T1, mt.Q1) - trace_of_product(T1, mt.q1)
    rhs = fiber_trace(gamma, e, o, model)
    return HopfResult(h0 - h1, rhs, (h0, h1), (d0, d1), k_ok, dict(dec.dims))


@dataclass
class CharacterReport:
    element: str
    classification: ElementClass
    model: str
    e: int
    r: int
    W: int
    fixed_facet_sum: Fraction
    hopf_trace: Fraction | None
    fiber_trace: Fraction
    fiber_depth: int
    contributions: list[Contribution]
    k_constancy: bool | None
    notes: list[str] = field(default_factory=list)

    @property
    def disagreements(self) -> list[str]:
        out = []
        if self.hopf_trace is not None and self.hopf_trace != self.fixed_facet_sum:
            out.append("hopf_trace != fixed_facet_sum")
        if self.fixed_facet_sum != self.fiber_trace:
            out.append("fixed_facet_sum != fiber_trace")
        if self.hopf_trace is not None and self.hopf_trace != self.fiber_trace:
            out.append("hopf_trace != fiber_trace")
        return out

    def as_dict(self) -> dict:
        return {"element": self.element,
                "classification": self.classification.as_dict(),
                "model": self.model, "e": self.e, "r": self.r, "W": self.W,
                "fixed_facet_sum": str(self.fixed_facet_sum),
                "hopf_trace": None if self.hopf_trace is None else str(self.hopf_trace),
                "fiber_trace": str(self.fiber_trace),
                "fiber_plateau_depth": self.fiber_depth,
                "k_constancy": self.k_constancy,
                "disagreements": self.disagreements,
                "contributions": [c.as_dict() for c in self.contributions],
                "notes": self.notes}


def character_report(gamma: Matrix2, e: int, r: int, model: Model, W: int,
                     element: str = "", with_hopf: bool = True,
                     origin: Vertex | None = None) -> CharacterReport:
    cls = classify(gamma)
    if not cls.compact:
        raise NotCompact("character evaluation needs a compact element")
    o = origin or base_vertex(gamma.p)
    ffs, contribs = fixed_facet_sum(gamma, e, r, model, o)
    notes = []
    hopf = None
    kok = None
    if with_hopf and act(gamma, o) == o:
        res = hopf_character(gamma, e, r, model, W, origin=o)
        hopf = res.value
        kok = res.k_ok
        if not res.agrees:
            notes.append(f"hopf trace differs from trace on V^K at the origin ({res.fiber_value})")
        if any(res.transfer):
            notes.append("trace transfer failed")
    elif with_hopf:
        notes.append("hopf trace skipped: element fixes no vertex at the origin")
    deep, depth, _ = deep_fiber_trace(gamma, model)
    notes.append("plateau values are exhibited, not certified to equal the true character")
    return CharacterReport(element, cls, model.tag(), e, r, W, ffs, hopf, deep, depth,
                           contribs, kok, notes)


# scans -----------------------------------------------------------------------

@dataclass
class ScanResult:
    e_range: list[int]
    r_range: list[int]
    table: dict                 # (e, r) -> value
    frontier: tuple[int, int] | None
    plateau: Fraction | None
    perturbations: list[dict]
    k_depth: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["e", "r", "fixed_facet_sum"])
        for e in self.e_range:
            for r in self.r_range:
                w.writerow([e, r, str(self.table[(e, r)])])
        return buf.getvalue()

    def as_dict(self) -> dict:
        return {"e_range": self.e_range, "r_range": self.r_range,
                "table": {f"{e},{r}": str(v) for (e, r), v in sorted(self.table.items())},
                "frontier": None if self.frontier is None else
                {"e": self.frontier[0], "r": self.frontier[1]},
                "plateau": None if self.plateau is None else str(self.plateau),
                "k_constancy_depth": self.k_depth,
                "perturbations": self.perturbations}


def stabilization_frontier(table: dict, e_range: list[int], r_range: list[int]):
    """Smallest (e0, r0), lexicographic in e then r, with a constant value on e>=e0, r>=r0.

    A frontier is only reported when the quadrant holds at least two grid
    points in each direction, so the constancy is actually exhibited.
    """
    for e0 in e_range[:-1]:
        for r0 in r_range[:-1]:
            vals = {table[(e, r)] for e in e_range if e >= e0 for r in r_range if r >= r0}
            if len(vals) == 1:
                return (e0, r0), vals.pop()
    return None, None


def perturbation_generators(p: int, e: int) -> list[tuple[str, Matrix2]]:
    q = p ** (e + 1)
    return [("diag(1,1+p^(e+1))", Matrix2.from_rows([[1, 0], [0, 1 + q]], p)),
            ("diag(1+p^(e+1),1)", Matrix2.from_rows([[1 + q, 0], [0, 1]], p)),
            ("upper(p^(e+1))", Matrix2.from_rows([[1, q], [0, 1]], p)),
            ("lower(p^(e+1))", Matrix2.from_rows([[1, 0], [q, 1]], p))]


def independence_scan(gamma: Matrix2, model: Model, e_range, r_range,
                      max_cells: int = 400, perturb: bool = True) -> ScanResult:
    e_range = list(e_range)
    r_range = list(r_range)
    if len(e_range) * len(r_range) > max_cells:
        raise BudgetExceeded("scan grid exceeds the budget")
    table = {}
    for e in e_range:
        for r in r_range:
            table[(e, r)] = fixed_facet_sum(gamma, e, r, model)[0]
    frontier, plateau = stabilization_frontier(table, e_range, r_range)
    o = base_vertex(gamma.p)
    e_k = None
    if act(gamma, o) == o:
        e_k = next((e for e in e_range if k_constancy_ok(gamma, e, model, o)), None)
    perts = []
    if perturb and frontier is not None:
        e0, r0 = frontier
        rows_e = [e for e in e_range if e >= max(e0, e_k or 0)]
        for e in rows_e:
            base_row = [table[(e, r)] for r in r_range if r >= r0]
            for name, u in perturbation_generators(gamma.p, e):
                g2 = gamma @ u
                try:
                    row = [fixed_facet_sum(g2, e, r, model)[0] for r in r_range if r >= r0]
                except NotRegular:
                    perts.append({"e": e, "perturbation": name, "row": None,
                                  "identical": None, "skipped": "not regular"})
                    continue
                perts.append({"e": e, "perturbation": name,
                              "row": [str(v) for v in row],
                              "identical": row == base_row})
    return ScanResult(e_range, r_range, table, frontier, plateau, perts, e_k)

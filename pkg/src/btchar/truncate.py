"""Truncated buildings: convex-hull / subcomplex fixpoint and the in/out split."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BudgetExceeded
from .tree import OrientedEdge, TreeBall, Vertex, ball, edge, geodesic


@dataclass
class TruncatedBuilding:
    origin: Vertex
    requested_r: float
    r: int
    vertices: set[Vertex]
    edges: set[OrientedEdge]
    provenance: str
    iterations: int = 0

    def contains_vertex(self, v: Vertex) -> bool:
        return v in self.vertices

    def contains_edge(self, e: OrientedEdge) -> bool:
        return e.unoriented() in self.edges

    def as_dict(self) -> dict:
        return {"origin": self.origin.label(), "requested_r": self.requested_r,
                "effective_r": self.r, "provenance": self.provenance,
                "vertices": sorted(v.label() for v in self.vertices),
                "edges": sorted(f"{e.tail.label()}|{e.head.label()}" for e in self.edges)}


def convex_hull(vertices: set[Vertex], edges: set[OrientedEdge]) -> tuple[set, set]:
    """Geodesic closure: add every geodesic (vertices and edges) between members.

    In a tree the geodesics issued from a single member already sweep out the
    whole pairwise closure, so one anchor suffices; the outer fixpoint loop
    re-checks stability.
    """
    vs = set(vertices)
    es = set(edges)
    for f in list(es):
        vs.add(f.tail)
        vs.add(f.head)
    if not vs:
        return vs, es
    anchor = min(vs, key=Vertex.key)
    for w in sorted(vs, key=Vertex.key):
        path = geodesic(anchor, w)
        vs.update(path)
        for x, y in zip(path, path[1:]):
            es.add(edge(x, y))
    return vs, es


def subcomplex_closure(vertices: set[Vertex], edges: set[OrientedEdge]) -> tuple[set, set]:
    """Smallest subcomplex containing the facets: add the endpoints of every edge."""
    vs = set(vertices)
    for e in edges:
        vs.add(e.tail)
        vs.add(e.head)
    return vs, set(edges)


def truncated_building(o: Vertex, r: float, window: TreeBall | None = None,
                       method: str = "fixpoint", max_iterations: int = 64) -> TruncatedBuilding:
    """X^r: iterate S <- simp(cnvx(S)) from the closed ball until it stabilizes.

    ``method="ball"`` returns the closed ball directly (the tree shortcut).
    Non-integer radii are floored since vertex distances are integral.
    """
    eff = int(math.floor(r))
    if eff < 0:
        raise ValueError("radius must be non-negative")
    if window is not None and window.radius < eff:
        raise BudgetExceeded("window smaller than the truncation radius")
    b = ball(o, eff)
    vs = set(b.vertices)
    if method == "ball":
        return TruncatedBuilding(o, r, eff, vs, set(b.edges), "ball-shortcut", 0)
    if method != "fixpoint":
        raise ValueError(f"unknown method {method}")
    # Seed with the ball's vertices only; the closure has to recover the edges.
    es = set()
    it = 0
    while True:
        it += 1
        if it > max_iterations:
            raise BudgetExceeded("fixpoint did not stabilize")
        nv, ne = convex_hull(vs, es)
        nv, ne = subcomplex_closure(nv, ne)
        if nv == vs and ne == es:
            break
        vs, es = nv, ne
    return TruncatedBuilding(o, r, eff, vs, es, "fixpoint", it)


@dataclass
class FacetSplit:
    in_vertices: list[Vertex]
    out_vertices: list[Vertex]
    in_edges: list[OrientedEdge]
    out_edges: list[OrientedEdge]

    def counts(self) -> dict:
        return {"in_vertices": len(self.in_vertices), "out_vertices": len(self.out_vertices),
                "in_edges": len(self.in_edges), "out_edges": len(self.out_edges)}


def split_facets(xr: TruncatedBuilding, window: TreeBall) -> FacetSplit:
    """Partition the window's facets into those contained in X^r and the rest."""
    iv = [v for v in window.vertices if v in xr.vertices]
    ov = [v for v in window.vertices if v not in xr.vertices]
    ie = [e for e in window.edges if e in xr.edges]
    oe = [e for e in window.edges if e not in xr.edges]
    return FacetSplit(iv, ov, ie, oe)

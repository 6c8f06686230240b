"""Independent reference computations used to pin expected values.

Each oracle avoids the code path it checks: graph distances come from
breadth-first search over the neighbour relation, fiber traces from
counting fixed points on a finite projective line, ranks from sympy.
"""
from __future__ import annotations

from collections import deque

import sympy

from btchar.tree import Vertex, apartment_vertex, neighbors


def ball_count_formula(p: int, r: int) -> int:
    return 1 + (p + 1) * (p ** r - 1) // (p - 1)


def bfs_distances(o: Vertex, r: int) -> dict:
    """Graph distances from o up to r, by breadth-first search on neighbors()."""
    dist = {o: 0}
    q = deque([o])
    while q:
        v = q.popleft()
        if dist[v] == r:
            continue
        for w in neighbors(v):
            if w not in dist:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist


def bfs_distance(u: Vertex, w: Vertex, cap: int = 12) -> int:
    return bfs_distances(u, cap)[w]


def apartment_neighbourhood(p: int, radius: int, reach: int) -> set:
    """Vertices within ``reach`` of the standard apartment segment |k| <= radius (multi-source BFS)."""
    seen = {apartment_vertex(k, p): 0 for k in range(-radius, radius + 1)}
    q = deque(seen)
    while q:
        v = q.popleft()
        if seen[v] == reach:
            continue
        for w in neighbors(v):
            if w not in seen:
                seen[w] = seen[v] + 1
                q.append(w)
    return set(seen)


def projective_line_mod(p: int, m: int) -> list[tuple[int, int]]:
    """Normalized points of P^1(Z/p^m): (x, 1) and (1, p*y)."""
    q = p ** m
    pts = [(x, 1) for x in range(q)]
    pts += [(1, (p * y) % q) for y in range(p ** (m - 1))]
    return pts


def _normalize(v: tuple[int, int], p: int, m: int) -> tuple[int, int]:
    q = p ** m
    x, y = v[0] % q, v[1] % q
    if y % p:
        inv = pow(y, -1, q)
        return ((x * inv) % q, 1)
    inv = pow(x, -1, q)
    return (1, (y * inv) % q)


def fixed_points_mod(g: tuple[int, int, int, int], p: int, m: int) -> int:
    """Number of points of P^1(Z/p^m) fixed by an integral matrix invertible mod p."""
    a, b, c, d = g
    q = p ** m
    if (a * d - b * c) % p == 0:
        raise ValueError("matrix not invertible mod p")
    count = 0
    for pt in projective_line_mod(p, m):
        img = _normalize(((a * pt[0] + b * pt[1]) % q, (c * pt[0] + d * pt[1]) % q), p, m)
        if img == pt:
            count += 1
    return count


def base_fiber_trace_oracle(g: tuple[int, int, int, int], p: int, e: int) -> int:
    """trace(g; functions on P^1 invariant under K(e+1)) = fixed points on P^1(Z/p^(e+1))."""
    return fixed_points_mod(g, p, e + 1)


def sympy_rank(m) -> int:
    """Rank of a btchar SparseMatrix via sympy."""
    return sympy.Matrix(m.to_dense()).rank()


def star_incidence(p: int) -> list[list[int]]:
    """Boundary matrix of the radius-1 star, hand-built: edge j goes center -> leaf j."""
    n = p + 1
    rows = [[-1] * n]
    for j in range(n):
        rows.append([1 if k == j else 0 for k in range(n)])
    return rows


def principal_character_diag(p: int, rstar: int) -> int:
    """Character of functions on P^1 at diag(1, 1+p^r*): two fixed points, each weighted p^r*."""
    return 2 * p ** rstar

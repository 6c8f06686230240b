import json
import random
from fractions import Fraction

import pytest

from btchar.chains import (ChainComplex, SignedPermutation, build_decomposition, chain_to_json,
                           geodesic_chain, matrix_triplets, modified_truncation, parse_triplets,
                           truncation_witness)
from btchar.coeff import StepFunction, make_model
from btchar.errors import NonCycle, WindowEscape
from btchar.linalg import SparseMatrix, rank
from btchar.padic import Matrix2
from btchar.tree import OrientedEdge, Vertex, ball, base_vertex, edge
from oracles import star_incidence, sympy_rank


@pytest.fixture(scope="module")
def cx_p2():
    return ChainComplex(make_model("principal:2", 2), 1, ball(base_vertex(2), 3))


@pytest.fixture(scope="module")
def cx_trivial():
    return ChainComplex(make_model("trivial", 2), 0, ball(base_vertex(2), 3))


def _random_stabilizer(rng, p):
    while True:
        m = [rng.randint(-6, 6) for _ in range(4)]
        if (m[0] * m[3] - m[1] * m[2]) % p:
            return Matrix2.from_rows([m[:2], m[2:]], p)


def _random_chain(rng, n, k=5):
    return {rng.randrange(n): Fraction(rng.randint(-4, 4) or 1) for _ in range(k)}


@pytest.mark.parametrize("p", [2, 3])
def test_star_boundary_is_incidence_matrix(p):
    cx = ChainComplex(make_model("trivial", p), 0, ball(base_vertex(p), 1))
    D = cx.boundary()
    assert D.to_dense() == star_incidence(p)
    assert sympy_rank(D) == D.rank() == p + 1


def test_boundary_rank_against_sympy():
    cx = ChainComplex(make_model("principal:2", 2), 0, ball(base_vertex(2), 2))
    D, eps = cx.boundary(), cx.augmentation()
    assert (eps @ D).is_zero()
    assert sympy_rank(D) == D.rank() == cx.n1
    assert sympy_rank(eps) == eps.rank() == cx.n0 - cx.n1


def test_single_edge_boundary(cx_p2):
    o = base_vertex(2)
    x = Vertex(0, 1, 0, 2)
    E = OrientedEdge(o, x)
    f = cx_p2.edge_partition(E).indicator(0)
    c = cx_p2.edge_chain(E, f)
    d = cx_p2.boundary_of(c)
    assert cx_p2.value0(d, x).equals(f)
    assert cx_p2.value0(d, o).equals(f.scale(-1))
    assert cx_p2.edge_chain(E.reverse(), f) == {k: -v for k, v in c.items()}
    assert cx_p2.augment(d) == {}


def test_equivariance_random(cx_p2):
    rng = random.Random(11)
    D = cx_p2.boundary()
    eps = cx_p2.augmentation()
    for _ in range(100):
        g = _random_stabilizer(rng, 2)
        T0, T1 = cx_p2.action(g)
        w = _random_chain(rng, cx_p2.n1)
        assert D.matvec(T1.apply(w)) == T0.apply(D.matvec(w))
        assert eps.matvec(D.matvec(w)) == {}


def test_window_escape(cx_p2):
    with pytest.raises(WindowEscape):
        cx_p2.action(Matrix2.diag(1, 2, 2))


def test_identity_and_averaging(cx_p2):
    T0, T1 = cx_p2.action(Matrix2.identity(2))
    assert T0.is_identity() and T1.is_identity()
    A0, A1 = cx_p2.averaging()
    D = cx_p2.boundary()
    assert A0 @ A0 == A0 and A1 @ A1 == A1
    assert D @ A1 == A0 @ D
    g = Matrix2.diag(1, 3, 2)
    F0, _ = cx_p2.function_action(g)
    T0, _ = cx_p2.action_matrices(g)
    rng = random.Random(2)
    for _ in range(10):
        w = A0.matvec(_random_chain(rng, cx_p2.n0))
        assert F0.matvec(w) == T0.matvec(w)


def test_truncation_examples(cx_trivial):
    cx = cx_trivial
    o = base_vertex(2)
    r = 1
    Q0, Q1 = cx.truncation(r)
    assert Q0 @ Q0 == Q0 and Q1 @ Q1 == Q1
    inner = {cx.index0(o, 0): Fraction(2)}
    assert Q0.matvec(inner) == inner
    far = Vertex(0, 3, 1, 2)
    outer = {cx.index0(far, 0): Fraction(1)}
    assert Q0.matvec(outer) == {}
    cyc = {cx.index0(far, 0): Fraction(1), cx.index0(o, 0): Fraction(-1)}
    assert Q0.matvec(cyc) == {cx.index0(o, 0): Fraction(-1)}
    w = truncation_witness(cx, r)
    assert w is not None and w["Q0_boundary"] != w["boundary_Q1"]


def test_trivial_identity_decomposition(cx_trivial):
    cx = cx_trivial
    dec = build_decomposition(cx, Matrix2.identity(2), 1)
    assert dec.dims["H0"] == 1
    assert dec.dims["B0"] == len(cx.vertices) - 1
    o = base_vertex(2)
    for x in cx.vertices:
        if x == o:
            continue
        b = {cx.index0(x, 0): Fraction(1), cx.index0(o, 0): Fraction(-1)}
        one = StepFunction.constant(2)
        assert dec.alpha(b) == geodesic_chain(cx, o, x, one)


def test_section_alpha(cx_p2):
    cx = cx_p2
    o = base_vertex(2)
    D = cx.boundary()
    dec = build_decomposition(cx, Matrix2.diag(1, 3, 2), 1)
    x = Vertex(0, 1, 1, 2)
    f = cx.edge_partition(edge(o, x)).indicator(1)
    b = cx.boundary_of(cx.edge_chain(OrientedEdge(o, x), f))
    assert dec.alpha(b) == cx.edge_chain(OrientedEdge(o, x), f)
    rng = random.Random(4)
    in1 = set(dec.in1)
    for _ in range(100):
        c = _random_chain(rng, cx.n1)
        assert D.matvec(dec.alpha(D.matvec(c))) == D.matvec(c)
        cin = {j: v for j, v in c.items() if j in in1}
        assert set(dec.alpha(D.matvec(cin))) <= in1
    g = _random_stabilizer(random.Random(9), 2)
    T0, T1 = cx.action(g)
    for _ in range(20):
        b = D.matvec(_random_chain(rng, cx.n1))
        assert dec.alpha(T0.apply(b)) == T1.apply(dec.alpha(b))


@pytest.mark.parametrize("gamma", [Matrix2.diag(1, 3, 2), Matrix2.from_rows([[1, 2], [1, 1]], 2)])
@pytest.mark.parametrize("r", [1, 2])
def test_modified_truncation_claims(cx_p2, gamma, r):
    cx = cx_p2
    D = cx.boundary()
    dec = build_decomposition(cx, gamma, r)
    mt = modified_truncation(dec)
    assert D @ mt.q1 == mt.q0 @ D
    # identity on chains supported in B(o, r - 1) (indeed on every inner chain)
    i0, i1 = cx.in_indices(r - 1)
    for i in i0:
        assert mt.q0.column(i) == {i: 1}
    for j in i1:
        assert mt.q1.column(j) == {j: 1}
    assert mt.q0.rank() <= len(dec.in0)
    assert mt.q1.rank() <= len(dec.in1)
    T0, T1 = cx.action_matrices(gamma)
    assert (T0 @ mt.Q0).trace() == (T0 @ mt.q0).trace()
    assert (T1 @ mt.Q1).trace() == (T1 @ mt.q1).trace()


def test_decomposition_is_stable(cx_p2):
    gamma = Matrix2.diag(1, 3, 2)
    dec = build_decomposition(cx_p2, gamma, 1)
    T0, _ = cx_p2.action(gamma)
    span = [dict(h) for h in dec.h_basis]
    r0 = rank(span)
    for h in dec.h_basis:
        assert rank(span + [T0.apply(h)]) == r0
    assert dec.gamma_order == max(T0.order(), cx_p2.action(gamma)[1].order())


def test_reduce_cycle_roundtrips(cx_p2):
    cx = cx_p2
    D = cx.boundary()
    o = base_vertex(2)
    x = Vertex(0, 1, 0, 2)
    c = cx.edge_chain(OrientedEdge(o, x), cx.edge_partition(edge(o, x)).indicator(0))
    assert D.matvec(cx.reduce_cycle(D.matvec(c))) == D.matvec(c)
    rng = random.Random(8)
    for _ in range(40):
        w = cx.random_cycle(rng, 2)
        d = cx.reduce_cycle(w, 2)
        assert D.matvec(d) == w
        assert all(cx.window.edge_depth(cx.basis1[j][0]) <= 2 for j in d)


def test_reduce_cycle_trivial_gives_geodesic(cx_trivial):
    cx = cx_trivial
    o = base_vertex(2)
    x = Vertex(0, 3, 5, 2)
    w = {cx.index0(x, 0): Fraction(3), cx.index0(o, 0): Fraction(-3)}
    assert cx.reduce_cycle(w) == geodesic_chain(cx, o, x, StepFunction.constant(2, 3))


def test_reduce_cycle_rejects_non_cycles(cx_p2):
    with pytest.raises(NonCycle):
        cx_p2.reduce_cycle({0: Fraction(1)})


def test_dumps(cx_p2):
    D = cx_p2.boundary()
    text = matrix_triplets(D)
    assert parse_triplets(text) == D
    assert text.splitlines()[0] == f"# {D.nrows} {D.ncols} {D.nnz()}"
    c = {0: Fraction(1, 2), cx_p2.n0 - 1: Fraction(-1)}
    js = chain_to_json(cx_p2, c, 0)
    assert js["values"]["0,0,0"][0] == "1/2"
    json.dumps(js)


def test_signed_permutation_order():
    sp = SignedPermutation([1, 0, 2], [1, -1, -1])
    assert sp.order() == 4
    assert sp.compose(sp.inverse()).is_identity()
    assert sp.matrix() @ sp.inverse().matrix() == SparseMatrix.identity(3)

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from btchar.errors import PrecisionExhausted, SingularMatrix
from btchar.padic import (Matrix2, PadicScalar, is_square, mat_inv, mat_equal, newton_valuations,
                          val)

primes = st.sampled_from([2, 3, 5])
nonzero = st.fractions(min_value=-10**6, max_value=10**6, max_denominator=10**3).filter(bool)


def congruent(x: PadicScalar, q: Fraction, digits: int) -> bool:
    """x agrees with the rational q modulo p^digits."""
    d = x.to_fraction() - q
    if d == 0:
        return True
    return PadicScalar.from_fraction(d, x.p).v >= digits


@given(primes, nonzero, nonzero)
def test_ring_operations_match_rationals(p, a, b):
    x, y = PadicScalar.from_fraction(a, p), PadicScalar.from_fraction(b, p)
    for res, exact in ((x + y, a + b), (x - y, a - b), (x * y, a * b), (x / y, a / b)):
        if exact == 0:
            assert res.is_zero
            continue
        assert congruent(res, exact, res.abs_prec() if res.v is not None else res.N)


@given(primes, nonzero, nonzero)
def test_valuation_is_additive(p, a, b):
    x, y = PadicScalar.from_fraction(a, p), PadicScalar.from_fraction(b, p)
    assert val(x * y) == val(x) + val(y)


@given(primes, nonzero)
def test_inverse_roundtrip(p, a):
    x = PadicScalar.from_fraction(a, p)
    assert (x * x.inverse()).agrees(1, digits=x.N - 1)


def test_cancellation_gives_inexact_zero():
    x = PadicScalar.from_int(1, 2, 8)
    z = x - x
    assert z.is_zero and not z.is_exact_zero
    with pytest.raises(PrecisionExhausted):
        val(z)


@pytest.mark.parametrize("p,n,expected", [
    (2, 1, True), (2, 9, True), (2, 17, True), (2, 5, False), (2, 3, False), (2, 2, False),
    (2, 4, True), (3, 1, True), (3, 2, False), (3, 7, True), (3, 3, False), (5, 4, True), (5, 2, False),
])
def test_is_square_small_values(p, n, expected):
    assert is_square(PadicScalar.from_int(n, p)) is expected


@given(primes, st.integers(1, 10**4))
def test_squares_are_squares(p, n):
    assert is_square(PadicScalar.from_int(n * n, p))


def test_newton_slopes():
    assert newton_valuations(Matrix2.diag(1, 2, 2)) == (0, 1)
    assert newton_valuations(Matrix2.from_rows([[0, 1], [2, 0]], 2)) == (Fraction(1, 2), Fraction(1, 2))
    assert newton_valuations(Matrix2.diag(1, 3, 2)) == (0, 0)


@settings(max_examples=50)
@given(primes, st.lists(st.integers(-20, 20), min_size=4, max_size=4))
def test_matrix_inverse(p, ent):
    if ent[0] * ent[3] - ent[1] * ent[2] == 0:
        # integer entries carry finite precision, so a vanishing determinant may
        # only be detectable as exhausted precision
        with pytest.raises((SingularMatrix, PrecisionExhausted)):
            mat_inv(Matrix2.from_rows([ent[:2], ent[2:]], p))
        return
    g = Matrix2.from_rows([ent[:2], ent[2:]], p)
    assert mat_equal(g @ mat_inv(g), Matrix2.identity(p))

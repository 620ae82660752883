import math
from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, strategies as st

from iwasawa_cf.scalar import (
    DiscriminantMismatch,
    DivisionByZero,
    QExt,
    eval_qext,
    format_qext,
    parse_qext,
    qext,
    qext_arith,
    qext_sign,
)

R2 = QExt.sqrt(2)
R3 = QExt.sqrt(3)

fractions = st.builds(F, st.integers(-10**4, 10**4), st.integers(1, 50))


@st.composite
def qexts(draw, disc=None):
    d = disc if disc is not None else draw(st.sampled_from([1, 2, 3, 5]))
    a = draw(fractions)
    b = draw(fractions) if d != 1 else F(0)
    return QExt(a, b, d)


def test_products_and_quotients():
    assert qext_arith(R2.inverse(), R2.inverse(), "mul") == qext(F(1, 2))
    assert (1 + R3) * (1 - R3) == qext(-2)
    q = qext_arith(qext(1), 3 + R2, "div")
    assert q == F(3, 7) - F(1, 7) * R2
    assert q * (3 + R2) == 1


def test_signs():
    assert qext_sign(QExt(0, 0, 2)) == 0
    assert qext_sign(3 - 2 * R2) == 1
    assert qext_sign(2 - F(3, 2) * R3) == -1


def test_mixed_discriminants_rejected():
    with pytest.raises(DiscriminantMismatch):
        R2 + R3
    # rationals promote into any field
    assert (R2 + 1).disc == 2 and (R3 * F(1, 2)).disc == 3


def test_division_by_zero():
    with pytest.raises(DivisionByZero):
        qext(1) / QExt(0, 0, 2)


def test_squarefree_disc_and_rational_mode():
    assert QExt.sqrt(8) == 2 * R2
    assert QExt.sqrt(9) == 3
    assert QExt(F(1, 3), 0, 1).is_rational


def test_text_round_trip():
    for v in [qext(F(-5, 7)), F(3, 7) - F(1, 7) * R2, R3 / 2, qext(0)]:
        assert parse_qext(format_qext(v)) == v
    assert eval_qext("(sqrt(5)-1)/2") == (QExt.sqrt(5) - 1) / 2
    assert eval_qext("0.01") == F(1, 100)


@given(qexts(2), qexts(2), qexts(2))
def test_field_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    if a:
        assert a * a.inverse() == 1


@given(qexts())
def test_sign_matches_high_precision(a):
    with mpmath.workprec(200):
        v = a.rat.numerator / mpmath.mpf(a.rat.denominator) + a.irr.numerator / mpmath.mpf(a.irr.denominator) * mpmath.sqrt(a.disc)
        if abs(v) > mpmath.mpf(2) ** -100:
            assert qext_sign(a) == (1 if v > 0 else -1)


@given(qexts(3), qexts(3))
def test_float_round_trip(a, b):
    # float addition loses up to an ulp of the larger operand, so that is the unit
    s = float(a + b)
    t = float(a) + float(b)
    scale = max(abs(float(a)), abs(float(b)), abs(s))
    assert abs(s - t) <= 4 * math.ulp(scale)


@given(qexts(2), qexts(2))
def test_order_is_total_and_consistent(a, b):
    assert (a < b) + (a == b) + (a > b) == 1
    assert (a < b) == (qext_sign(b - a) > 0)

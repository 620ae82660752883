import itertools
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from iwasawa_cf.algebra import InversionSpec, Vec, ZeroVector, conj_da, invert, mul_da
from iwasawa_cf.lattice import get_lattice
from iwasawa_cf.scalar import QExt, qext

small = st.builds(F, st.integers(-24, 24), st.integers(1, 12))


def vecs(d):
    return st.lists(small, min_size=d, max_size=d).map(Vec).filter(lambda v: not v.is_zero())


def basis(i, d=8):
    return [1 if j == i else 0 for j in range(d)]


def test_inversion_examples():
    assert invert(Vec([0, 1]), InversionSpec.conjugate_reciprocal(2)) == Vec([0, -1])
    assert invert(Vec([3, 4]), InversionSpec.euclidean(2)) == Vec([F(3, 25), F(4, 25)])
    x = Vec([0, 1, 1, 0])
    y = invert(x, InversionSpec.conjugate_reciprocal(4))
    assert y == Vec([0, F(-1, 2), F(-1, 2), 0])
    assert mul_da(list(x), list(y), "H") == [1, 0, 0, 0]


def test_zero_has_no_inverse():
    with pytest.raises(ZeroVector):
        invert(Vec([0, 0]), InversionSpec.euclidean(2))


def test_quaternion_table():
    i, j, k = basis(1, 4), basis(2, 4), basis(3, 4)
    assert mul_da(i, j, "H") == k
    assert mul_da(j, i, "H") == [-v for v in k]


def test_octonion_products():
    e1, e2 = basis(1), basis(2)
    e3 = mul_da(e1, e2, "O")
    assert sorted(map(abs, e3)) == [0] * 7 + [1]
    # alternativity: (xy)x = -y(xx) = y for anticommuting imaginary units
    assert mul_da(e3, e1, "O") == e2
    assert mul_da(e2, e1, "O") == [-v for v in e3]


def test_octonion_table_is_cayley_dickson_of_quaternions():
    # (a, b)(c, d) = (ac - d* b, d a + b c*)
    for p, q in itertools.product(range(8), repeat=2):
        x, y = basis(p), basis(q)
        a, b, c, d = x[:4], x[4:], y[:4], y[4:]
        left = [u - v for u, v in zip(mul_da(a, c, "H"), mul_da(conj_da(d), b, "H"))]
        right = [u + v for u, v in zip(mul_da(d, a, "H"), mul_da(b, conj_da(c), "H"))]
        assert mul_da(x, y, "O") == left + right


def test_cayley_integers_closed_under_multiplication():
    L = get_lattice("cayley")
    geo = L.geometry()
    gens = [list(g) for g in L.generators]
    units = [list(geo.vec(n)) for n in geo.units_coeffs]
    assert len(units) == 240
    rng = random.Random(1)
    for _ in range(300):
        x, y = rng.choice(units + gens), rng.choice(units + gens)
        assert geo.is_lattice_point(Vec(mul_da(x, y, "O")))


@pytest.mark.parametrize("alg,d", [("C", 2), ("H", 4), ("O", 8)])
def test_norm_multiplicative(alg, d):
    rng = random.Random(d)
    for _ in range(200):
        x = Vec(F(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(d))
        y = Vec(F(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(d))
        assert Vec(mul_da(list(x), list(y), alg)).norm_sq() == x.norm_sq() * y.norm_sq()


def test_twists_are_orthogonal():
    r = QExt.sqrt(2) / 2
    for inv in [InversionSpec.euclidean(3), InversionSpec.conjugate_reciprocal(8), InversionSpec.negated_reciprocal(1), InversionSpec.custom([[r, -r], [r, r]])]:
        M = inv.twist
        d = len(M)
        for a in range(d):
            for b in range(d):
                s = sum((M[k][a] * M[k][b] for k in range(d)), qext(0))
                assert s == (1 if a == b else 0)


def test_non_orthogonal_twist_rejected():
    with pytest.raises(ValueError):
        InversionSpec.custom([[1, 1], [0, 1]])


@given(vecs(2), vecs(2))
def test_inversion_distance_identity_plane(x, y):
    inv = InversionSpec.conjugate_reciprocal(2)
    ix, iy = invert(x, inv), invert(y, inv)
    assert (ix - iy).norm_sq() * x.norm_sq() * y.norm_sq() == (x - y).norm_sq()


@given(vecs(4))
def test_inversion_is_involution_quaternions(x):
    inv = InversionSpec.conjugate_reciprocal(4)
    assert invert(invert(x, inv), inv) == x


@given(vecs(3))
def test_inversion_norm(x):
    y = invert(x, InversionSpec.euclidean(3))
    assert y.norm_sq() * x.norm_sq() == 1


def test_octonion_table_matches_doc():
    import pathlib

    doc = pathlib.Path(__file__).resolve().parent.parent / "docs" / "octonion_table.md"
    rows = [l for l in doc.read_text(encoding="utf-8").splitlines() if l.startswith("| **")]
    names = ["1"] + [f"e{k}" for k in range(1, 8)]
    assert len(rows) == 8
    for i, row in enumerate(rows):
        cells = [c.strip() for c in row.strip("|").split("|")][1:]
        for j, cell in enumerate(cells):
            prod = mul_da([int(k == i) for k in range(8)], [int(k == j) for k in range(8)], "O")
            sign = -1 if cell.startswith("−") else 1
            k = names.index(cell.lstrip("−"))
            assert prod == [sign * int(m == k) for m in range(8)], (names[i], names[j])

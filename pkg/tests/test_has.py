import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from iwasawa_cf.algebra import InversionSpec, Vec, invert
from iwasawa_cf.has import (
    TYPES,
    DegenerateImage,
    HASCoeffs,
    candidate_translates,
    classify,
    has_invert,
    has_translate,
    meets_K,
)
from iwasawa_cf.lattice import geometry, get_lattice
from iwasawa_cf.scalar import QExt

HUR = get_lattice("hurwitz")
Z3 = get_lattice("z3")
FCC = get_lattice("fcc")
CONJ2 = InversionSpec.conjugate_reciprocal(2)


def test_inversion_examples():
    z = Vec([1, 0])
    assert has_invert(HASCoeffs.plane(z, F(1, 2)), CONJ2) == HASCoeffs.sphere(invert(z, CONJ2), 1)
    z = Vec([1, 1])
    assert has_invert(HASCoeffs.sphere(z, 1), CONJ2) == HASCoeffs.sphere(invert(z, CONJ2) * z.norm_sq(), 1)
    unit = HASCoeffs.sphere(Vec([0, 0]), 1)
    assert has_invert(unit, CONJ2) == unit


def test_translation_examples():
    z, w = Vec([1, 1]), Vec([2, -1])
    moved = has_translate(HASCoeffs.plane(z, 0), w)
    assert moved == HASCoeffs.plane(z, z.dot(w))
    assert moved.contains(w)
    assert has_translate(HASCoeffs.sphere(Vec([0, 0]), 1), z) == HASCoeffs.sphere(z, 1)
    h = HASCoeffs.sphere(Vec([F(1, 2), 0]), F(1, 4))
    assert has_translate(h, Vec([0, 0])) == h


def test_canonical_form():
    a = HASCoeffs(2, Vec([-4, 0]), 0)
    b = HASCoeffs(-1, Vec([2, 0]), 0)
    assert a == b and hash(a) == hash(b)
    assert a.alpha == 1
    with pytest.raises(DegenerateImage):
        HASCoeffs(1, Vec([0, 0]), 1)  # empty
    with pytest.raises(DegenerateImage):
        HASCoeffs.sphere(Vec([1, 0]), 0)  # a point
    with pytest.raises(ValueError):
        HASCoeffs(0, Vec([0, 0]), 0)


def test_classify_examples():
    assert classify(HASCoeffs.plane(Vec([0, 1]), F(1, 2)), HUR) == "T1"
    assert classify(HASCoeffs.sphere(Vec([1, 1, 1]), 1), Z3) == "T4"
    assert classify(HASCoeffs.sphere(Vec([3, 0]), 1), HUR) == "Other"
    assert classify(HASCoeffs.sphere(Vec([1, 0]), 1), HUR) == "T3"
    assert classify(HASCoeffs.sphere(Vec([F(1, 2), F(1, 2), F(1, 2)]), F(1, 4)), Z3) == "T5"


def test_meets_K_examples():
    assert meets_K(HASCoeffs.plane(Vec([1, 0]), F(1, 2)), HUR) == "Substantial"
    geo = geometry(FCC)
    for n in geo.shell_coeffs(3):
        assert meets_K(HASCoeffs.sphere(geo.vec(n), 1), FCC) in ("PointOnly", "Empty")
    far_half = HASCoeffs.sphere(Vec([F(3, 2), 1]), F(1, 4))
    assert meets_K(far_half, HUR) == "Empty"
    # a circle touching the corner (1/2, 1/2) of the square from outside
    touch = HASCoeffs.sphere(Vec([1, 1]), F(1, 2))
    assert meets_K(touch, HUR) == "PointOnly"


def test_candidate_translates_match_enumeration():
    h = has_invert(HASCoeffs.plane(Vec([1, 0]), F(1, 2)), CONJ2)
    got = set(candidate_translates(h, HUR))
    brute = set()
    for a in itertools.product(range(-4, 5), repeat=2):
        t = has_translate(h, Vec(a))
        if meets_K(t, HUR) == "Substantial":
            brute.add(t)
    assert got == brute
    assert {classify(t, HUR) for t in got} <= {"T1", "T3"}


def test_candidate_translates_of_planes_through_origin():
    z = Vec([1, 1])
    for t in candidate_translates(HASCoeffs.plane(z, 0), HUR):
        # x.z = c with c in (1/2) Z
        c = -t.gamma / t.b[0] * z[0] if t.b[0] else -t.gamma / t.b[1] * z[1]
        assert (2 * c).is_rational and (2 * c).rat.denominator == 1


@pytest.mark.parametrize("name", ["hurwitz", "eisenstein", "z3", "fcc"])
def test_type_family_is_closed(name):
    from iwasawa_cf.cf import get_system
    from iwasawa_cf.serendipity import iterate_boundary

    L = get_lattice(name)
    report = iterate_boundary(get_system(name))
    for h in report.supports:
        assert classify(h, L) != "Other"
        for t in candidate_translates(has_invert(h, L.inversion), L):
            assert classify(t, L) in TYPES[:5]


ints = st.integers(-6, 6)
rats = st.builds(F, st.integers(-12, 12), st.integers(1, 4))


@st.composite
def circles(draw):
    c = Vec([draw(rats), draw(rats)])
    r = draw(st.builds(F, st.integers(1, 8), st.integers(1, 4)))
    return c, r


@given(circles())
def test_invert_is_involution(cr):
    c, r = cr
    h = HASCoeffs.sphere(c, r * r)
    try:
        once = has_invert(h, CONJ2)
    except DegenerateImage:
        return
    assert has_invert(once, CONJ2) == h


@given(circles(), st.tuples(ints, ints), st.builds(F, st.integers(-20, 20), st.integers(1, 7)))
def test_maps_agree_pointwise(cr, w, t):
    # rational points on a circle: c + r((1-t^2), 2t)/(1+t^2)
    c, r = cr
    h = HASCoeffs.sphere(c, r * r)
    p = c + Vec([r * (1 - t * t) / (1 + t * t), r * 2 * t / (1 + t * t)])
    assert h.contains(p)
    w = Vec(w)
    assert has_translate(h, w).contains(p + w)
    if not p.is_zero():
        try:
            inv = has_invert(h, CONJ2)
        except DegenerateImage:
            return
        assert inv.contains(invert(p, CONJ2))

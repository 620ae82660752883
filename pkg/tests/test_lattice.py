import itertools
import time
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from iwasawa_cf.algebra import Vec
from iwasawa_cf.lattice import (
    NotFullRank,
    UnknownLattice,
    catalog,
    check_properties,
    dirichlet_faces,
    dirichlet_vertices_bruteforce,
    enumerate_shell,
    geometry,
    get_lattice,
    nearest_point,
    radius_sq,
)
from iwasawa_cf.scalar import QExt, qext

NUMBERED = ["z", "hurwitz", "eisenstein", "hurwitz_quaternion", "gausenstein", "cayley", "fcc", "hex_prism", "z3"]
RAD_SQ = dict(zip(NUMBERED, [F(1, 4), F(1, 2), F(1, 3), F(1, 2), F(2, 3), F(1, 2), F(1, 2), F(21, 36), F(3, 4)]))


def brute_nearest(x: Vec, name: str, radius: int = 3) -> Vec:
    """Nearest lattice point over a coefficient box: float screen, exact final comparison."""
    L = get_lattice(name)
    geo = geometry(L)
    N = np.array(list(itertools.product(range(-radius, radius + 1), repeat=L.dim)))
    d = np.sum((N @ geo.Bf - x.to_float()) ** 2, axis=1)
    cand = [geo.vec(n) for n in N[d <= d.min() + 1e-6]]
    return min(cand, key=lambda z: ((x - z).norm_sq(), z))


def test_catalog_has_all_numbered_lattices():
    cat = catalog()
    assert [cat[n].index for n in NUMBERED] == list(range(1, 10))
    assert get_lattice("7").name == "fcc"
    with pytest.raises(UnknownLattice):
        get_lattice("leech")


def test_nearest_point_examples():
    assert nearest_point(Vec([F(6, 5), F(-8, 5)]), get_lattice("hurwitz")) == Vec([1, -2])
    h = F(1, 2)
    assert nearest_point(Vec([F(2, 5)] * 4), get_lattice("hurwitz_quaternion")) == Vec([h, h, h, h])
    r = QExt.sqrt(2)
    x = Vec([F(9, 10) / r, F(9, 10) / r, 0])
    assert nearest_point(x, get_lattice("fcc")) == brute_nearest(x, "fcc", 2) == Vec([1 / r, 1 / r, 0])


def test_nearest_point_float_batch_matches_exact():
    rng = np.random.default_rng(3)
    L = get_lattice("eisenstein")
    X = rng.uniform(-3, 3, (200, 2))
    fl = nearest_point(X, L)
    for x, y in zip(X[:40], fl[:40]):
        ex = nearest_point(Vec([F(str(v)) for v in x]), L)
        assert np.allclose(ex.to_float(), y)


def test_shells():
    assert len(enumerate_shell(get_lattice("hurwitz"), 1)) == 4
    assert len(enumerate_shell(get_lattice("gausenstein"), 3)) == 12
    z3 = [Vec(p) for p in itertools.product(range(-2, 3), repeat=3) if sum(c * c for c in p) == 2]
    assert enumerate_shell(get_lattice("z3"), 2) == sorted(z3)
    assert len(z3) == 12


def test_faces():
    assert len(dirichlet_faces(get_lattice("hurwitz"))) == 4
    assert len(dirichlet_faces(get_lattice("eisenstein"))) == 6
    fcc = get_lattice("fcc")
    assert len(dirichlet_faces(fcc)) == len(enumerate_shell(fcc, 1)) == 12


def test_radii_exact_and_fast():
    t = time.perf_counter()
    for name, r in RAD_SQ.items():
        assert radius_sq(get_lattice(name)) == r, name
    assert time.perf_counter() - t < 1.0


@pytest.mark.parametrize("name", ["z", "hurwitz", "eisenstein", "fcc", "hex_prism", "z3", "hurwitz_quaternion", "truncated_octahedron"])
def test_radius_matches_bruteforce_vertices(name):
    L = get_lattice(name)
    assert radius_sq(L, method="vertices") == radius_sq(L)


def test_z3_remoteness():
    rep = check_properties(get_lattice("z3"))
    assert not rep.three_remote.verdict
    assert rep.three_remote.witness == [1, 1, 1]
    assert rep.seven_remote.verdict and rep.seven_remote.vacuous
    assert rep.to_json()["three_remote"]["witness"] == [1, 1, 1]


def test_unit_generation_up_to_twelve():
    for name in NUMBERED:
        rep = check_properties(get_lattice(name), norm_bound=12)
        assert rep.unit_generated.verdict, name
        assert rep.integral.verdict and rep.nicely_invertible.verdict
        assert rep.norm_euclidean
    rep = check_properties(get_lattice("truncated_octahedron"), norm_bound=12)
    assert not rep.unit_generated.verdict
    assert rep.unit_generated.witness is not None


def test_negative_verdicts_carry_witnesses():
    for L in catalog().values():
        rep = check_properties(L).to_json()
        for key in ("integral", "unit_generated", "nicely_invertible", "three_remote", "seven_remote"):
            if not rep[key]["verdict"]:
                assert rep[key]["witness"], (L.name, key)


def test_norm_bound_minimum():
    with pytest.raises(ValueError):
        check_properties(get_lattice("z"), norm_bound=2)


def test_degenerate_generators_rejected():
    from iwasawa_cf.algebra import InversionSpec
    from iwasawa_cf.lattice import LatticeSpec

    bad = LatticeSpec("flat", 2, (Vec([1, 0]), Vec([2, 0])), 1, InversionSpec.euclidean(2))
    with pytest.raises(NotFullRank):
        geometry(bad).rad_sq


@pytest.mark.parametrize("name", ["hurwitz", "fcc", "hex_prism", "z3", "eisenstein"])
def test_twice_inner_products_integral(name):
    geo = geometry(get_lattice(name))
    pts = [geo.vec(n) for n in geo.ball_coeffs(3)]
    for z in pts[:60]:
        for w in pts[:60]:
            v = 2 * z.dot(w)
            assert v.is_rational and v.rat.denominator == 1


coords = st.builds(F, st.integers(-400, 400), st.integers(1, 40))


@given(st.lists(coords, min_size=2, max_size=2), st.tuples(st.integers(-5, 5), st.integers(-5, 5)), st.sampled_from(["hurwitz", "eisenstein"]))
def test_nearest_point_equivariant_and_in_K(xs, n, name):
    L = get_lattice(name)
    geo = geometry(L)
    x = Vec(xs)
    g = geo.vec(n)
    y = nearest_point(x, L)
    assert nearest_point(x + g, L) == y + g
    r = x - y
    for u in geo.units:
        assert r.dot(u) <= F(1, 2)


@given(st.lists(st.builds(F, st.integers(-90, 90), st.integers(30, 60)), min_size=3, max_size=3), st.sampled_from(["fcc", "hex_prism", "z3"]))
def test_nearest_agrees_with_bruteforce(xs, name):
    x = Vec(xs)
    assert nearest_point(x, get_lattice(name)) == brute_nearest(x, name, 7)


@pytest.mark.parametrize("name", ["cayley", "z3", "fcc", "hurwitz_quaternion", "eisenstein"])
def test_chamber_filter_matches_folding(name):
    geo = geometry(get_lattice(name))
    for norm in (2, 3, 4):
        sh = geo.shell_coeffs(norm)
        folded = np.unique(geo.dominant_coeffs_batch(sh), axis=0)
        filtered = np.unique(sh[geo.dominant_mask(sh)], axis=0)
        assert np.array_equal(folded, filtered)

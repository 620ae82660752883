import numpy as np
import pytest

from iwasawa_cf import kernels
from iwasawa_cf.cf import get_system
from iwasawa_cf.lattice import geometry, get_lattice

pytestmark = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not importable")


def both(fn, *args, **kw):
    old = kernels.get_backend()
    try:
        kernels.set_backend("numba")
        a = fn(*args, **kw)
        kernels.set_backend("numpy")
        b = fn(*args, **kw)
    finally:
        kernels.set_backend(old)
    return a, b


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


@pytest.mark.parametrize("name", ["hurwitz", "fcc", "z3", "hurwitz_quaternion"])
def test_tmap_parity(name):
    sys_ = get_system(name)
    X = sys_.sample_uniform(5000, np.random.default_rng(1))
    (Ya, Da, oka), (Yb, Db, okb) = both(kernels.tmap_batch, X, sys_.params)
    assert np.array_equal(oka, okb)
    assert np.array_equal(Da, Db)
    assert np.allclose(Ya, Yb, atol=1e-12)


def test_box_tmap_parity():
    sys_ = get_system("hurwitz", ["0", "1/100"])
    X = sys_.sample_uniform(5000, np.random.default_rng(2))
    (Ya, Da, _), (Yb, Db, _) = both(kernels.tmap_batch, X, sys_.params)
    assert np.array_equal(Da, Db) and np.allclose(Ya, Yb, atol=1e-12)


def test_nearest_parity():
    geo = geometry(get_lattice("eisenstein"))
    p = get_system("eisenstein").params
    X = np.random.default_rng(3).uniform(-5, 5, (5000, 2))
    a, b = both(kernels.nearest_coeffs, X, p.B, p.Binv, p.rel, p.relcoef)
    assert np.array_equal(a, b)
    # rounding the coefficients back gives points at least as close as any relevant neighbour
    P = a @ geo.Bf
    d0 = np.sum((X - P) ** 2, axis=1)
    for r in p.rel:
        assert np.all(d0 <= np.sum((X - P - r) ** 2, axis=1) + 1e-9)


def test_ellipsoid_parity():
    R = np.linalg.cholesky(np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]])).T
    a, b = both(kernels.enumerate_ellipsoid, R, np.array([0.3, -0.2, 0.1]), 9.0)
    assert sorted(map(tuple, a)) == sorted(map(tuple, b))
    assert len(a) > 20


def test_band_mask_parity():
    kind = np.array([0, 1])
    cen = np.array([[1.0, 0.0], [0.5, 0.5]])
    rad = np.array([0.0, 1.0])
    halfN = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    halfb = np.full(4, 0.5)
    args = (np.array([-0.5, -0.5]), np.array([1 / 64, 1 / 64]), (64, 64), kind, cen, rad, halfN, halfb, 0.01)
    a, b = both(kernels.band_mask, *args)
    assert np.array_equal(a, b)
    assert 0 < a.sum() < 64 * 64


def test_birkhoff_histograms_agree_statistically():
    sys_ = get_system("hurwitz")
    lo, hi = sys_.bbox
    res = np.array([16, 16])
    gsize = (hi - lo) / res
    x0 = sys_.sample_uniform(1, np.random.default_rng(0))[0]
    (ca, _), (cb, _) = both(kernels.birkhoff_histogram, x0, 400_000, sys_.params, lo, gsize, res)
    pa, pb = ca / ca.sum(), cb / cb.sum()
    assert np.abs(pa - pb).sum() < 0.05

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iwasawa_cf.cf import DigitString, get_system
from iwasawa_cf.density import (
    build_ulam,
    cf_mixing_probe,
    invariance_defect,
    kuzmin_decay,
    l1_distance,
    read_density,
    smoothness_probe,
    stationary,
    write_density,
)
from iwasawa_cf.serendipity import iterate_boundary


@pytest.fixture(scope="module")
def gauss():
    return build_ulam(get_system("gauss"), 256, 256)


@pytest.fixture(scope="module")
def hurwitz():
    return build_ulam(get_system("hurwitz"), 64, 64)


def test_matrix_is_column_stochastic(gauss, hurwitz):
    for m in (gauss, hurwitz):
        cols = np.asarray(m.matrix.sum(axis=0)).ravel()
        assert np.allclose(cols, 1.0, atol=1e-12)
        assert m.matrix.min() >= 0


def test_fixed_vector(gauss, hurwitz):
    for m in (gauss, hurwitz):
        assert m.residual < 1e-8
        assert np.isclose(m.mass.sum(), 1.0)
        assert np.isclose(np.sum(m.density * m.weights), 1.0)


def test_gauss_density_coarse(gauss):
    x = gauss.centers()[:, 0]
    h = 1 / (math.log(2) * (1 + x))
    assert np.sum(np.abs(gauss.density - h) * gauss.weights) < 0.05


def test_power_iteration_forgets_its_start(hurwitz):
    rng = np.random.default_rng(4)
    p = rng.random(hurwitz.n_cells)
    p /= p.sum()
    for _ in range(200):
        p = hurwitz.apply(p)
    assert np.abs(p - hurwitz.mass).sum() < 1e-6


def test_kuzmin_from_the_fixed_point_is_zero(hurwitz):
    out = kuzmin_decay(hurwitz, hurwitz.density, 5)
    assert max(out) < 1e-9


def test_kuzmin_decays(hurwitz):
    f = np.ones(hurwitz.n_cells) / hurwitz.weights.sum()
    out = kuzmin_decay(hurwitz, f, 10)
    assert all(b < a for a, b in zip(out, out[1:]))


def test_constant_values_have_no_jumps(hurwitz):
    rep = iterate_boundary(hurwitz.system)
    js = smoothness_probe(hurwitz, rep, values=np.ones(hurwitz.n_cells))
    assert js.cross_median == js.interior_median == 0
    assert js.cross_count > 0 and js.interior_count > js.cross_count


def test_invariance_defect_within_cell_scale(hurwitz):
    defect, scale = invariance_defect(hurwitz, lambda X: np.cos(3 * X[:, 0]) * X[:, 1], 3.0)
    assert defect <= scale


def test_mixing_decays(gauss):
    s = DigitString.from_coeffs([(2,)], gauss.system, "float")
    psi = cf_mixing_probe(gauss, s, lambda X: X[:, 0] < 0.5, 4, samples=200_000)
    assert psi[-1] < psi[0] and psi[-1] < 0.01


def test_l1_distance_nesting(hurwitz):
    assert l1_distance(hurwitz, hurwitz.grid(fill=0.0)) == pytest.approx(0.0, abs=1e-12)
    coarse = np.full((16, 16), 1.0)
    assert l1_distance(hurwitz, coarse) > 0
    with pytest.raises(ValueError):
        l1_distance(hurwitz, np.ones((24, 24)))


def test_density_file_round_trip(tmp_path, hurwitz):
    write_density(hurwitz, str(tmp_path / "d.bin"), str(tmp_path / "d.json"))
    back = read_density(str(tmp_path / "d.bin"))
    assert back.shape == (64, 64)
    assert np.array_equal(np.isnan(back), np.isnan(hurwitz.grid()))
    assert np.allclose(np.nan_to_num(back), np.nan_to_num(hurwitz.grid()))
    (tmp_path / "bad.bin").write_bytes(b"nonsense" * 4)
    with pytest.raises(ValueError):
        read_density(str(tmp_path / "bad.bin"))


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_stationary_is_a_probability_vector(seed):
    m = build_ulam(get_system("z"), 32, 16, seed=seed, solve=False)
    p = stationary(m)
    assert np.all(p >= 0) and np.isclose(p.sum(), 1.0)
    assert np.abs(m.apply(p) - p).sum() < 1e-8


def test_nearest_integer_density_and_its_kink_at_E():
    sys_ = get_system("z")
    m = build_ulam(sys_, 256, 256)
    g = (1 + 5 ** 0.5) / 2
    x = m.centers()[:, 0]
    a = np.abs(x)
    # the map is odd, so the density is the symmetric fold of the classical one on [0, 1/2]
    h = (1 / (g + a) + 1 / (g * g - a)) / (2 * math.log(g))
    assert np.sum(np.abs(m.density - h) * m.weights) < 0.03
    # E meets the interior of K only at 0; the density is continuous there with a corner
    left = (x > -0.2) & (x < 0)
    right = (x > 0) & (x < 0.2)
    assert np.polyfit(x[left], m.density[left], 1)[0] > 0.1
    assert np.polyfit(x[right], m.density[right], 1)[0] < -0.1
    assert abs(m.density[left][-1] - m.density[right][0]) < 0.1


def test_empty_string_and_whole_domain_mix_trivially(gauss):
    psi = cf_mixing_probe(gauss, DigitString([], gauss.system, []), lambda X: np.ones(len(X), bool), 3, samples=20_000)
    assert psi == [0.0] * 4


def test_stationarity_for_random_test_functions(hurwitz):
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b, c = rng.normal(size=3)
        defect, scale = invariance_defect(hurwitz, lambda X: np.sin(a * X[:, 0] + b * X[:, 1] + c), math.hypot(a, b))
        assert defect <= 3 * scale


def test_density_bounded_away_from_zero(hurwitz):
    assert 0.3 < hurwitz.density.min() and hurwitz.density.max() < 3


def test_refinement_consistency():
    sys_ = get_system("hurwitz")
    ms = {r: build_ulam(sys_, r, 4096) for r in (16, 32, 64)}
    d = [l1_distance(ms[2 * r], ms[r].grid(fill=0.0)) for r in (16, 32)]
    assert d[1] < d[0] < 0.05


def test_hurwitz_cylinder_mixing(hurwitz):
    s = DigitString.from_coeffs([(1, -2)], hurwitz.system, "float")
    psi = cf_mixing_probe(hurwitz, s, lambda X: X[:, 0] < 0, 5, samples=10**6)
    assert psi[0] > 2 * max(psi[2:])

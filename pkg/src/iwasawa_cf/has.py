"""Hyperplanes-and-spheres as exact quadratic-form triples.

A HAS is the locus ``alpha*|x|^2 + b.x + gamma = 0``.  Triples are kept in a
canonical scaling (first nonzero coefficient of ``(alpha, b_1..b_d, gamma)``
equal to 1), so equal loci compare and hash equal.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .algebra import InversionSpec, Vec
from .lattice import LatticeSpec, geometry
from .scalar import QExt, format_qext, qext

__all__ = [
    "HASCoeffs",
    "DegenerateImage",
    "SearchBoundExceeded",
    "has_invert",
    "has_translate",
    "classify",
    "meets_K",
    "candidate_translates",
    "TYPES",
    "translates_with_status",
]

TYPES = ("T1", "T2", "T3", "T4", "T5", "Other")
EMPTY, POINT_ONLY, SUBSTANTIAL = "Empty", "PointOnly", "Substantial"


class DegenerateImage(ValueError):
    pass


class SearchBoundExceeded(RuntimeError):
    pass


class HASCoeffs:
    __slots__ = ("alpha", "b", "gamma", "_hash")

    def __init__(self, alpha, b, gamma, canonical: bool = True):
        alpha = qext(alpha)
        gamma = qext(gamma)
        b = b if isinstance(b, Vec) else Vec(b)
        if canonical:
            lead = alpha if alpha else next((c for c in b.coords if c), None)
            if lead is None:
                lead = gamma
            if not lead:
                raise ValueError("all HAS coefficients vanish")
            if lead != 1:
                inv = lead.inverse()
                alpha, gamma = alpha * inv, gamma * inv
                b = b * inv
        self.alpha = alpha
        self.b = b
        self.gamma = gamma
        self._hash = None
        if canonical and self.is_degenerate():
            raise DegenerateImage(f"empty or single-point locus: {self!r}")

    # -- constructors ---------------------------------------------------------------
    @classmethod
    def plane(cls, normal: Vec, offset) -> "HASCoeffs":
        """``normal . x = offset``."""
        return cls(0, normal, -qext(offset))

    @classmethod
    def sphere(cls, center: Vec, radius_sq) -> "HASCoeffs":
        return cls(1, center * -2, center.norm_sq() - qext(radius_sq))

    # -- geometry -------------------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.b.dim

    @property
    def is_plane(self) -> bool:
        return not self.alpha

    @property
    def center(self) -> Vec:
        if self.is_plane:
            raise ValueError("a plane has no center")
        return self.b * (-1 / (2 * self.alpha))

    @property
    def radius_sq(self) -> QExt:
        c = self.center
        return c.norm_sq() - self.gamma / self.alpha

    def discriminant(self) -> QExt:
        return self.b.norm_sq() - 4 * self.alpha * self.gamma

    def is_degenerate(self) -> bool:
        return self.discriminant().sign() <= 0

    def evaluate(self, x: Vec) -> QExt:
        return self.alpha * x.norm_sq() + self.b.dot(x) + self.gamma

    def contains(self, x: Vec) -> bool:
        return not self.evaluate(x)

    def float_coeffs(self) -> tuple[float, np.ndarray, float]:
        return float(self.alpha), self.b.to_float(), float(self.gamma)

    def distance_float(self, X: np.ndarray) -> np.ndarray:
        """Unsigned Euclidean distance from each row of X to the locus."""
        a, b, g = self.float_coeffs()
        X = np.atleast_2d(X)
        if a == 0:
            return np.abs(X @ b + g) / np.linalg.norm(b)
        c = -b / (2 * a)
        r = math.sqrt(max(float(self.radius_sq), 0.0))
        return np.abs(np.linalg.norm(X - c, axis=1) - r)

    # -- identity -------------------------------------------------------------------
    def key(self):
        return (self.alpha, self.b.coords, self.gamma)

    def __eq__(self, other):
        if not isinstance(other, HASCoeffs):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __lt__(self, other: "HASCoeffs"):
        return _sort_key(self) < _sort_key(other)

    def __repr__(self):
        return f"HAS(alpha={self.alpha}, b={list(map(str, self.b))}, gamma={self.gamma})"

    def to_json(self, type_: str | None = None) -> dict:
        out = {
            "alpha": format_qext(self.alpha),
            "b": [format_qext(c) for c in self.b],
            "gamma": format_qext(self.gamma),
        }
        if type_ is not None:
            out["type"] = type_
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "HASCoeffs":
        return cls(qext(obj["alpha"]), Vec(qext(c) for c in obj["b"]), qext(obj["gamma"]))


def _sort_key(h: HASCoeffs):
    return (float(h.alpha), tuple(float(c) for c in h.b), float(h.gamma))


# ---------------------------------------------------------------------------
# actions
# ---------------------------------------------------------------------------


def has_invert(h: HASCoeffs, inv: InversionSpec) -> HASCoeffs:
    """Image under ``x -> twist(x)/|x|^2``: ``(alpha, b, gamma) -> (gamma, twist(b), alpha)``."""
    if h.is_degenerate():
        raise DegenerateImage("HAS is empty or a single point")
    out = HASCoeffs(h.gamma, inv.apply_twist(h.b), h.alpha)
    if out.is_degenerate():  # pragma: no cover - the discriminant is invariant
        raise DegenerateImage("inverted HAS degenerates")
    return out


def has_translate(h: HASCoeffs, t: Vec) -> HASCoeffs:
    """The HAS h' with ``x in h'`` iff ``x - t in h``."""
    a = h.alpha
    return HASCoeffs(a, h.b - t * (2 * a), a * t.norm_sq() - h.b.dot(t) + h.gamma)


# ---------------------------------------------------------------------------
# classification and incidence with K
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _plane_table(L: LatticeSpec) -> dict:
    geo = geometry(L)
    table = {}
    half = Fraction(1, 2)
    for u in geo.units:
        table[HASCoeffs.plane(u, half)] = "T1"
        table[HASCoeffs.plane(u, 0)] = "T2"
    return table


@lru_cache(maxsize=None)
def _facet_planes(L: LatticeSpec) -> frozenset:
    geo = geometry(L)
    return frozenset(HASCoeffs.plane(r, r.norm_sq() / 2) for r in geo.region.facet_normals())


def classify(h: HASCoeffs, L: LatticeSpec) -> str:
    geo = geometry(L)
    if h.is_plane:
        return _plane_table(L).get(h, "Other")
    c = h.center
    rsq = h.radius_sq
    if rsq == 1 and geo.is_lattice_point(c):
        n = c.norm_sq()
        if n in (1, 2):
            return "T3"
        if n == 3:
            return "T4"
        return "Other"
    if rsq == Fraction(1, 4):
        z = c * 2
        if geo.is_lattice_point(z) and z.norm_sq() in (1, 3, 5):
            return "T5"
    return "Other"


def meets_K(h: HASCoeffs, L: LatticeSpec) -> str:
    """Whether h meets the closure of K in nothing, isolated points, or a piece with interior."""
    region = geometry(L).region
    if h.is_plane:
        n = h.b
        t = -h.gamma
        hi = region.support(n)
        lo = -region.support(-n)
        if t > hi or t < lo:
            return EMPTY
        if t < hi and t > lo:
            return SUBSTANTIAL
        return SUBSTANTIAL if h in _facet_planes(L) else POINT_ONLY
    c = h.center
    rsq = h.radius_sq
    dmin = region.dist_sq(c)
    if rsq < dmin:
        return EMPTY
    dmax = region.max_dist_sq(c)
    if rsq > dmax:
        return EMPTY
    if rsq == dmin or rsq == dmax:
        return POINT_ONLY
    return SUBSTANTIAL


def _plane_step(n: Vec, L: LatticeSpec):
    """Generator g of the group {n.a : a in lattice} and a lattice vector with n.a0 = g."""
    geo = geometry(L)
    vals = [n.dot(b) for b in geo.gens]
    j0 = next((j for j, v in enumerate(vals) if v), None)
    if j0 is None:
        raise SearchBoundExceeded("plane normal is orthogonal to the lattice")
    ref = vals[j0]
    ratios = [v / ref for v in vals]
    if any(not r.is_rational for r in ratios):
        raise SearchBoundExceeded("plane normal is not commensurable with the lattice: translates are dense")
    den = 1
    for r in ratios:
        den = den * r.rat.denominator // math.gcd(den, r.rat.denominator)
    ints = [int(r.rat * den) for r in ratios]
    g, coeffs = _ext_gcd_many(ints)
    a0 = geo.vec(coeffs)
    step = ref * Fraction(g, den)
    if step.sign() < 0:
        step, a0 = -step, -a0
    return step, a0


def _ext_gcd_many(vals: list[int]) -> tuple[int, list[int]]:
    g, coeffs = 0, [0] * len(vals)
    for i, v in enumerate(vals):
        if v == 0:
            continue
        if g == 0:
            g, coeffs = abs(v), [0] * len(vals)
            coeffs[i] = 1 if v > 0 else -1
            continue
        # extended Euclid for g and v
        old_r, r = g, v
        old_s, s = 1, 0
        old_t, t = 0, 1
        while r:
            q = old_r // r
            old_r, r = r, old_r - q * r
            old_s, s = s, old_s - q * s
            old_t, t = t, old_t - q * t
        if old_r < 0:
            old_r, old_s, old_t = -old_r, -old_s, -old_t
        coeffs = [c * old_s for c in coeffs]
        coeffs[i] += old_t
        g = old_r
    return g, coeffs


def translates_with_status(h: HASCoeffs, L: LatticeSpec) -> list[tuple[HASCoeffs, str, Vec]]:
    """Lattice translates ``h - a`` that meet the closure of K, with verdict and a."""
    geo = geometry(L)
    region = geo.region
    rad = math.sqrt(float(region.rad_sq))
    out = []
    if not h.is_plane:
        c = h.center
        r = math.sqrt(max(float(h.radius_sq), 0.0))
        cc = geo.coeffs_float(c.to_float()[None, :])[0]
        for n in geo.points_within(cc, (r + rad) ** 2 * (1 + 1e-9) + 1e-9):
            a = geo.vec(n)
            hh = has_translate(h, -a)
            st = meets_K(hh, L)
            if st != EMPTY:
                out.append((hh, st, a))
        return out
    n = h.b
    t = -h.gamma
    step, a0 = _plane_step(n, L)
    hi = region.support(n)
    lo = -region.support(-n)
    # x in h - k*a0 iff n.x = t - k*step; need lo <= t - k*step <= hi
    kmin = math.floor(float((t - hi) / step)) - 1
    kmax = math.ceil(float((t - lo) / step)) + 1
    for k in range(kmin, kmax + 1):
        a = a0 * k
        hh = has_translate(h, -a)
        st = meets_K(hh, L)
        if st != EMPTY:
            out.append((hh, st, a))
    return out


def candidate_translates(h_inverted: HASCoeffs, L: LatticeSpec) -> list[HASCoeffs]:
    """All lattice translates of ``h_inverted`` meeting the closure of K."""
    return [hh for hh, _, _ in translates_with_status(h_inverted, L)]

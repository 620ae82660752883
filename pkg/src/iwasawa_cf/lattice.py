"""Lattices, their Dirichlet regions, and exact checks of the lattice properties.

Two routes compute the Dirichlet region K:

* For integral lattices spanned by their unit vectors, the units form a
  simply-laced root system and K is ``{x : x.u <= 1/2 for all units u}``.  K
  is the union of the Weyl-group images of one chamber piece (a product of
  simplices), so distances, support values and the radius reduce to a
  handful of exact computations after folding a point into the chamber.
* Otherwise the Voronoi-relevant vectors are found by search and K is an
  explicit polytope whose vertices come from intersecting facet hyperplanes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from importlib import resources
from itertools import product

import numpy as np

from . import kernels
from .algebra import InversionSpec, Vec
from .linalg import SingularMatrix, det_exact, integer_echelon, inverse_exact, lcm_denominators, solve_exact
from .polytope import Polytope
from .scalar import QExt, format_qext, qext

__all__ = [
    "LatticeSpec",
    "PropertyReport",
    "NotFullRank",
    "NotUnitGenerated",
    "UnknownLattice",
    "catalog",
    "get_lattice",
    "geometry",
    "nearest_point",
    "enumerate_shell",
    "dirichlet_faces",
    "check_properties",
    "radius_sq",
    "dirichlet_vertices_bruteforce",
]


class NotFullRank(ValueError):
    pass


class NotUnitGenerated(ValueError):
    pass


class UnknownLattice(KeyError):
    pass


@dataclass(frozen=True)
class LatticeSpec:
    name: str
    dim: int
    generators: tuple
    disc: int
    inversion: InversionSpec
    boundary_rule: str = "lex_smallest"
    algebra: str | None = None
    index: int | None = None
    description: str = field(default="", compare=False)

    def geometry(self) -> "LatticeGeometry":
        return geometry(self)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "disc": self.disc,
            "algebra": self.algebra,
            "index": self.index,
            "generators": [[format_qext(c) for c in g] for g in self.generators],
            "inversion": self.inversion.to_json(),
            "boundary_rule": self.boundary_rule,
        }


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

_CATALOG: dict[str, LatticeSpec] | None = None


def _load_catalog() -> dict[str, LatticeSpec]:
    text = resources.files("iwasawa_cf").joinpath("data/lattices.json").read_text()
    out = {}
    for entry in json.loads(text)["lattices"]:
        d = entry["dim"]
        gens = tuple(Vec(qext(c) for c in g) for g in entry["generators"])
        inv = InversionSpec.from_kind(entry["inversion"], d, entry.get("twist"))
        out[entry["name"]] = LatticeSpec(
            name=entry["name"],
            dim=d,
            generators=gens,
            disc=entry["disc"],
            inversion=inv,
            algebra=entry.get("algebra"),
            index=entry.get("index"),
            description=entry.get("description", ""),
        )
    return out


def catalog() -> dict[str, LatticeSpec]:
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _load_catalog()
    return dict(_CATALOG)


def get_lattice(name: str) -> LatticeSpec:
    cat = catalog()
    if name in cat:
        return cat[name]
    for spec in cat.values():
        if spec.index is not None and name == str(spec.index):
            return spec
    raise UnknownLattice(name)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

_GEOMETRY: dict[LatticeSpec, "LatticeGeometry"] = {}


def geometry(spec: LatticeSpec) -> "LatticeGeometry":
    g = _GEOMETRY.get(spec)
    if g is None:
        g = LatticeGeometry(spec)
        _GEOMETRY[spec] = g
    return g


class LatticeGeometry:
    """Derived data of a lattice: Gram matrix, shells, Dirichlet region."""

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        d = self.dim = spec.dim
        gens = list(spec.generators)
        if len(gens) != d or any(g.dim != d for g in gens):
            raise NotFullRank(f"{spec.name}: need {d} generators of dimension {d}")
        self.gens = gens
        self.G = [[a.dot(b) for b in gens] for a in gens]
        if det_exact(self.G) == 0:
            raise NotFullRank(f"{spec.name}: generators are linearly dependent")
        self.Ginv = inverse_exact(self.G)
        self.rational_gram = all(x.is_rational for row in self.G for x in row)
        if self.rational_gram:
            vals = [x.rat for row in self.G for x in row]
            self.gscale = lcm_denominators(vals)
            self.Gint = np.array([[int(x.rat * self.gscale) for x in row] for row in self.G], dtype=np.int64)
        else:
            self.gscale = None
            self.Gint = None
        self.Bf = np.array([g.to_float() for g in gens])
        self.Binvf = np.linalg.inv(self.Bf)
        self.Gf = self.Bf @ self.Bf.T
        self.R = np.linalg.cholesky(self.Gf).T

    # -- conversions --------------------------------------------------------------
    def vec(self, n) -> Vec:
        """Ambient vector with lattice coefficients ``n`` (ints or exact rationals)."""
        coords = [QExt(0)] * self.dim
        for c, g in zip(n, self.gens):
            c = qext(int(c)) if isinstance(c, (np.integer,)) else qext(c)
            if c:
                coords = [a + c * b for a, b in zip(coords, g.coords)]
        return Vec(coords)

    def coeffs(self, x: Vec) -> list[QExt]:
        rhs = [g.dot(x) for g in self.gens]
        return [sum((gi * r for gi, r in zip(row, rhs)), QExt(0)) for row in self.Ginv]

    def int_coeffs(self, x: Vec) -> tuple[int, ...] | None:
        c = self.coeffs(x)
        if all(v.is_rational and v.rat.denominator == 1 for v in c):
            return tuple(int(v.rat) for v in c)
        return None

    def is_lattice_point(self, x: Vec) -> bool:
        return self.int_coeffs(x) is not None

    def coeffs_float(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.Binvf

    def to_ambient_float(self, N: np.ndarray) -> np.ndarray:
        return np.atleast_2d(N) @ self.Bf

    def norm_sq_coeffs(self, n) -> QExt:
        n = [int(v) for v in n]
        if self.rational_gram:
            q = int(np.array(n) @ self.Gint @ np.array(n))
            return QExt(Fraction(q, self.gscale))
        return self.vec(n).norm_sq()

    # -- enumeration -------------------------------------------------------------------
    def points_within(self, center_coeffs, radius_sq: float) -> np.ndarray:
        """Float superset of lattice coefficient vectors within a ball."""
        return kernels.enumerate_ellipsoid(self.R, np.asarray(center_coeffs, dtype=float), float(radius_sq) * (1 + 1e-9) + 1e-9)

    def _exact_norms(self, N: np.ndarray) -> list[Fraction]:
        if self.rational_gram:
            q = np.einsum("ni,ij,nj->n", N, self.Gint, N)
            return [Fraction(int(v), self.gscale) for v in q]
        return [self.vec(n).norm_sq() for n in N]

    def shell_coeffs(self, norm) -> np.ndarray:
        """All coefficient vectors with exact norm ``z.z == norm``."""
        norm = qext(norm)
        cand = self.points_within(np.zeros(self.dim), float(norm))
        if self.rational_gram:
            if not norm.is_rational:
                return np.zeros((0, self.dim), dtype=np.int64)
            target = norm.rat * self.gscale
            if target.denominator != 1:
                return np.zeros((0, self.dim), dtype=np.int64)
            q = np.einsum("ni,ij,nj->n", cand, self.Gint, cand)
            return cand[q == int(target)]
        keep = [i for i, n in enumerate(cand) if self.vec(n).norm_sq() == norm]
        return cand[keep]

    def ball_coeffs(self, norm_bound) -> np.ndarray:
        """Nonzero coefficient vectors with ``0 < z.z <= norm_bound`` (exact)."""
        nb = qext(norm_bound)
        cand = self.points_within(np.zeros(self.dim), float(nb))
        if self.rational_gram and nb.is_rational:
            q = np.einsum("ni,ij,nj->n", cand, self.Gint, cand)
            lim = math.floor(nb.rat * self.gscale)
            return cand[(q > 0) & (q <= lim)]
        norms = self._exact_norms(cand)
        keep = [i for i, v in enumerate(norms) if v != 0 and qext(v) <= nb]
        return cand[keep]

    @cached_property
    def units_coeffs(self) -> np.ndarray:
        return self.shell_coeffs(1)

    @cached_property
    def units(self) -> list[Vec]:
        return [self.vec(n) for n in self.units_coeffs]

    # -- properties -------------------------------------------------------------------
    @cached_property
    def integral_witness(self):
        """None if z.z is an integer for every lattice point, else a witness."""
        d = self.dim
        for i in range(d):
            if not (self.G[i][i].is_rational and self.G[i][i].rat.denominator == 1):
                return tuple(1 if k == i else 0 for k in range(d))
        for i in range(d):
            for j in range(i + 1, d):
                v = 2 * self.G[i][j]
                if not (v.is_rational and v.rat.denominator == 1):
                    return tuple(1 if k in (i, j) else 0 for k in range(d))
        return None

    @property
    def integral(self) -> bool:
        return self.integral_witness is None

    @cached_property
    def unit_span_index(self) -> int:
        """Index of the Z-span of the units in the lattice (0 if not full rank)."""
        U = self.units_coeffs
        if len(U) == 0:
            return 0
        ech = integer_echelon(U.tolist())
        if len(ech) < self.dim:
            return 0
        idx = 1
        for r in ech:
            piv = next(v for v in r if v != 0)
            idx *= abs(piv)
        return idx

    @cached_property
    def unit_span_witness(self):
        """A generator outside the span of the units, or None."""
        if self.unit_span_index == 1:
            return None
        U = self.units_coeffs.tolist()
        base = integer_echelon(U) if U else []
        for i in range(self.dim):
            e = [1 if k == i else 0 for k in range(self.dim)]
            if not _in_span(base, e):
                return tuple(e)
        raise AssertionError("unit span has index > 1 but contains every generator")

    @cached_property
    def twist_coeffs(self):
        """Integer matrix of the inversion twist in the generator basis, or None."""
        rows = []
        for g in self.gens:
            c = self.int_coeffs(self.spec.inversion.apply_twist(g))
            if c is None:
                return None
            rows.append(c)
        return np.array(rows, dtype=np.int64)

    @property
    def nicely_invertible(self) -> bool:
        return self.twist_coeffs is not None

    @cached_property
    def root_route(self) -> bool:
        return self.integral and self.unit_span_index == 1

    @cached_property
    def region(self):
        if self.root_route:
            return ChamberRegion(self)
        return PolytopeRegion(self)

    @property
    def rad_sq(self) -> QExt:
        return self.region.rad_sq

    @cached_property
    def relevant(self) -> list[Vec]:
        return self.region.relevant

    @cached_property
    def relevant_coeffs(self) -> np.ndarray:
        return np.array([self.int_coeffs(r) for r in self.relevant], dtype=np.int64)

    @cached_property
    def relevant_float(self) -> np.ndarray:
        return np.array([r.to_float() for r in self.relevant])

    # -- nearest point --------------------------------------------------------------
    def nearest_coeffs_float(self, X: np.ndarray) -> np.ndarray:
        return kernels.nearest_coeffs(X, self.Bf, self.Binvf, self.relevant_float, self.relevant_coeffs)

    def nearest_float(self, X: np.ndarray) -> np.ndarray:
        return self.nearest_coeffs_float(X) @ self.Bf

    def nearest_exact(self, x: Vec) -> tuple[Vec, tuple[int, ...]]:
        xf = x.to_float()[None, :]
        if np.abs(xf).max() < 1e6:
            n = [int(v) for v in np.floor(self.coeffs_float(xf)[0] + 0.5)]
        else:
            # floats cannot place a far-out point; start from exact rounded coordinates
            n = [(c + Fraction(1, 2)).floor() for c in self.coeffs(x)]
        c = self.vec(n)
        rel = self.relevant
        relc = self.relevant_coeffs
        half = [r.norm_sq() / 2 for r in rel]
        while True:
            y = x - c
            best, bval = None, None
            for k, r in enumerate(rel):
                t = y.dot(r) - half[k]
                if t.sign() > 0 and (bval is None or t > bval):
                    best, bval = k, t
            if best is None:
                break
            c = c + rel[best]
            n = [a + int(b) for a, b in zip(n, relc[best])]
        # all equidistant closest points, then the lexicographically smallest
        dist = (x - c).norm_sq()
        seen = {c: tuple(n)}
        frontier = [c]
        while frontier:
            nxt = []
            for p in frontier:
                pn = seen[p]
                for k, r in enumerate(rel):
                    q = p + r
                    if q in seen:
                        continue
                    if (x - q).norm_sq() == dist:
                        seen[q] = tuple(a + int(b) for a, b in zip(pn, relc[k]))
                        nxt.append(q)
            frontier = nxt
        best = min(seen)
        return best, seen[best]

    # -- dominant reduction in coefficient space (integral root route) ----------------
    def dominant_mask(self, N: np.ndarray) -> np.ndarray:
        """Rows already in the fundamental chamber (nonnegative against every simple root)."""
        S = self.region.simple_coeffs
        return np.all(np.asarray(N, dtype=np.int64) @ (self.Gint @ S.T) >= 0, axis=1)

    def dominant_coeffs_batch(self, N: np.ndarray) -> np.ndarray:
        """Fold integer coefficient vectors into the fundamental chamber, exactly."""
        reg = self.region
        if not isinstance(reg, ChamberRegion):
            raise NotUnitGenerated("chamber folding needs a unit-generated integral lattice")
        N = np.array(N, dtype=np.int64, copy=True)
        S = reg.simple_coeffs  # (r, d)
        GS = self.Gint @ S.T  # scaled inner products with simple roots
        s = self.gscale
        live = np.arange(len(N))
        for _ in range(100000):
            ip = N[live] @ GS
            moving = (ip < 0).any(axis=1)
            live, ip = live[moving], ip[moving]
            if live.size == 0:
                return N
            k = ip.argmin(axis=1)
            two_ip = 2 * ip[np.arange(live.size), k]
            if np.any(two_ip % s):
                raise ArithmeticError("lattice is not integral")
            N[live] -= (two_ip // s)[:, None] * S[k]
        raise RuntimeError("chamber folding did not terminate")


def _in_span(base: list[list[int]], e: list[int]) -> bool:
    """Is the integer vector ``e`` in the Z-span of echelon rows ``base``?"""
    v = list(e)
    for r in base:
        c = next(i for i, x in enumerate(r) if x != 0)
        if v[c] % r[c]:
            return False
        q = v[c] // r[c]
        v = [a - q * b for a, b in zip(v, r)]
    return not any(v)


# ---------------------------------------------------------------------------
# Dirichlet regions
# ---------------------------------------------------------------------------


class ChamberRegion:
    """K of a unit-generated integral lattice, via the root system of its units."""

    kind = "chamber"

    def __init__(self, geo: LatticeGeometry):
        self.geo = geo
        d = geo.dim
        U = geo.units_coeffs
        Uf = U @ geo.Bf
        rng = np.random.default_rng(12345)
        for _ in range(100):
            g = rng.standard_normal(d)
            vals = Uf @ g
            if np.min(np.abs(vals)) > 1e-6:
                break
        else:  # pragma: no cover
            raise RuntimeError("no generic direction found")
        pos = U[vals > 0]
        posset = {tuple(r) for r in pos.tolist()}
        simple = []
        for r in pos.tolist():
            decomposable = any(tuple(a - b for a, b in zip(r, p)) in posset for p in pos.tolist() if p != r)
            if not decomposable:
                simple.append(r)
        if len(simple) != d:
            raise NotUnitGenerated(f"{geo.spec.name}: units do not form a full-rank root system")
        simple.sort(key=lambda r: tuple(-v for v in (np.array(r) @ geo.Bf)))
        self.simple_coeffs = np.array(simple, dtype=np.int64)
        self.simple = [geo.vec(r) for r in simple]
        # positive roots in the simple-root basis
        Minv = inverse_exact([[Fraction(int(v)) for v in col] for col in self.simple_coeffs.T.tolist()])
        def simple_basis(r):
            return [sum(Minv[i][j] * int(r[j]) for j in range(d)) for i in range(d)]
        self.positive = []
        for r in pos.tolist():
            c = simple_basis(r)
            if any(v < 0 or v.denominator != 1 for v in c):
                raise NotUnitGenerated(f"{geo.spec.name}: units are not a root system")
            self.positive.append((r, [int(v) for v in c]))
        # irreducible components of the Dynkin diagram
        comp = list(range(d))
        def find(i):
            while comp[i] != i:
                comp[i] = comp[comp[i]]
                i = comp[i]
            return i
        for i in range(d):
            for j in range(i + 1, d):
                if self.simple[i].dot(self.simple[j]):
                    comp[find(i)] = find(j)
        groups: dict[int, list[int]] = {}
        for i in range(d):
            groups.setdefault(find(i), []).append(i)
        self.components = sorted(groups.values())
        # highest root of each component
        self.highest = []
        self.highest_marks = []
        for cidx in self.components:
            best = None
            for r, c in self.positive:
                if any(c[j] for j in range(d) if j not in cidx):
                    continue
                h = sum(c)
                if best is None or h > best[0]:
                    best = (h, r, c)
            self.highest.append(geo.vec(best[1]))
            self.highest_marks.append(best[2])
        # chamber piece: x.alpha_i >= 0 and x.theta_c <= 1/2
        half = Fraction(1, 2)
        normals = [-a for a in self.simple] + list(self.highest)
        offsets = [0] * d + [half] * len(self.highest)
        self.chamber = Polytope(normals, offsets)
        # vertices of the chamber piece, component by component
        per_comp = []
        for cidx, marks in zip(self.components, self.highest_marks):
            opts = [Vec.zero(d)]
            roots = [self.simple[i] for i in cidx]
            M = [[a.dot(b) for b in roots] for a in roots]
            for k, i in enumerate(cidx):
                rhs = [QExt(0)] * len(cidx)
                rhs[k] = QExt(Fraction(1, 2 * marks[i]))
                y = solve_exact(M, rhs)
                v = Vec.zero(d)
                for yy, a in zip(y, roots):
                    v = v + a * yy
                opts.append(v)
            per_comp.append(opts)
        verts = []
        for choice in product(*per_comp):
            v = Vec.zero(d)
            for c in choice:
                v = v + c
            verts.append(v)
        self.chamber_vertices = verts
        self.rad_sq = max(v.norm_sq() for v in verts)
        self.relevant = list(geo.units)
        self._check_voronoi()

    def _check_voronoi(self):
        """Certify that no lattice point is closer than 0 to any chamber vertex."""
        geo = self.geo
        for v in self.chamber_vertices:
            nv = v.norm_sq()
            if not nv:
                continue
            c = [Fraction(t.rat) if t.is_rational else None for t in geo.coeffs(v)]
            cand = geo.points_within([float(t) for t in geo.coeffs(v)], 4 * float(nv) + 1e-6)
            if geo.rational_gram and all(t is not None for t in c):
                # integer arithmetic: scale v's coefficients to a common denominator
                den = lcm_denominators(c)
                w = np.array([int(t * den) for t in c], dtype=np.int64)
                diff = w[None, :] - den * cand
                q = np.einsum("ni,ij,nj->n", diff, geo.Gint, diff)
                q0 = int(w @ geo.Gint @ w)
                if np.any(q < q0):
                    raise NotUnitGenerated(f"{geo.spec.name}: unit facets do not bound the Dirichlet region")
                continue
            for n in cand:
                if (v - geo.vec(n)).norm_sq() < nv:
                    raise NotUnitGenerated(f"{geo.spec.name}: unit facets do not bound the Dirichlet region")

    # -- folding -----------------------------------------------------------------
    def dominant(self, x: Vec) -> Vec:
        simple = self.simple
        for _ in range(100000):
            ips = [x.dot(a) for a in simple]
            neg = [(float(v), k) for k, v in enumerate(ips) if v.sign() < 0]
            if not neg:
                return x
            _, k = min(neg)
            x = x - simple[k] * (2 * ips[k])
        raise RuntimeError("folding did not terminate")

    def dominant_float(self, X: np.ndarray) -> np.ndarray:
        S = np.array([a.to_float() for a in self.simple])
        X = np.array(np.atleast_2d(X), dtype=float, copy=True)
        for _ in range(100000):
            ip = X @ S.T
            neg = ip < -1e-14
            rows = np.nonzero(neg.any(axis=1))[0]
            if rows.size == 0:
                return X
            k = np.argmin(ip[rows], axis=1)
            X[rows] -= (2 * ip[rows, k])[:, None] * S[k]
        raise RuntimeError("folding did not terminate")

    # -- queries ---------------------------------------------------------------------
    def contains(self, p: Vec) -> bool:
        half = Fraction(1, 2)
        return all((p.dot(u) - half).sign() <= 0 for u in self.geo.units)

    def contains_float(self, P: np.ndarray, tol: float = 0.0) -> np.ndarray:
        U = self.geo.units_coeffs @ self.geo.Bf
        return np.all(np.atleast_2d(P) @ U.T <= 0.5 + tol, axis=1)

    def project(self, p: Vec) -> tuple[Vec, QExt]:
        """Nearest point of K to the folded image of ``p`` and the exact squared distance."""
        return self.chamber.project(self.dominant(p))

    def dist_sq(self, p: Vec) -> QExt:
        return self.project(p)[1]

    def max_dist_sq(self, c: Vec) -> QExt:
        dneg = self.dominant(-c)
        best = max(v.norm_sq() + 2 * dneg.dot(v) for v in self.chamber_vertices)
        return c.norm_sq() + best

    def support(self, n: Vec) -> QExt:
        """max over K of n.x."""
        dn = self.dominant(n)
        return max(dn.dot(v) for v in self.chamber_vertices)

    def facet_normals(self) -> list[Vec]:
        return list(self.geo.units)

    @cached_property
    def vertices(self) -> list[Vec]:
        """Exact vertices of K (Weyl orbit of the genuine chamber vertices)."""
        geo = self.geo
        d = geo.dim
        if len(geo.units) > 80:
            raise ValueError("exact vertex list is too large for this lattice; use vertices_float")
        half = Fraction(1, 2)
        seeds = []
        for v in self.chamber_vertices:
            tight = [u.to_float() for u in geo.units if v.dot(u) == half]
            if tight and np.linalg.matrix_rank(np.array(tight), tol=1e-9) == d:
                seeds.append(v)
        seen = set(seeds)
        frontier = list(seeds)
        while frontier:
            nxt = []
            for x in frontier:
                for a in self.simple:
                    y = x - a * (2 * x.dot(a))
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            frontier = nxt
        return sorted(seen)

    @cached_property
    def vertices_float(self) -> np.ndarray:
        geo = self.geo
        d = geo.dim
        half = Fraction(1, 2)
        seeds = []
        for v in self.chamber_vertices:
            tight = [u.to_float() for u in geo.units if v.dot(u) == half]
            if tight and np.linalg.matrix_rank(np.array(tight), tol=1e-9) == d:
                seeds.append(v.to_float())
        S = np.array([a.to_float() for a in self.simple])
        seen = {}
        frontier = [np.asarray(s) for s in seeds]
        for s in frontier:
            seen[tuple(np.round(s, 9))] = s
        while frontier:
            nxt = []
            for x in frontier:
                for a in S:
                    y = x - 2 * (x @ a) * a
                    key = tuple(np.round(y, 9))
                    if key not in seen:
                        seen[key] = y
                        nxt.append(y)
            frontier = nxt
        return np.array(sorted(seen.values(), key=tuple))


class PolytopeRegion:
    """K from a search for Voronoi-relevant vectors."""

    kind = "polytope"

    def __init__(self, geo: LatticeGeometry):
        self.geo = geo
        bound = max(geo.G[i][i] for i in range(geo.dim)) * 4
        while True:
            rel = self._relevant_up_to(bound)
            poly = Polytope(rel, [r.norm_sq() / 2 for r in rel], max_active=geo.dim)
            verts = poly.vertices()
            rad_sq = max(v.norm_sq() for v in verts)
            if 4 * rad_sq <= bound:
                break
            bound = 4 * rad_sq
        self.relevant = rel
        self.polytope = poly
        self.rad_sq = rad_sq
        self.vertices = verts
        self.vertices_float = poly.vertices_float()

    def _relevant_up_to(self, bound: float) -> list[Vec]:
        geo = self.geo
        out = []
        for n in geo.ball_coeffs(bound):
            z = geo.vec(n)
            half = [Fraction(int(v), 2) for v in n]
            nz = z.norm_sq()
            cand = geo.points_within([float(h) for h in half], float(nz) / 4 + 1e-9)
            ok = True
            for w in cand:
                if not any(w) or tuple(w) == tuple(n):
                    continue
                wv = geo.vec(w)
                if (wv.dot(wv - z)).sign() <= 0:
                    ok = False
                    break
            if ok:
                out.append(z)
        return sorted(out)

    def contains(self, p: Vec) -> bool:
        return self.polytope.contains(p)

    def contains_float(self, P: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return self.polytope.contains_float(P, tol)

    def project(self, p: Vec):
        return self.polytope.project(p)

    def dist_sq(self, p: Vec) -> QExt:
        return self.polytope.dist_sq(p)

    def max_dist_sq(self, c: Vec) -> QExt:
        return max((c - v).norm_sq() for v in self.vertices)

    def support(self, n: Vec) -> QExt:
        return max(n.dot(v) for v in self.vertices)

    def facet_normals(self) -> list[Vec]:
        return list(self.relevant)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def nearest_point(x, L: LatticeSpec):
    """``[x]``: the nearest lattice point, lexicographically smallest on ties.

    Exact for :class:`Vec` input; float arrays (one point or a batch of rows)
    use the numeric kernel.
    """
    geo = geometry(L)
    if isinstance(x, Vec):
        return geo.nearest_exact(x)[0]
    X = np.asarray(x, dtype=float)
    out = geo.nearest_float(np.atleast_2d(X))
    return out[0] if X.ndim == 1 else out


def enumerate_shell(L: LatticeSpec, n) -> list[Vec]:
    geo = geometry(L)
    return sorted(geo.vec(c) for c in geo.shell_coeffs(n))


def dirichlet_faces(L: LatticeSpec) -> list:
    """One type-1 plane ``x.z = 1/2`` per unit z; these bound K."""
    from .has import HASCoeffs

    geo = geometry(L)
    if not geo.root_route:
        raise NotUnitGenerated(f"{L.name} is not an integral unit-generated lattice")
    return [HASCoeffs.plane(u, Fraction(1, 2)) for u in geo.units]


def radius_sq(L: LatticeSpec, method: str = "auto") -> QExt:
    """rad(K)^2 exactly.  ``method='vertices'`` uses brute-force vertex enumeration."""
    if method == "vertices":
        return max(v.norm_sq() for v in dirichlet_vertices_bruteforce(L))
    return geometry(L).rad_sq


def dirichlet_vertices_bruteforce(L: LatticeSpec, check_radius: int = 3) -> list[Vec]:
    """Vertices of K by intersecting d facet hyperplanes at a time.

    A candidate is kept when it satisfies every facet inequality and is no
    farther from 0 than from any lattice point within ``check_radius``.  This
    is the slow, route-independent computation used to cross-check the
    chamber construction.
    """
    geo = geometry(L)
    normals = geo.region.facet_normals()
    poly = Polytope(normals, [r.norm_sq() / 2 for r in normals], max_active=0)
    verts = poly.vertices()
    lat = [geo.vec(n) for n in geo.ball_coeffs(check_radius * check_radius)]
    out = []
    for v in verts:
        nv = v.norm_sq()
        if all((v - z).norm_sq() >= nv for z in lat):
            out.append(v)
    return out


# ---------------------------------------------------------------------------
# property report
# ---------------------------------------------------------------------------


@dataclass
class Verdict:
    verdict: bool
    witness: list | None = None
    bound: object | None = None
    method: str = ""
    vacuous: bool = False

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "witness": self.witness, "method": self.method}
        if self.bound is not None:
            out["bound"] = self.bound
        if self.vacuous:
            out["vacuous"] = True
        return out


@dataclass
class PropertyReport:
    lattice: str
    integral: Verdict
    unit_generated: Verdict
    nicely_invertible: Verdict
    rad_sq: QExt
    norm_euclidean: bool
    three_remote: Verdict
    seven_remote: Verdict
    norm_bound: int = 0

    @property
    def rad_K(self) -> float:
        return float(self.rad_sq.to_mpf(80) ** 0.5)

    def to_json(self) -> dict:
        return {
            "lattice": self.lattice,
            "norm_bound": self.norm_bound,
            "integral": self.integral.to_json(),
            "unit_generated": self.unit_generated.to_json(),
            "nicely_invertible": self.nicely_invertible.to_json(),
            "rad_sq": format_qext(self.rad_sq),
            "rad": self.rad_K,
            "norm_euclidean": self.norm_euclidean,
            "three_remote": self.three_remote.to_json(),
            "seven_remote": self.seven_remote.to_json(),
        }


def _witness(geo: LatticeGeometry, n) -> list:
    return _coords(geo.vec(n))


def _coords(vec) -> list:
    """Coordinates of a witness point: JSON integers when integral, exact text otherwise."""
    out = []
    for c in vec:
        if c.is_rational and c.rat.denominator == 1:
            out.append(int(c.rat))
        else:
            out.append(format_qext(c))
    return out


def _greedy_unit_decomposition(geo: LatticeGeometry, N: np.ndarray, norm_bound: int, chunk: int = 20_000):
    """Reduce each row to 0 by subtracting units with z.u > 1/2; return first failure."""
    if len(N) == 0:
        return None
    U = geo.units_coeffs
    if len(U) == 0:
        return N[0]
    for start in range(0, len(N), chunk):
        fail = _greedy_chunk(geo, N[start:start + chunk], norm_bound, U)
        if fail is not None:
            return fail
    return None


def _greedy_chunk(geo: LatticeGeometry, N: np.ndarray, norm_bound: int, U: np.ndarray):
    s = geo.gscale
    Z = N.copy()
    steps = 0
    limit = max(1, norm_bound * norm_bound)
    UG = geo.Gint @ U.T
    while True:
        live = np.nonzero(Z.any(axis=1))[0]
        if live.size == 0:
            return None
        if steps >= limit:
            return N[live[0]]
        ip = Z[live] @ UG  # s * (z.u)
        k = ip.argmax(axis=1)
        best = ip[np.arange(live.size), k]
        stuck = 2 * best <= s
        if stuck.any():
            return N[live[np.argmax(stuck)]]
        Z[live] -= U[k]
        steps += 1


def _remoteness(geo: LatticeGeometry, shell_norm: int, target: Fraction, halve: bool) -> Verdict:
    """Check d(z', K)^2 >= target for z' = z (or z/2) over the shell of the given norm."""
    shell = geo.shell_coeffs(shell_norm)
    region = geo.region
    if len(shell) == 0:
        return Verdict(True, None, method="exact", vacuous=True)
    if isinstance(region, ChamberRegion) and geo.rational_gram:
        # the shell is a union of orbits, each meeting the chamber exactly once
        reps = shell[geo.dominant_mask(shell)]
    else:
        reps = shell
    failing = set()
    for n in reps:
        z = geo.vec(n)
        p = z / 2 if halve else z
        if region.dist_sq(p) < target:
            failing.add(tuple(int(v) for v in n))
    if not failing:
        return Verdict(True, None, method="exact")
    # report the lexicographically largest failing shell point
    if reps is shell:
        bad = [geo.vec(n) for n in shell if tuple(int(v) for v in n) in failing]
    else:
        folded = geo.dominant_coeffs_batch(shell)
        bad = [geo.vec(n) for n, f in zip(shell, folded) if tuple(int(v) for v in f) in failing]
    return Verdict(False, _coords(max(bad)), method="exact")


def check_properties(L: LatticeSpec, norm_bound: int = 3) -> PropertyReport:
    if norm_bound < 3:
        raise ValueError("norm_bound must be at least 3")
    geo = geometry(L)
    # integrality: exact and complete from the Gram matrix, sanity-checked on shells
    iw = geo.integral_witness
    integral = Verdict(iw is None, None if iw is None else _witness(geo, iw), method="gram")
    if integral.verdict and geo.rational_gram:
        ball = geo.ball_coeffs(norm_bound)
        bad = [n for n, v in zip(ball, geo._exact_norms(ball)) if Fraction(v).denominator != 1]
        if bad:  # pragma: no cover - impossible when the Gram check passes
            integral = Verdict(False, _witness(geo, bad[0]), method="shell")
    # unit generation: index of the unit span (complete) plus a constructive check up to the bound
    idx = geo.unit_span_index
    if idx != 1:
        ug = Verdict(False, _witness(geo, geo.unit_span_witness), bound=norm_bound, method="unit-span index")
    elif not geo.integral:
        ug = Verdict(True, None, bound=norm_bound, method="unit-span index")
    else:
        fail = _greedy_unit_decomposition(geo, geo.ball_coeffs(norm_bound), norm_bound)
        if fail is not None:
            ug = Verdict(False, _witness(geo, fail), bound=norm_bound, method="greedy decomposition")
        else:
            ug = Verdict(True, None, bound=norm_bound, method="unit-span index; greedy decomposition up to bound")
    # nice invertibility: twist maps generators into the lattice (complete)
    if geo.nicely_invertible:
        ni = Verdict(True, None, method="twist of generators")
    else:
        bad = next(g for g in geo.gens if not geo.is_lattice_point(L.inversion.apply_twist(g)))
        ni = Verdict(False, _coords(bad), method="twist of generators")
    rad_sq = geo.rad_sq
    tr = _remoteness(geo, 3, Fraction(1), halve=False)
    sr = _remoteness(geo, 7, Fraction(1, 4), halve=True)
    return PropertyReport(
        lattice=L.name,
        integral=integral,
        unit_generated=ug,
        nicely_invertible=ni,
        rad_sq=rad_sq,
        norm_euclidean=rad_sq < 1,
        three_remote=tr,
        seven_remote=sr,
        norm_bound=norm_bound,
    )

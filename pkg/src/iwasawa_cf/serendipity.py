"""Iterated boundary images ``E_{i+1} = E_i u T E_i`` at the level of HAS supports.

Dirichlet systems run exactly (:class:`~iwasawa_cf.has.HASCoeffs`); box
systems run in 100-digit arithmetic with tolerance-based deduplication.
Component structure of ``K \\ E`` is counted on a grid.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from scipy import ndimage

from . import kernels
from .cf import CFSystem, DigitString, _in_cylinder_float, _branch_inverse_float_batch, expand_float_batch
from .has import (
    EMPTY,
    SUBSTANTIAL,
    HASCoeffs,
    SearchBoundExceeded,
    _ext_gcd_many,
    classify,
    has_invert,
    translates_with_status,
)
from .lattice import geometry

__all__ = [
    "CertificationBroken",
    "BudgetExhausted",
    "ResolutionUnstable",
    "RangeEscape",
    "MPHAS",
    "DecompositionReport",
    "iterate_boundary",
    "component_grid",
    "count_components",
    "verify_finite_range",
    "FiniteRangeVerdict",
    "straddle_measure",
    "soundness_check",
]

BOX_DPS = 100
BOX_TOL = mpmath.mpf(10) ** -40
BOX_EXPAND = 200


class CertificationBroken(RuntimeError):
    pass


class BudgetExhausted(RuntimeError):
    pass


class ResolutionUnstable(RuntimeError):
    pass


class RangeEscape(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# high-precision HAS for box systems
# ---------------------------------------------------------------------------


class MPHAS:
    """``alpha|x|^2 + b.x + gamma = 0`` with mpf coefficients, canonically scaled."""

    __slots__ = ("alpha", "b", "gamma")

    def __init__(self, alpha, b, gamma):
        coeffs = [alpha, *b, gamma]
        lead = next((c for c in coeffs if abs(c) > BOX_TOL), None)
        if lead is None:
            raise ValueError("all HAS coefficients vanish")
        coeffs = [c / lead for c in coeffs]
        coeffs = [mpmath.mpf(0) if abs(c) <= BOX_TOL else c for c in coeffs]
        self.alpha = coeffs[0]
        self.b = coeffs[1:-1]
        self.gamma = coeffs[-1]

    @classmethod
    def plane(cls, normal, offset):
        return cls(mpmath.mpf(0), [mpmath.mpf(v) for v in normal], -mpmath.mpf(offset))

    @classmethod
    def from_exact(cls, h: HASCoeffs) -> "MPHAS":
        return cls(h.alpha.to_mpf(), [c.to_mpf() for c in h.b], h.gamma.to_mpf())

    @property
    def dim(self) -> int:
        return len(self.b)

    @property
    def is_plane(self) -> bool:
        return self.alpha == 0

    @property
    def center(self):
        return [-v / (2 * self.alpha) for v in self.b]

    @property
    def radius_sq(self):
        c = self.center
        return mpmath.fsum(v * v for v in c) - self.gamma / self.alpha

    def key(self) -> tuple:
        scale = mpmath.mpf(10) ** 40
        return tuple(int(mpmath.nint(v * scale)) for v in (self.alpha, *self.b, self.gamma))

    def float_coeffs(self):
        return float(self.alpha), np.array([float(v) for v in self.b]), float(self.gamma)

    def to_json(self, type_: str | None = None) -> dict:
        out = {
            "alpha": mpmath.nstr(self.alpha, 45),
            "b": [mpmath.nstr(v, 45) for v in self.b],
            "gamma": mpmath.nstr(self.gamma, 45),
        }
        if type_ is not None:
            out["type"] = type_
        return out

    def __repr__(self):
        return f"MPHAS({mpmath.nstr(self.alpha, 8)}, {[mpmath.nstr(v, 8) for v in self.b]}, {mpmath.nstr(self.gamma, 8)})"


def _mp_invert(h: MPHAS, O: list) -> MPHAS:
    b = [mpmath.fsum(O[i][j] * h.b[j] for j in range(h.dim)) for i in range(h.dim)]
    return MPHAS(h.gamma, b, h.alpha)


def _mp_translate(h: MPHAS, t) -> MPHAS:
    a = h.alpha
    tt = mpmath.fsum(v * v for v in t)
    bt = mpmath.fsum(u * v for u, v in zip(h.b, t))
    return MPHAS(a, [bi - 2 * a * ti for bi, ti in zip(h.b, t)], a * tt - bt + h.gamma)


class _MPSet:
    """Set of MPHAS deduplicated within the rounding tolerance."""

    def __init__(self):
        self._d = {}

    def _neighbours(self, key):
        # adjacent rounding cells on every coordinate
        keys = [()]
        for k in key:
            keys = [p + (k + e,) for p in keys for e in (-1, 0, 1)]
        return keys

    def find(self, h: MPHAS):
        key = h.key()
        if key in self._d:
            return self._d[key]
        for k in self._neighbours(key):
            if k in self._d:
                return self._d[k]
        return None

    def add(self, h: MPHAS) -> bool:
        if self.find(h) is not None:
            return False
        self._d[h.key()] = h
        return True

    def __len__(self):
        return len(self._d)

    def __iter__(self):
        return iter(self._d.values())


def _box_meets(h: MPHAS, lo, hi) -> str:
    d = h.dim
    if h.is_plane:
        nn = mpmath.sqrt(mpmath.fsum(v * v for v in h.b))
        n = [v / nn for v in h.b]
        t = -h.gamma / nn
        mn = mpmath.fsum(min(n[j] * lo[j], n[j] * hi[j]) for j in range(d))
        mx = mpmath.fsum(max(n[j] * lo[j], n[j] * hi[j]) for j in range(d))
        if t < mn - BOX_TOL or t > mx + BOX_TOL:
            return EMPTY
        if mn + BOX_TOL < t < mx - BOX_TOL:
            return SUBSTANTIAL
        axis = sum(1 for v in n if abs(v) > BOX_TOL) == 1
        return SUBSTANTIAL if axis else "PointOnly"
    c = h.center
    r2 = h.radius_sq
    dmin = mpmath.fsum(max(lo[j] - c[j], 0, c[j] - hi[j]) ** 2 for j in range(d))
    dmax = mpmath.fsum(max(abs(c[j] - lo[j]), abs(c[j] - hi[j])) ** 2 for j in range(d))
    if r2 < dmin - BOX_TOL or r2 > dmax + BOX_TOL:
        return EMPTY
    if abs(r2 - dmin) <= BOX_TOL or abs(r2 - dmax) <= BOX_TOL:
        return "PointOnly"
    return SUBSTANTIAL


def _rational_ratio(x, max_den: int = 10**6) -> Fraction | None:
    f = Fraction(mpmath.nstr(x, 60, strip_zeros=False)).limit_denominator(max_den)
    if abs(x - mpmath.mpf(f.numerator) / f.denominator) <= BOX_TOL:
        return f
    return None


def _box_translates(h: MPHAS, lo, hi):
    d = h.dim
    out = []
    if not h.is_plane:
        c = h.center
        r = mpmath.sqrt(max(h.radius_sq, 0))
        rf = float(r)
        cf_ = np.array([float(v) for v in c])
        lof = np.array([float(v) for v in lo])
        hif = np.array([float(v) for v in hi])
        R = rf + math.sqrt(d) + 1e-9
        ranges = [np.arange(math.floor(cf_[j] - hif[j] - R), math.ceil(cf_[j] - lof[j] + R) + 1) for j in range(d)]
        A = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(d, -1).T
        # float screen: the distance range from c - a to the box must straddle r
        C = cf_ - A
        dmin = np.sqrt(np.sum(np.maximum(np.maximum(lof - C, 0.0), C - hif) ** 2, axis=1))
        dmax = np.sqrt(np.sum(np.maximum(np.abs(C - lof), np.abs(C - hif)) ** 2, axis=1))
        margin = 1e-9 * (1.0 + rf)
        keep = (dmin <= rf + margin) & (dmax >= rf - margin)
        clear = (dmin < rf - margin) & (dmax > rf + margin)
        for a, sure in zip(A[keep], clear[keep]):
            hh = _mp_translate(h, [-mpmath.mpf(int(v)) for v in a])
            st = SUBSTANTIAL if sure else _box_meets(hh, lo, hi)
            if st != EMPTY:
                out.append((hh, st))
        return out
    jmax = max(range(d), key=lambda j: abs(h.b[j]))
    ratios = []
    for j in range(d):
        f = _rational_ratio(h.b[j] / h.b[jmax])
        if f is None:
            raise SearchBoundExceeded("plane normal is not commensurable with Z^d")
        ratios.append(f)
    den = math.lcm(*[f.denominator for f in ratios])
    ints = [int(f * den) for f in ratios]
    g, coeffs = _ext_gcd_many(ints)
    step = h.b[jmax] * g / den  # b . a0 for the lattice vector a0 = coeffs
    a0 = np.array(coeffs)
    if step < 0:
        step, a0 = -step, -a0
    t = -h.gamma
    mn = mpmath.fsum(min(h.b[j] * lo[j], h.b[j] * hi[j]) for j in range(d))
    mx = mpmath.fsum(max(h.b[j] * lo[j], h.b[j] * hi[j]) for j in range(d))
    kmin = int(mpmath.floor((t - mx) / step)) - 1
    kmax = int(mpmath.ceil((t - mn) / step)) + 1
    for k in range(kmin, kmax + 1):
        hh = _mp_translate(h, [-mpmath.mpf(int(v) * k) for v in a0])
        st = _box_meets(hh, lo, hi)
        if st != EMPTY:
            out.append((hh, st))
    return out


# ---------------------------------------------------------------------------
# the level iteration
# ---------------------------------------------------------------------------


@dataclass
class DecompositionReport:
    system: CFSystem
    mode: str  # exact | box
    levels: list  # cumulative supports per level
    stabilized_at: int | None
    type_census: dict
    budget_exhausted: bool
    support_types: dict = field(default_factory=dict)
    components: int | None = None
    component_points: list = field(default_factory=list)
    component_resolutions: list = field(default_factory=list)

    @property
    def supports(self) -> list:
        return self.levels[-1]

    @property
    def counts(self) -> list[int]:
        return [len(lv) for lv in self.levels]

    @property
    def stabilized(self) -> bool:
        return self.stabilized_at is not None

    def level_deltas(self) -> list[list]:
        out = [list(self.levels[0])]
        for prev, cur in zip(self.levels, self.levels[1:]):
            if self.mode == "exact":
                ps = set(prev)
                out.append([h for h in cur if h not in ps])
            else:
                out.append(list(cur[len(prev):]))
        return out

    def type_of(self, h) -> str:
        return self.support_types.get(h, "Other") if self.mode == "exact" else "Other"

    def to_json(self, include_levels: bool = True) -> dict:
        out = {
            "system": self.system.to_json(),
            "mode": self.mode,
            "stabilized": self.stabilized,
            "stabilized_at": self.stabilized_at,
            "level_counts": self.counts,
            "type_census": dict(self.type_census),
            "budget_exhausted": self.budget_exhausted,
            "components": self.components,
            "component_points": [list(map(float, p)) for p in self.component_points],
            "component_resolutions": list(self.component_resolutions),
        }
        if include_levels:
            out["levels"] = [[h.to_json(self.type_of(h)) for h in delta] for delta in self.level_deltas()]
        return out


def _certified(sys: CFSystem) -> bool:
    return sys.lattice.index is not None


def _initial_faces(sys: CFSystem) -> list[HASCoeffs]:
    region = sys.geo.region
    return sorted({HASCoeffs.plane(r, r.norm_sq() / 2) for r in region.facet_normals()})


def iterate_boundary(sys: CFSystem, max_level: int | None = None, strict: bool = True, max_expand: int | None = None) -> DecompositionReport:
    """Grow the support set level by level until a round adds nothing.

    Level 0 is the set of face planes of K.  A report with
    ``stabilized_at = n`` holds ``levels[n] == levels[n+1]``.  With
    ``strict`` a catalog (certified) system raises CertificationBroken as
    soon as a retained support classifies as Other.

    Box systems need not close up, so at most ``max_expand`` new supports
    (default BOX_EXPAND) are inverted per level; when that cap bites the
    recorded levels are a subset of the true ones and ``budget_exhausted``
    is set.
    """
    if sys.is_box:
        return _iterate_box(sys, 8 if max_level is None else max_level, BOX_EXPAND if max_expand is None else max_expand)
    max_level = 12 if max_level is None else max_level
    L = sys.lattice
    inv = L.inversion
    cur = _initial_faces(sys)
    seen = set(cur)
    types = {h: classify(h, L) for h in cur}
    levels = [list(cur)]
    delta = list(cur)
    stabilized_at = None
    for lvl in range(1, max_level + 2):
        new = []
        for h in delta:
            for hh, st, _ in translates_with_status(has_invert(h, inv), L):
                if st != SUBSTANTIAL or hh in seen:
                    continue
                seen.add(hh)
                new.append(hh)
                t = classify(hh, L)
                types[hh] = t
                if t == "Other" and strict and _certified(sys):
                    raise CertificationBroken(f"{L.name}: support {hh} is not of type 1-5")
        levels.append(levels[-1] + sorted(new))
        if not new:
            stabilized_at = lvl - 1
            break
        delta = new
    census = _census(types.values())
    return DecompositionReport(sys, "exact", levels, stabilized_at, census, stabilized_at is None, types)


def _census(types) -> dict:
    out = {t: 0 for t in ("T1", "T2", "T3", "T4", "T5", "Other")}
    for t in types:
        out[t] += 1
    return out


def _iterate_box(sys: CFSystem, max_level: int, max_expand: int) -> DecompositionReport:
    with mpmath.workdps(BOX_DPS):
        d = sys.dim
        lo = [v.to_mpf() for v in sys.offsets]
        hi = [v + 1 for v in lo]
        O = [[c.to_mpf() for c in row] for row in sys.inversion.twist]
        faces = []
        for j in range(d):
            e = [mpmath.mpf(1) if i == j else mpmath.mpf(0) for i in range(d)]
            faces.append(MPHAS.plane(e, lo[j]))
            faces.append(MPHAS.plane(e, hi[j]))
        seen = _MPSet()
        for h in faces:
            seen.add(h)
        levels = [list(seen)]
        delta = list(levels[0])
        stabilized_at = None
        capped = False
        for lvl in range(1, max_level + 2):
            new = []
            if len(delta) > max_expand:
                # deterministic subset: the supports closest to the origin come first,
                # as their images are the largest
                delta = sorted(delta, key=_origin_power)[:max_expand]
                capped = True
            for h in delta:
                for hh, st in _box_translates(_mp_invert(h, O), lo, hi):
                    if st == SUBSTANTIAL and seen.add(hh):
                        new.append(hh)
            levels.append(levels[-1] + new)
            if not new:
                stabilized_at = lvl - 1
                break
            delta = new
            if lvl == max_level:
                break
    census = _census(["Other"] * len(levels[-1]))
    return DecompositionReport(sys, "box", levels, stabilized_at, census, capped or stabilized_at is None)


def _origin_power(h: MPHAS):
    """|power of the origin| relative to the support's scale; small means the support passes near 0."""
    if h.is_plane:
        return float(abs(h.gamma) / mpmath.sqrt(mpmath.fsum(v * v for v in h.b)))
    return float(abs(h.gamma))


# ---------------------------------------------------------------------------
# components of K \ E on a grid
# ---------------------------------------------------------------------------


def _support_arrays(supports, dim: int):
    kind, cen, rad = [], [], []
    for h in supports:
        a, b, g = h.float_coeffs()
        if a == 0:
            nb = float(np.linalg.norm(b))
            kind.append(0)
            cen.append(b / nb)
            rad.append(-g / nb)
        else:
            c = -b / (2 * a)
            kind.append(1)
            cen.append(c)
            rad.append(math.sqrt(max(float(c @ c) - g / a, 0.0)))
    if not kind:
        return np.zeros(0, np.int64), np.zeros((0, dim)), np.zeros(0)
    return np.array(kind), np.array(cen), np.array(rad)


@dataclass
class ComponentGrid:
    labels: np.ndarray
    count: int
    gmin: np.ndarray
    gsize: np.ndarray
    res: int
    band: float

    def centers(self, idx: np.ndarray) -> np.ndarray:
        return self.gmin + (np.asarray(idx) + 0.5) * self.gsize

    def label_of(self, X: np.ndarray) -> np.ndarray:
        K = np.floor((np.atleast_2d(X) - self.gmin) / self.gsize).astype(np.int64)
        inside = np.all((K >= 0) & (K < self.res), axis=1)
        out = np.zeros(len(K), np.int64)
        Kc = np.clip(K, 0, self.res - 1)
        out[inside] = self.labels[tuple(Kc[inside].T)]
        return out

    def representatives(self, per_component: int, rng: np.random.Generator) -> dict[int, np.ndarray]:
        out = {}
        flat = self.labels.ravel()
        order = np.argsort(flat, kind="stable")
        sorted_labels = flat[order]
        starts = np.searchsorted(sorted_labels, np.arange(1, self.count + 2))
        for c in range(1, self.count + 1):
            cells = order[starts[c - 1]:starts[c]]
            pick = cells if len(cells) <= per_component else rng.choice(cells, per_component, replace=False)
            idx = np.array(np.unravel_index(pick, self.labels.shape)).T
            out[c] = self.centers(idx)
        return out


def component_grid(report: DecompositionReport, res: int) -> ComponentGrid:
    """Label the connected pieces of ``K \\ E`` on a ``res^d`` grid.

    A cell is kept when its centre lies in K and is farther than
    ``eps + half the cell diagonal`` from every support, with
    ``eps = 2^-10 rad(K)``; kept cells that share a face belong to the same
    component, since neither of them meets E.
    """
    sys = report.system
    d = sys.dim
    gmin, gmax = sys.bbox
    gsize = (gmax - gmin) / res
    eps = 2.0 ** -10 * math.sqrt(sys.rad_sq_float)
    band = eps + 0.5 * float(np.linalg.norm(gsize))
    kind, cen, rad = _support_arrays(report.supports, d)
    N, b = sys.halfspaces
    mask = kernels.band_mask(gmin, gsize, [res] * d, kind, cen, rad, N, b, band)
    labels, count = ndimage.label(mask)
    labels, count = _merge_fragments(labels, int(count), gmin, gsize, kind, cen, rad, eps)
    return ComponentGrid(labels, count, gmin, gsize, res, band)


FRAGMENT_CELLS = 8
FRAGMENT_REACH = 4


def _clear_segment(x, y, step, kind, cen, rad, eps) -> bool:
    """True when every point of the segment [x, y] is farther than eps from every support.

    Distance to a support is 1-Lipschitz, so samples spaced ``step`` apart
    with clearance ``eps + step/2`` cover the whole segment.
    """
    n = max(2, int(math.ceil(np.linalg.norm(y - x) / step)) + 1)
    t = np.linspace(0.0, 1.0, n)[:, None]
    P = x + t * (y - x)
    h = np.linalg.norm(y - x) / (n - 1)
    for i in range(len(kind)):
        if kind[i] == 0:
            dist = np.abs(P @ cen[i] - rad[i])
        else:
            dist = np.abs(np.linalg.norm(P - cen[i], axis=1) - rad[i])
        if dist.min() <= eps + h / 2:
            return False
    return True


def _merge_fragments(labels, count, gmin, gsize, kind, cen, rad, eps):
    """Join tiny components to a neighbour when a straight segment links them clear of E.

    Cells near tangencies can be cut off from their region only because the
    band includes half a cell diagonal; a segment that keeps distance eps
    from every support proves the two cells lie in one component.
    """
    if count < 2:
        return labels, count
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    small = np.flatnonzero(sizes[1:] <= FRAGMENT_CELLS) + 1
    if small.size == 0:
        return labels, count
    parent = np.arange(count + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    shape = np.array(labels.shape)
    r = FRAGMENT_REACH
    offs = np.array([o for o in itertools.product(range(-r, r + 1), repeat=labels.ndim) if any(o)])
    offs = offs[np.argsort(np.abs(offs).sum(axis=1), kind="stable")]
    step = float(gsize.min()) / 4
    is_small = np.zeros(count + 1, dtype=bool)
    is_small[small] = True
    for cell in np.argwhere(is_small[labels]):
        own = labels[tuple(cell)]
        x = gmin + (cell + 0.5) * gsize
        nbs = cell + offs
        nbs = nbs[np.all((nbs >= 0) & (nbs < shape), axis=1)]
        others = labels[tuple(nbs.T)]
        keep = (others != 0) & (others != own)
        for nb, other in zip(nbs[keep], others[keep]):
            if find(other) == find(own):
                continue
            if _clear_segment(x, gmin + (nb + 0.5) * gsize, step, kind, cen, rad, eps):
                parent[find(own)] = find(other)
    roots = np.array([find(a) for a in range(count + 1)])
    uniq, relabel = np.unique(roots[1:], return_inverse=True)
    if len(uniq) == count:
        return labels, count
    lut = np.concatenate([[0], relabel + 1]).astype(labels.dtype)
    return lut[labels], len(uniq)


def count_components(report: DecompositionReport, grid_res: int, check_double: bool = True) -> int:
    """Components of ``K \\ E``, required to agree at ``grid_res`` and ``2 grid_res``."""
    if not report.stabilized:
        raise BudgetExhausted("component count needs a stabilized report")
    g1 = component_grid(report, grid_res)
    counts = [g1.count]
    if check_double:
        counts.append(component_grid(report, 2 * grid_res).count)
    report.component_resolutions = [grid_res, 2 * grid_res][: len(counts)]
    if len(set(counts)) != 1:
        raise ResolutionUnstable(f"component counts {counts} at resolutions {report.component_resolutions}")
    report.components = counts[0]
    reps = g1.representatives(1, np.random.default_rng(0))
    report.component_points = [reps[c][0] for c in sorted(reps)]
    return counts[0]


# ---------------------------------------------------------------------------
# finite range consequences
# ---------------------------------------------------------------------------


@dataclass
class FiniteRangeVerdict:
    depth: int
    strings_checked: int
    ranges: list  # sorted component-id tuples, the distinct T^{|s|} C_s
    full_cylinders: dict  # range index -> digit pair coefficients (or None)
    escapes: int

    @property
    def ok(self) -> bool:
        return self.escapes == 0 and all(v is not None for v in self.full_cylinders.values())

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "strings_checked": self.strings_checked,
            "ranges": [list(r) for r in self.ranges],
            "full_cylinders": {str(k): v for k, v in self.full_cylinders.items()},
            "escapes": self.escapes,
        }


def _sample_strings(sys: CFSystem, depth: int, samples: int, rng) -> list[tuple]:
    X = sys.sample_uniform(samples, rng)
    D, alive, _ = expand_float_batch(X, depth, sys)
    out = set()
    for m in range(1, depth + 1):
        ok = np.all(alive[:, :m], axis=1)
        for row in D[ok, :m]:
            out.add(tuple(map(tuple, row.tolist())))
    return sorted(out, key=lambda s: (len(s), s))


def _full_cylinder_in(sys: CFSystem, grid: ComponentGrid, members: set, test_Y: np.ndarray, max_norm: int = 50):
    geo = sys.geo
    pts = geo.ball_coeffs(max_norm)
    norms = np.einsum("ni,ij,nj->n", pts.astype(float), geo.Gf, pts.astype(float))
    order = np.argsort(norms, kind="stable")
    first = [tuple(int(v) for v in pts[i]) for i in order if norms[i] >= 2 - 1e-9]
    second = [tuple(int(v) for v in pts[i]) for i in order if norms[i] >= 9 - 1e-9][:64]
    for a in first:
        # screen: the point iota^{-1}(a) must sit in one of the member components
        s1 = DigitString.from_coeffs([a], sys, "float")
        x0, _ = _branch_inverse_float_batch(s1, np.zeros((1, sys.dim)))
        if grid.label_of(x0)[0] not in members:
            continue
        for b in second:
            s = DigitString.from_coeffs([a, b], sys, "float")
            X, _ = _branch_inverse_float_batch(s, test_Y)
            if not np.all(np.isfinite(X)):
                continue
            if not np.all(_in_cylinder_float(s, X)):
                continue
            labels = grid.label_of(X)
            if np.all(np.isin(labels, list(members))):
                return [list(a), list(b)]
    return None


def verify_finite_range(
    sys: CFSystem,
    report: DecompositionReport,
    depth: int,
    samples: int,
    grid_res: int | None = None,
    reps_per_component: int = 12,
    seed: int = 0,
    find_full: bool = True,
) -> FiniteRangeVerdict:
    """Check that every sampled ``T^{|s|} C_s`` is a union of components of ``K \\ E``.

    Raises RangeEscape when a component is split by the boundary of some
    image (i.e. that boundary passes farther than the band from E).
    """
    if not report.stabilized:
        raise BudgetExhausted("finite range verification needs a stabilized report")
    rng = np.random.default_rng(seed)
    grid_res = grid_res or (256 if sys.dim <= 2 else 48)
    grid = component_grid(report, grid_res)
    reps = grid.representatives(reps_per_component, rng)
    comp_ids = sorted(reps)
    Yall = np.concatenate([reps[c] for c in comp_ids])
    owner = np.concatenate([[c] * len(reps[c]) for c in comp_ids])
    ranges = {tuple(comp_ids)}
    strings = _sample_strings(sys, depth, samples, rng) if depth > 0 else []
    escapes = 0
    for s_coeffs in strings:
        s = DigitString.from_coeffs(s_coeffs, sys, "float")
        X, _ = _branch_inverse_float_batch(s, Yall)
        inC = np.all(np.isfinite(X), axis=1)
        inC[inC] = _in_cylinder_float(s, X[inC])
        members = []
        for c in comp_ids:
            v = inC[owner == c]
            if v.all():
                members.append(c)
            elif v.any():
                escapes += 1
                raise RangeEscape(f"image of cylinder {s_coeffs} splits component {c}")
        ranges.add(tuple(members))
    ranges = sorted(ranges, key=lambda r: (-len(r), r))
    full = {}
    if find_full:
        test_Y = np.concatenate([Yall, sys.sample_uniform(200, rng)])
        for j, r in enumerate(ranges):
            full[j] = _full_cylinder_in(sys, grid, set(r), test_Y)
    return FiniteRangeVerdict(depth, len(strings), ranges, full, escapes)


def straddle_measure(sys: CFSystem, report: DecompositionReport, m: int, samples: int = 20000, grid_res: int = 256, per_cylinder: int = 32, seed: int = 0) -> float:
    """Monte-Carlo estimate of the Lebesgue measure of rank-m cylinders meeting several components.

    Returned as a fraction of vol(K); sampled points whose cylinder is split
    across components count toward the total.
    """
    rng = np.random.default_rng(seed)
    grid = component_grid(report, grid_res)
    X = sys.sample_uniform(samples, rng)
    D, alive, _ = expand_float_batch(X, m, sys)
    ok = np.all(alive, axis=1)
    cache = {}
    straddling = 0
    Ytest = sys.sample_uniform(per_cylinder, rng)
    for row in D[ok]:
        key = row.tobytes()
        if key not in cache:
            s = DigitString.from_coeffs(row.tolist(), sys, "float")
            P, _ = _branch_inverse_float_batch(s, Ytest)
            P = P[np.all(np.isfinite(P), axis=1)]
            P = P[_in_cylinder_float(s, P)]
            labels = set(grid.label_of(P).tolist()) - {0}
            cache[key] = len(labels) > 1
        straddling += cache[key]
    return straddling / samples


def soundness_check(report: DecompositionReport, samples_per_support: int = 20, dps: int = 50, seed: int = 0) -> float:
    """Largest distance from ``T(p)`` to the next level, for points p sampled on supports inside K.

    Points are drawn in floating point, refined onto the support and mapped
    at ``dps`` digits; the distance to the nearest next-level support is
    measured at the same precision.
    """
    sys = report.system
    rng = np.random.default_rng(seed)
    worst = mpmath.mpf(0)
    from .cf import cf_step

    with mpmath.workdps(dps):
        for i in range(len(report.levels) - 1):
            nxt = [h if isinstance(h, MPHAS) else MPHAS.from_exact(h) for h in report.levels[i + 1]]
            for h in report.level_deltas()[i]:
                hm = h if isinstance(h, MPHAS) else MPHAS.from_exact(h)
                for p in _points_on(hm, sys, samples_per_support, rng):
                    _, y = cf_step(p, sys)
                    dist = min(_mp_dist(g, y) for g in nxt)
                    worst = max(worst, dist)
    return float(worst)


def _mp_dist(h: MPHAS, y) -> mpmath.mpf:
    if h.is_plane:
        nb = mpmath.sqrt(mpmath.fsum(v * v for v in h.b))
        return abs(mpmath.fsum(u * v for u, v in zip(h.b, y)) + h.gamma) / nb
    c = h.center
    r = mpmath.sqrt(h.radius_sq)
    return abs(mpmath.sqrt(mpmath.fsum((u - v) ** 2 for u, v in zip(y, c))) - r)


def _points_on(h: MPHAS, sys: CFSystem, n: int, rng) -> list:
    d = h.dim
    out = []
    tries = 0
    while len(out) < n and tries < 50 * n:
        tries += 1
        if h.is_plane:
            lo, hi = sys.bbox
            q = [mpmath.mpf(float(v)) for v in lo + (hi - lo) * rng.random(d)]
            nb2 = mpmath.fsum(v * v for v in h.b)
            s = (mpmath.fsum(u * v for u, v in zip(h.b, q)) + h.gamma) / nb2
            p = [q[j] - s * h.b[j] for j in range(d)]
        else:
            u = rng.standard_normal(d)
            u = [mpmath.mpf(float(v)) for v in u]
            nu = mpmath.sqrt(mpmath.fsum(v * v for v in u))
            c = h.center
            r = mpmath.sqrt(h.radius_sq)
            p = [c[j] + r * u[j] / nu for j in range(d)]
        pf = np.array([float(v) for v in p])
        # stay off the boundary of K and away from the origin
        N, b = sys.halfspaces
        if np.all(N @ pf < b - 1e-6) and pf @ pf > 1e-8:
            out.append(p)
    return out

"""The continued fraction map ``Tx = iota(x) - [iota(x)]`` and its expansions.

Points come in three representations and every operation accepts each:

* :class:`~iwasawa_cf.algebra.Vec` for exact arithmetic in Q(sqrt D),
* 1-D numpy arrays for fast float work,
* lists of ``mpmath.mpf`` for high-precision work.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import mpmath
import numpy as np

from . import kernels
from .algebra import InversionSpec, Vec
from .lattice import LatticeSpec, geometry, get_lattice
from .scalar import QExt, eval_qext, format_qext, qext

__all__ = [
    "CFSystem",
    "DigitString",
    "Terminated",
    "TERMINATED",
    "ZeroDenominator",
    "PointNotInCylinder",
    "EmptyCylinder",
    "PrecisionExhausted",
    "InvalidPoint",
    "cf_step",
    "expand",
    "convergent",
    "branch_inverse",
    "jacobian",
    "jacobian_fd",
    "renyi_ratio",
    "renyi_bound",
    "cylinder_diameter",
    "alpha_orbit",
    "alpha_system",
    "gauss_system",
    "perturbed_hurwitz",
    "get_system",
    "OrbitReport",
    "EndpointOrbit",
]


class ZeroDenominator(ZeroDivisionError):
    pass


class PointNotInCylinder(ValueError):
    pass


class EmptyCylinder(ValueError):
    pass


class PrecisionExhausted(ArithmeticError):
    pass


class InvalidPoint(ValueError):
    pass


class Terminated:
    """Returned in place of a digit once the orbit reaches 0 (T(0) = 0)."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "TERMINATED"

    def __bool__(self):
        return False


TERMINATED = Terminated()


def _exact_scalar(v):
    if isinstance(v, QExt):
        return v
    if isinstance(v, (int, Fraction)):
        return qext(v)
    if isinstance(v, str):
        return eval_qext(v)
    return qext(Fraction(str(v)))


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CFSystem:
    """A lattice, its inversion, and a fundamental domain K.

    ``domain_kind='dirichlet'`` uses the Dirichlet region with nearest-point
    rounding.  ``'box'`` uses the box ``lo + (0,1]^d`` (``closed_side='upper'``)
    or ``lo + [0,1)^d`` (``'lower'``) and needs the standard lattice Z^d.
    """

    lattice: LatticeSpec
    domain_kind: str = "dirichlet"
    offsets: tuple = ()
    closed_side: str = "upper"
    name: str = ""

    def __post_init__(self):
        if self.domain_kind not in ("dirichlet", "box"):
            raise ValueError(f"unknown domain kind {self.domain_kind!r}")
        if self.domain_kind == "box":
            d = self.lattice.dim
            ident = [[1 if i == j else 0 for j in range(d)] for i in range(d)]
            if [[c for c in g] for g in self.lattice.generators] != ident:
                raise ValueError("box domains need the standard lattice Z^d")
            if len(self.offsets) != d:
                raise ValueError(f"box needs {d} offsets")
            if self.closed_side not in ("upper", "lower"):
                raise ValueError(self.closed_side)
            object.__setattr__(self, "offsets", tuple(_exact_scalar(v) for v in self.offsets))
        if not self.name:
            object.__setattr__(self, "name", self.lattice.name if self.domain_kind == "dirichlet" else f"{self.lattice.name}-box")

    @classmethod
    def dirichlet(cls, L: LatticeSpec | str) -> "CFSystem":
        L = get_lattice(L) if isinstance(L, str) else L
        return cls(L)

    @classmethod
    def box(cls, L: LatticeSpec | str, lo, closed_side: str = "upper", name: str = "") -> "CFSystem":
        L = get_lattice(L) if isinstance(L, str) else L
        return cls(L, "box", tuple(lo), closed_side, name)

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def inversion(self) -> InversionSpec:
        return self.lattice.inversion

    @property
    def is_box(self) -> bool:
        return self.domain_kind == "box"

    @cached_property
    def geo(self):
        return geometry(self.lattice)

    @cached_property
    def O(self) -> np.ndarray:
        return self.inversion.twist_float()

    @cached_property
    def Oinv(self) -> np.ndarray:
        return self.O.T.copy()

    @cached_property
    def lo_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.offsets]) if self.is_box else np.zeros(self.dim)

    @cached_property
    def rad_sq_float(self) -> float:
        if self.is_box:
            lo = self.lo_float
            return float(np.sum(np.maximum(lo ** 2, (lo + 1) ** 2)))
        return float(self.geo.region.rad_sq)

    @cached_property
    def params(self) -> kernels.TMapParams:
        geo = self.geo
        if self.is_box:
            mode = kernels.MODE_BOX_UPPER if self.closed_side == "upper" else kernels.MODE_BOX_LOWER
            d = self.dim
            rel = np.zeros((1, d))
            relc = np.zeros((1, d), np.int64)
            return kernels.TMapParams(self.O, mode, self.lo_float, np.eye(d), np.eye(d), rel, relc)
        return kernels.TMapParams(
            self.O, kernels.MODE_DIRICHLET, np.zeros(self.dim), geo.Bf, geo.Binvf, geo.relevant_float, geo.relevant_coeffs
        )

    # -- domain geometry (float) ------------------------------------------------------
    @cached_property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if self.is_box:
            return self.lo_float.copy(), self.lo_float + 1.0
        V = self.geo.region.vertices_float
        V = np.asarray(V if not callable(V) else V())
        return V.min(axis=0), V.max(axis=0)

    @cached_property
    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """Closure of K as ``{x : N x <= b}`` in floats."""
        d = self.dim
        if self.is_box:
            I = np.eye(d)
            return np.vstack([I, -I]), np.concatenate([self.lo_float + 1.0, -self.lo_float])
        normals = self.geo.region.facet_normals()
        N = np.array([r.to_float() for r in normals])
        b = np.array([float(r.norm_sq()) / 2 for r in normals])
        return N, b

    def contains_float(self, X: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        N, b = self.halfspaces
        return np.all(np.atleast_2d(X) @ N.T <= b + tol, axis=1)

    def contains(self, x) -> bool:
        """Membership in K, respecting which boundary pieces belong to K."""
        if isinstance(x, Vec):
            if self.is_box:
                for xi, lo in zip(x, self.offsets):
                    t = xi - lo
                    if self.closed_side == "upper" and not (t > 0 and t <= 1):
                        return False
                    if self.closed_side == "lower" and not (t >= 0 and t < 1):
                        return False
                return True
            return geometry(self.lattice).nearest_exact(x)[0].is_zero()
        if _is_mp(x):
            _, digit = _round_mp(x, self)
            return all(c == 0 for c in digit)
        return bool(np.all(_round_float(np.asarray(x, dtype=float)[None, :], self)[0] == 0))

    def sample_uniform(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples from K by rejection from its bounding box."""
        lo, hi = self.bbox
        out = []
        got = 0
        while got < n:
            X = lo + (hi - lo) * rng.random((max(2 * (n - got), 64), self.dim))
            X = X[self.contains_float(X, tol=0.0)]
            out.append(X)
            got += len(X)
        return np.concatenate(out)[:n]

    def to_json(self) -> dict:
        out = {"name": self.name, "lattice": self.lattice.name, "domain_kind": self.domain_kind}
        if self.is_box:
            out["offsets"] = [format_qext(v) for v in self.offsets]
            out["closed_side"] = self.closed_side
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "CFSystem":
        if obj.get("domain_kind") == "box":
            lo = [qext(v) for v in obj["offsets"]]
            return cls.box(obj["lattice"], lo, obj.get("closed_side", "upper"), name=obj.get("name", ""))
        return cls.dirichlet(obj["lattice"])


def alpha_system(alpha, variant: str = "one_over_x") -> CFSystem:
    """The alpha-CF on (-alpha, 1-alpha] with iota(x) = 1/x or -1/x."""
    if variant not in ("one_over_x", "minus_one_over_x"):
        raise ValueError(f"unknown variant {variant!r}")
    a = _exact_scalar(alpha)
    if not (a > 0 and a < 1):
        raise ValueError("alpha must lie in (0, 1)")
    L = get_lattice("z" if variant == "one_over_x" else "z_neg")
    return CFSystem.box(L, (-a,), "upper", name=f"alpha-{variant}")


def gauss_system() -> CFSystem:
    """The regular continued fraction (Gauss) map on [0, 1)."""
    return CFSystem.box(get_lattice("z"), (0,), "lower", name="gauss")


def perturbed_hurwitz(shift=Fraction(1, 100), axis: int = 1) -> CFSystem:
    """Hurwitz system with the square K shifted by ``shift`` along ``axis``."""
    lo = [Fraction(-1, 2), Fraction(-1, 2)]
    lo[axis] += _exact_scalar(shift).rat
    return CFSystem.box(get_lattice("hurwitz"), lo, "upper", name=f"hurwitz-shift-{shift}")


def get_system(name: str, offsets=None) -> CFSystem:
    """Resolve a system name: a catalog lattice, ``gauss``, or ``alpha:<value>[:minus]``.

    ``offsets`` (a sequence) turns a lattice into a box system with
    ``lo = -1/2 + offsets``.
    """
    if name == "gauss":
        return gauss_system()
    if name.startswith("alpha:"):
        parts = name.split(":")
        variant = "minus_one_over_x" if len(parts) > 2 and parts[2].startswith("minus") else "one_over_x"
        return alpha_system(parts[1], variant)
    L = get_lattice(name)
    if offsets is None:
        return CFSystem.dirichlet(L)
    offs = [_exact_scalar(v) for v in offsets]
    if len(offs) != L.dim:
        raise ValueError(f"{name} needs {L.dim} offsets")
    return CFSystem.box(L, [qext(Fraction(-1, 2)) + o for o in offs], "upper", name=f"{name}-offset")


# ---------------------------------------------------------------------------
# one step
# ---------------------------------------------------------------------------


def _is_mp(x) -> bool:
    return isinstance(x, (list, tuple)) and len(x) > 0 and isinstance(x[0], mpmath.mpf)


def _twist_mp(sys: CFSystem):
    return [[c.to_mpf() for c in row] for row in sys.inversion.twist]


def _iota(x, sys: CFSystem):
    if isinstance(x, Vec):
        n = x.norm_sq()
        return sys.inversion.apply_twist(x) * n.inverse()
    if _is_mp(x):
        n = mpmath.fsum(v * v for v in x)
        T = _twist_mp(sys)
        return [mpmath.fsum(m * c for m, c in zip(row, x)) / n for row in T]
    x = np.asarray(x, dtype=float)
    return sys.O @ x / (x @ x)


def _iota_inv(w, sys: CFSystem):
    """Inverse of iota: ``O^T w / |w|^2``."""
    if isinstance(w, Vec):
        n = w.norm_sq()
        if not n:
            raise ZeroDenominator("inversion of 0")
        T = sys.inversion.twist
        d = w.dim
        coords = [sum((T[j][i] * w[j] for j in range(d)), QExt(0)) for i in range(d)]
        return Vec(coords) * n.inverse()
    if _is_mp(w):
        n = mpmath.fsum(v * v for v in w)
        if n == 0:
            raise ZeroDenominator("inversion of 0")
        T = _twist_mp(sys)
        d = len(w)
        return [mpmath.fsum(T[j][i] * w[j] for j in range(d)) / n for i in range(d)]
    w = np.asarray(w, dtype=float)
    n = w @ w
    if n == 0:
        raise ZeroDenominator("inversion of 0")
    return sys.Oinv @ w / n


def _round_exact(y: Vec, sys: CFSystem) -> tuple[Vec, tuple[int, ...]]:
    if not sys.is_box:
        return sys.geo.nearest_exact(y)
    coeffs = []
    for yi, lo in zip(y, sys.offsets):
        t = yi - lo
        coeffs.append((t - 1).ceil() if sys.closed_side == "upper" else t.floor())
    return Vec(coeffs), tuple(coeffs)


def _round_float(Y: np.ndarray, sys: CFSystem) -> np.ndarray:
    if not sys.is_box:
        return sys.geo.nearest_coeffs_float(Y)
    if sys.closed_side == "upper":
        return np.ceil(Y - sys.lo_float - 1.0).astype(np.int64)
    return np.floor(Y - sys.lo_float).astype(np.int64)


def _round_mp(y: list, sys: CFSystem) -> tuple[list, tuple[int, ...]]:
    d = len(y)
    if sys.is_box:
        lo = [v.to_mpf() for v in sys.offsets]
        if sys.closed_side == "upper":
            c = [int(mpmath.ceil(y[j] - lo[j] - 1)) for j in range(d)]
        else:
            c = [int(mpmath.floor(y[j] - lo[j])) for j in range(d)]
        return [mpmath.mpf(v) for v in c], tuple(c)
    geo = sys.geo
    gens = [g.to_mpf() for g in geo.gens]
    yf = np.array([float(v) for v in y])
    if np.abs(yf).max() < 1e6:
        n = list(geo.nearest_coeffs_float(yf[None, :])[0])
    else:
        G = mpmath.matrix([[gens[i][j] for i in range(d)] for j in range(d)])
        n = [int(mpmath.floor(v + mpmath.mpf(1) / 2)) for v in mpmath.lu_solve(G, mpmath.matrix(y))]
    rel = [r.to_mpf() for r in geo.relevant]
    relc = geo.relevant_coeffs
    half = [mpmath.fsum(v * v for v in r) / 2 for r in rel]

    def point(c):
        return [mpmath.fsum(int(c[i]) * gens[i][j] for i in range(d)) for j in range(d)]

    c = point(n)
    while True:
        r = [y[j] - c[j] for j in range(d)]
        best, bval = None, mpmath.mpf(0)
        for k, v in enumerate(rel):
            t = mpmath.fsum(r[j] * v[j] for j in range(d)) - half[k]
            if t > bval:
                best, bval = k, t
        if best is None:
            break
        n = [a + int(b) for a, b in zip(n, relc[best])]
        c = point(n)
    return c, tuple(int(v) for v in n)


def cf_step(x, sys: CFSystem):
    """One application of T: returns ``(digit, Tx)``; ``(TERMINATED, x)`` at x = 0."""
    if isinstance(x, Vec):
        if x.is_zero():
            return TERMINATED, x
        y = _iota(x, sys)
        a, _ = _round_exact(y, sys)
        return a, y - a
    if _is_mp(x):
        if all(v == 0 for v in x):
            return TERMINATED, x
        y = _iota(x, sys)
        a, _ = _round_mp(y, sys)
        return a, [y[j] - a[j] for j in range(len(y))]
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        return TERMINATED, x
    Y, D, _ = kernels.tmap_batch(x[None, :], sys.params)
    a = D[0] @ sys.geo.Bf if not sys.is_box else D[0].astype(float)
    return a, Y[0]


# ---------------------------------------------------------------------------
# expansions
# ---------------------------------------------------------------------------


@dataclass
class DigitString:
    digits: list
    system: CFSystem = field(repr=False)
    coeffs: list = field(default_factory=list)

    def __len__(self):
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)

    def __add__(self, other: "DigitString") -> "DigitString":
        return DigitString(self.digits + other.digits, self.system, self.coeffs + other.coeffs)

    def to_json(self) -> list:
        return [list(map(int, c)) for c in self.coeffs]

    @classmethod
    def from_coeffs(cls, coeffs, system: CFSystem, kind: str = "exact") -> "DigitString":
        """Digits from integer coordinates in the generator basis."""
        geo = system.geo
        coeffs = [tuple(int(v) for v in c) for c in coeffs]
        if kind == "exact":
            digits = [geo.vec(c) for c in coeffs]
        elif kind == "mp":
            digits = [geo.vec(c).to_mpf() for c in coeffs]
        else:
            digits = [np.array(c, dtype=float) @ geo.Bf for c in coeffs]
        return cls(digits, system, coeffs)


def _digit_coeffs(a, sys: CFSystem) -> tuple[int, ...]:
    geo = sys.geo
    if isinstance(a, Vec):
        return geo.int_coeffs(a)
    af = np.array([float(v) for v in a])
    return tuple(int(v) for v in np.rint(geo.coeffs_float(af[None, :])[0]))


def expand(x, n: int, sys: CFSystem) -> tuple[DigitString, list]:
    """Digits ``a_1..a_m`` (m <= n, fewer on termination) and remainders ``[x, Tx, ..., T^m x]``."""
    digits, coeffs, rem = [], [], [x]
    cur = x
    for _ in range(n):
        a, cur = cf_step(cur, sys)
        if a is TERMINATED:
            break
        digits.append(a)
        coeffs.append(_digit_coeffs(a, sys))
        rem.append(cur)
    return DigitString(digits, sys, coeffs), rem


def expand_float_batch(X: np.ndarray, n: int, sys: CFSystem):
    """Vectorized float expansion: digit coefficients (N, n, d) and alive masks (N, n)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, d = X.shape
    D = np.zeros((N, n, d), np.int64)
    alive = np.zeros((N, n), bool)
    cur = X
    live = np.any(cur != 0, axis=1)
    for i in range(n):
        Y, Di, ok = kernels.tmap_batch(cur, sys.params)
        ok &= live
        D[:, i] = np.where(ok[:, None], Di, 0)
        alive[:, i] = ok
        live = ok
        cur = np.where(ok[:, None], Y, 0.0)
    return D, alive, cur


def _add(a, b):
    if isinstance(a, Vec):
        return a + b
    if _is_mp(a):
        return [u + v for u, v in zip(a, b)]
    return np.asarray(a, dtype=float) + np.asarray(b, dtype=float)


def branch_inverse(s: DigitString, y):
    """``T_s^{-1}(y)``: the point of C_s mapped to y by T^{|s|}."""
    w = y
    for a in reversed(s.digits):
        w = _iota_inv(_add(a, w), s.system)
    return w


def convergent(s: DigitString):
    """The nested value with the tail ``T^n x`` replaced by 0."""
    if len(s) == 0:
        raise ZeroDenominator("empty digit string has no convergent")
    last = s.digits[-1]
    if isinstance(last, Vec):
        zero = Vec.zero(last.dim)
    elif _is_mp(last):
        zero = [mpmath.mpf(0)] * len(last)
    else:
        zero = np.zeros(len(last))
    return branch_inverse(s, zero)


def _norm_sq(x):
    if isinstance(x, Vec):
        return x.norm_sq()
    if _is_mp(x):
        return mpmath.fsum(v * v for v in x)
    x = np.asarray(x, dtype=float)
    return float(x @ x)


def jacobian(s: DigitString, x):
    """``omega_s(T^n x) = prod_{i<n} |T^i x|^(2d)``; exact for Vec input.

    Raises PointNotInCylinder when the first |s| digits of x differ from s.
    """
    sys = s.system
    d = sys.dim
    n = len(s)
    exp_, rem = expand(x, n, sys)
    if len(exp_) < n or any(tuple(a) != tuple(b) for a, b in zip(exp_.coeffs, s.coeffs)):
        raise PointNotInCylinder("point does not lie in the cylinder of the digit string")
    prod = QExt(1) if isinstance(x, Vec) else (mpmath.mpf(1) if _is_mp(x) else 1.0)
    for r in rem[:n]:
        prod = prod * _norm_sq(r) ** d
    return prod


def jacobian_fd(s: DigitString, y, h: float = 1e-6, dps: int = 50):
    """|det D T_s^{-1}(y)| by central differences at ``dps`` digits."""
    sys = s.system
    d = sys.dim
    with mpmath.workdps(dps):
        ms = DigitString([[mpmath.mpf(float(v)) for v in a] if not isinstance(a, Vec) else a.to_mpf() for a in s.digits], sys, s.coeffs)
        y0 = [mpmath.mpf(v) if not isinstance(v, QExt) else v.to_mpf() for v in (y if not isinstance(y, np.ndarray) else y.tolist())]
        hh = mpmath.mpf(h)
        J = mpmath.matrix(d, d)
        for j in range(d):
            yp = list(y0)
            ym = list(y0)
            yp[j] += hh
            ym[j] -= hh
            fp = branch_inverse(ms, yp)
            fm = branch_inverse(ms, ym)
            for i in range(d):
                J[i, j] = (fp[i] - fm[i]) / (2 * hh)
        return abs(mpmath.det(J))


def renyi_bound(sys: CFSystem) -> float:
    """``exp(4 d rad^2 / (1 - rad^2))``; infinite when rad(K) >= 1 (no distortion bound)."""
    r2 = sys.rad_sq_float
    if r2 >= 1:
        return math.inf
    return math.exp(4 * sys.dim * r2 / (1 - r2))


def _branch_inverse_float_batch(s: DigitString, Y: np.ndarray):
    """Rows of T_s^{-1}(Y) and omega_s at each row (float)."""
    sys = s.system
    d = sys.dim
    W = np.array(Y, dtype=float)
    omega = np.ones(len(W))
    digits = [np.array(c, dtype=float) @ sys.geo.Bf if not sys.is_box else np.array(c, dtype=float) for c in s.coeffs]
    for a in reversed(digits):
        V = W + a
        n = np.einsum("nj,nj->n", V, V)
        with np.errstate(divide="ignore", invalid="ignore"):
            W = (V @ sys.Oinv.T) / n[:, None]
            omega = omega / n ** d
    return W, omega


def _in_cylinder_float(s: DigitString, X: np.ndarray) -> np.ndarray:
    n = len(s)
    if n == 0:
        return s.system.contains_float(X)
    D, alive, _ = expand_float_batch(X, n, s.system)
    want = np.array(s.coeffs, dtype=np.int64)[None, :, :]
    ok = np.all(alive, axis=1) & np.all(D == want, axis=(1, 2))
    return ok & s.system.contains_float(X, tol=1e-12)


def cylinder_samples(s: DigitString, samples: int, rng: np.random.Generator):
    """Points y of T^{|s|} C_s together with x = T_s^{-1}(y) in C_s and omega_s(y)."""
    sys = s.system
    Y = sys.sample_uniform(samples, rng)
    X, omega = _branch_inverse_float_batch(s, Y)
    good = np.all(np.isfinite(X), axis=1) & _in_cylinder_float(s, X)
    return Y[good], X[good], omega[good]


def renyi_ratio(s: DigitString, samples: int = 1000, seed: int = 0) -> float:
    """Sampled sup/inf of omega_s over the range of the cylinder."""
    if len(s) == 0:
        return 1.0
    _, _, omega = cylinder_samples(s, samples, np.random.default_rng(seed))
    if omega.size == 0:
        raise EmptyCylinder("no sample of K lies in the range of this cylinder")
    return float(omega.max() / omega.min())


def cylinder_diameter(s: DigitString, samples: int = 1000, seed: int = 0) -> float:
    """Largest pairwise distance among sampled points of C_s (a lower estimate of diam C_s)."""
    _, X, _ = cylinder_samples(s, samples, np.random.default_rng(seed))
    if len(X) < 2:
        return 0.0
    from scipy.spatial.distance import pdist

    if len(X) > 2000:
        X = X[:2000]
    return float(pdist(X).max())


# ---------------------------------------------------------------------------
# alpha-CF endpoint orbits
# ---------------------------------------------------------------------------


@dataclass
class EndpointOrbit:
    start: str
    status: str  # terminated | periodic | unresolved
    steps: int
    distinct: int
    preperiod: int | None = None
    period: int | None = None

    def to_json(self) -> dict:
        return {
            "start": self.start,
            "status": self.status,
            "steps": self.steps,
            "distinct": self.distinct,
            "preperiod": self.preperiod,
            "period": self.period,
        }


@dataclass
class OrbitReport:
    alpha: str
    variant: str
    backend: str
    endpoints: list
    precision_digits: int | None = None

    @property
    def finite(self) -> bool:
        return all(e.status in ("terminated", "periodic") for e in self.endpoints)

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "variant": self.variant,
            "backend": self.backend,
            "precision_digits": self.precision_digits,
            "finite": self.finite,
            "endpoints": [e.to_json() for e in self.endpoints],
        }


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}


def _eval_real(expr: str, ctx):
    """Evaluate a small real expression (numbers, + - * / ^, pi, e, sqrt, cbrt) in an mpmath context."""
    names = {"pi": ctx.pi, "e": ctx.e}
    funcs = {"sqrt": ctx.sqrt, "cbrt": lambda v: v ** (ctx.mpf(1) / 3), "exp": ctx.exp, "log": ctx.log}

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return ctx.mpf(str(node.value))
        if isinstance(node, ast.Name) and node.id in names:
            return names[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            left, right = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Pow) and _is_int_const(node.right):
                return left ** int(node.right.value)
            return _BINOPS[type(node.op)](left, right)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in funcs and len(node.args) == 1:
            return funcs[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression: {ast.dump(node)}")

    return ev(ast.parse(expr.replace("^", "**"), mode="eval"))


def _is_int_const(node) -> bool:
    return isinstance(node, ast.Constant) and isinstance(node.value, int)


def _try_exact(alpha):
    if isinstance(alpha, (QExt, Fraction, int)):
        return qext(alpha)
    if isinstance(alpha, str):
        try:
            return eval_qext(alpha)
        except (ValueError, ZeroDivisionError):
            return None
    return None


def _alpha_exact(a: QExt, sign: int, max_steps: int) -> list[EndpointOrbit]:
    out = []
    for x0 in (-a, 1 - a):
        seen = {x0: 0}
        x = x0
        status, pre, per = "unresolved", None, None
        steps = 0
        for steps in range(1, max_steps + 1):
            if not x:
                status = "terminated"
                steps -= 1
                break
            y = x.inverse() * sign
            x = y - (y - 1 + a).ceil()
            if x in seen:
                status, pre, per = "periodic", seen[x], steps - seen[x]
                break
            seen[x] = steps
        if status == "unresolved" and not x:
            status = "terminated"
        out.append(EndpointOrbit(format_qext(x0), status, steps, len(seen), pre, per))
    return out


def _alpha_interval(expr, sign: int, max_steps: int, dps: int, max_dps: int, threshold_digits: int):
    """Interval iteration of both endpoints, escalating precision until every state is resolved."""
    while dps <= max_dps:
        iv = mpmath.iv
        iv.dps = dps
        a = _eval_real(expr, iv) if isinstance(expr, str) else iv.mpf(expr)
        thresh = mpmath.mpf(10) ** (-threshold_digits)
        ok = True
        endpoints = []
        for label, x0 in (("-alpha", -a), ("1-alpha", 1 - a)):
            buckets = {}
            x = x0
            status, pre, per, steps = "unresolved", None, None, max_steps
            scale = 10 ** (threshold_digits // 2)
            for k in range(max_steps + 1):
                xa, xb = mpmath.mpf(x.a), mpmath.mpf(x.b)
                if xb - xa > thresh:
                    ok = False
                    break
                key = int(mpmath.floor((xa + xb) / 2 * scale))
                hit = None
                for kk in (key - 1, key, key + 1):
                    for (j, (za, zb)) in buckets.get(kk, ()):
                        if za <= xb and xa <= zb:
                            hit = j
                            break
                    if hit is not None:
                        break
                if hit is not None:
                    status, pre, per, steps = "periodic", hit, k - hit, k
                    break
                buckets.setdefault(key, []).append((k, (xa, xb)))
                if xa <= 0 <= xb:
                    if xa == 0 and xb == 0:
                        status, steps = "terminated", k
                        break
                    ok = False
                    break
                y = sign / x
                t = y - 1 + a
                lo_c, hi_c = mpmath.ceil(mpmath.mpf(t.a)), mpmath.ceil(mpmath.mpf(t.b))
                if lo_c != hi_c:
                    ok = False
                    break
                x = y - int(lo_c)
            if not ok:
                break
            distinct = sum(len(v) for v in buckets.values())
            endpoints.append(EndpointOrbit(label, status, steps, distinct, pre, per))
        if ok:
            return endpoints, dps
        dps *= 2
    raise PrecisionExhausted(f"interval widths exceed 1e-{threshold_digits} even at {max_dps} digits")


def alpha_orbit(alpha, variant: str = "one_over_x", max_steps: int = 10_000, dps: int = 300, max_dps: int = 20_000) -> OrbitReport:
    """Orbits of the endpoints -alpha and 1-alpha under the alpha-CF map.

    Rationals and quadratic surds (``"3/7"``, ``"(sqrt(5)-1)/2"``, QExt) run
    exactly with cycle detection.  Anything else (``"2^(1/3)/4"``, ``"pi/8"``,
    an mpf) runs in interval arithmetic: a state counts as repeated only if
    its interval meets an earlier one, and precision doubles whenever a
    digit or a width becomes ambiguous.
    """
    if variant not in ("one_over_x", "minus_one_over_x"):
        raise ValueError(f"unknown variant {variant!r}")
    sign = 1 if variant == "one_over_x" else -1
    a = _try_exact(alpha)
    if a is not None:
        if not (a > 0 and a < 1):
            raise ValueError("alpha must lie in (0, 1)")
        return OrbitReport(format_qext(a), variant, "exact", _alpha_exact(a, sign, max_steps))
    endpoints, used = _alpha_interval(alpha, sign, max_steps, dps, max_dps, threshold_digits=30)
    return OrbitReport(str(alpha), variant, "interval", endpoints, used)

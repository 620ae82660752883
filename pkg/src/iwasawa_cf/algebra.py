"""Exact vectors, division-algebra products, and inversions.

Points of R^d are :class:`Vec` instances whose coordinates are
:class:`~iwasawa_cf.scalar.QExt`.  The octonion product is Cayley-Dickson
doubling of the quaternions, ``(a, b)(c, d) = (ac - conj(d) b, d a + b conj(c))``,
with octonion coordinate ``k`` equal to Cayley-Dickson coordinate ``k``.  The
full table lives in ``docs/octonion_table.md``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .scalar import QExt, qext

__all__ = [
    "Vec",
    "InversionSpec",
    "ZeroVector",
    "DimensionMismatch",
    "invert",
    "mul_da",
    "conj_da",
    "ALGEBRA_DIMS",
]

ALGEBRA_DIMS = {"R": 1, "C": 2, "H": 4, "O": 8}


class ZeroVector(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


_Q0 = QExt(0)


class Vec:
    """Immutable exact vector."""

    __slots__ = ("coords", "_hash")

    def __init__(self, coords: Iterable):
        self.coords = tuple(qext(c) for c in coords)
        self._hash = None

    @classmethod
    def _wrap(cls, coords: tuple) -> "Vec":
        v = object.__new__(cls)
        v.coords = coords
        v._hash = None
        return v

    @classmethod
    def zero(cls, d: int) -> "Vec":
        return cls._wrap((_Q0,) * d)

    @classmethod
    def basis(cls, d: int, i: int) -> "Vec":
        c = [_Q0] * d
        c[i] = QExt(1)
        return cls._wrap(tuple(c))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def _check(self, other: "Vec"):
        if len(other.coords) != len(self.coords):
            raise DimensionMismatch(f"{len(self.coords)} vs {len(other.coords)}")

    def __add__(self, other: "Vec") -> "Vec":
        self._check(other)
        return Vec._wrap(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "Vec") -> "Vec":
        self._check(other)
        return Vec._wrap(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self) -> "Vec":
        return Vec._wrap(tuple(-a for a in self.coords))

    def __mul__(self, s) -> "Vec":
        s = qext(s)
        return Vec._wrap(tuple(a * s for a in self.coords))

    __rmul__ = __mul__

    def __truediv__(self, s) -> "Vec":
        inv = qext(s).inverse()
        return Vec._wrap(tuple(a * inv for a in self.coords))

    def dot(self, other: "Vec") -> QExt:
        self._check(other)
        acc = _Q0
        for a, b in zip(self.coords, other.coords):
            acc = acc + a * b
        return acc

    def norm_sq(self) -> QExt:
        return self.dot(self)

    def is_zero(self) -> bool:
        return not any(self.coords)

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if not isinstance(other, Vec):
            return NotImplemented
        return self.coords == other.coords

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.coords)
        return self._hash

    def __lt__(self, other: "Vec"):
        # lexicographic order on exact coordinates
        for a, b in zip(self.coords, other.coords):
            s = (a - b).sign()
            if s:
                return s < 0
        return False

    def to_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords], dtype=np.float64)

    def to_mpf(self, prec: int | None = None) -> list:
        return [c.to_mpf(prec) for c in self.coords]

    def __repr__(self):
        return "Vec(" + ", ".join(str(c) for c in self.coords) + ")"


# --- division algebras -------------------------------------------------------


def conj_da(x: Sequence) -> list:
    """Algebra conjugate: negate every imaginary coordinate."""
    return [x[0]] + [-c for c in x[1:]]


def _qmul(a: Sequence, b: Sequence) -> list:
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    return [
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ]


def _omul(x: Sequence, y: Sequence) -> list:
    a, b = x[:4], x[4:]
    c, d = y[:4], y[4:]
    ac = _qmul(a, c)
    dbar_b = _qmul(conj_da(d), b)
    da = _qmul(d, a)
    b_cbar = _qmul(b, conj_da(c))
    return [p - q for p, q in zip(ac, dbar_b)] + [p + q for p, q in zip(da, b_cbar)]


def _mul_raw(x: Sequence, y: Sequence, algebra: str) -> list:
    if algebra == "R":
        return [x[0] * y[0]]
    if algebra == "C":
        return [x[0] * y[0] - x[1] * y[1], x[0] * y[1] + x[1] * y[0]]
    if algebra == "H":
        return _qmul(x, y)
    if algebra == "O":
        return _omul(x, y)
    raise ValueError(f"unknown algebra {algebra!r}")


def mul_da(x, y, algebra: str):
    """Product in R, C, H or O.

    Works on :class:`Vec` (returns a Vec) and on plain sequences of any
    numeric type (floats, mpmath numbers), returning a list.
    """
    d = ALGEBRA_DIMS.get(algebra)
    if d is None:
        raise ValueError(f"unknown algebra {algebra!r}")
    if len(x) != d or len(y) != d:
        raise DimensionMismatch(f"algebra {algebra} needs dimension {d}, got {len(x)} and {len(y)}")
    out = _mul_raw(list(x), list(y), algebra)
    if isinstance(x, Vec):
        return Vec._wrap(tuple(out))
    return out


# --- inversions ----------------------------------------------------------------


def _diag(entries) -> tuple:
    d = len(entries)
    return tuple(tuple(qext(entries[i]) if i == j else _Q0 for j in range(d)) for i in range(d))


@dataclass(frozen=True)
class InversionSpec:
    """An inversion ``x -> twist(x)/|x|^2`` with an exactly orthogonal twist."""

    kind: str
    twist: tuple

    def __post_init__(self):
        d = len(self.twist)
        if any(len(row) != d for row in self.twist):
            raise DimensionMismatch("twist must be square")
        for i in range(d):
            for j in range(d):
                s = _Q0
                for k in range(d):
                    s = s + self.twist[k][i] * self.twist[k][j]
                if s != (1 if i == j else 0):
                    raise ValueError("twist is not orthogonal")

    @property
    def dim(self) -> int:
        return len(self.twist)

    @classmethod
    def euclidean(cls, d: int) -> "InversionSpec":
        return cls("euclidean", _diag([1] * d))

    @classmethod
    def conjugate_reciprocal(cls, d: int) -> "InversionSpec":
        """``1/z = conj(z)/|z|^2`` in a division algebra of dimension d."""
        return cls("conjugate_reciprocal", _diag([1] + [-1] * (d - 1)))

    @classmethod
    def negated_reciprocal(cls, d: int) -> "InversionSpec":
        """``-1/z``."""
        return cls("negated_reciprocal", _diag([-1] + [1] * (d - 1)))

    @classmethod
    def custom(cls, matrix) -> "InversionSpec":
        return cls("custom_orthogonal", tuple(tuple(qext(c) for c in row) for row in matrix))

    @classmethod
    def from_kind(cls, kind: str, d: int, matrix=None) -> "InversionSpec":
        if kind == "euclidean":
            return cls.euclidean(d)
        if kind == "conjugate_reciprocal":
            return cls.conjugate_reciprocal(d)
        if kind == "negated_reciprocal":
            return cls.negated_reciprocal(d)
        if kind == "custom_orthogonal":
            if matrix is None:
                raise ValueError("custom_orthogonal needs a matrix")
            return cls.custom(matrix)
        raise ValueError(f"unknown inversion kind {kind!r}")

    def is_diagonal(self) -> bool:
        d = self.dim
        return all(self.twist[i][j] == 0 for i in range(d) for j in range(d) if i != j)

    def twist_float(self) -> np.ndarray:
        return np.array([[float(c) for c in row] for row in self.twist], dtype=np.float64)

    def apply_twist(self, x: Vec) -> Vec:
        d = self.dim
        if len(x) != d:
            raise DimensionMismatch(f"inversion of dimension {d} applied to {len(x)}-vector")
        if self.is_diagonal():
            return Vec._wrap(tuple(self.twist[i][i] * x.coords[i] for i in range(d)))
        out = []
        for row in self.twist:
            acc = _Q0
            for m, c in zip(row, x.coords):
                if m:
                    acc = acc + m * c
            out.append(acc)
        return Vec._wrap(tuple(out))

    def apply_twist_any(self, x: Sequence) -> list:
        """Twist on a plain sequence of floats or mpmath numbers."""
        tw = [[float(c) for c in row] for row in self.twist]
        return [sum(m * c for m, c in zip(row, x) if m) for row in tw]

    def to_json(self) -> dict:
        return {"kind": self.kind, "twist": [[str(c) for c in row] for row in self.twist]}


def invert(x: Vec, inv: InversionSpec) -> Vec:
    """Exact ``twist(x)/|x|^2``."""
    n = x.norm_sq()
    if not n:
        raise ZeroVector("inversion of the zero vector")
    return inv.apply_twist(x) / n

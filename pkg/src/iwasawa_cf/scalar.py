"""Exact arithmetic in real quadratic fields Q(sqrt(D)).

A :class:`QExt` holds ``rat + irr * sqrt(disc)`` with ``fractions.Fraction``
parts.  Signs are decided with rational comparisons only, so every predicate
built on top of this module (distances, incidences, lattice membership) is
exact.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Rational

import mpmath

__all__ = [
    "QExt",
    "DiscriminantMismatch",
    "DivisionByZero",
    "qext",
    "qext_arith",
    "qext_sign",
    "parse_qext",
    "eval_qext",
]


class DiscriminantMismatch(ValueError):
    """Two irrational values from different fields were combined."""


class DivisionByZero(ZeroDivisionError):
    pass


def _squarefree_split(n: int) -> tuple[int, int]:
    """Return (k, m) with n = k*k*m and m square-free."""
    if n < 0:
        raise ValueError("discriminant must be nonnegative")
    if n in (0, 1):
        return 1, n
    k, m = 1, n
    p = 2
    while p * p <= m:
        while m % (p * p) == 0:
            m //= p * p
            k *= p
        p += 1
    return k, m


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


_ZERO = Fraction(0)


class QExt:
    """Immutable element ``rat + irr*sqrt(disc)`` of a real quadratic field.

    Values with ``irr == 0`` are stored with ``disc == 1`` and combine freely
    with values of any discriminant.
    """

    __slots__ = ("rat", "irr", "disc", "_hash")

    def __init__(self, rat=0, irr=0, disc: int = 1):
        rat = _as_fraction(rat)
        irr = _as_fraction(irr)
        disc = int(disc)
        k, m = _squarefree_split(disc)
        irr *= k
        if m == 1:
            rat, irr = rat + irr, Fraction(0)
        elif m == 0:
            irr = Fraction(0)
        if irr == 0:
            m = 1
        self.rat = rat
        self.irr = irr
        self.disc = m
        self._hash = None

    @classmethod
    def _new(cls, rat: Fraction, irr: Fraction, disc: int) -> "QExt":
        # trusted fast path: parts are Fractions, disc already square-free
        obj = object.__new__(cls)
        obj.rat = rat
        if irr:
            obj.irr = irr
            obj.disc = disc
        else:
            obj.irr = _ZERO
            obj.disc = 1
        obj._hash = None
        return obj

    # -- construction helpers -------------------------------------------------
    @classmethod
    def sqrt(cls, n: int) -> "QExt":
        return cls(0, 1, n)

    @property
    def is_rational(self) -> bool:
        return self.irr == 0

    def _coerce(self, other) -> "QExt | None":
        if isinstance(other, QExt):
            return other
        if isinstance(other, int):
            return QExt._new(Fraction(other), _ZERO, 1)
        if isinstance(other, Rational):
            return QExt._new(Fraction(other), _ZERO, 1)
        return None

    def _common_disc(self, other: "QExt") -> int:
        if self.irr == 0:
            return other.disc
        if other.irr == 0 or other.disc == self.disc:
            return self.disc
        raise DiscriminantMismatch(f"sqrt({self.disc}) vs sqrt({other.disc})")

    # -- arithmetic -------------------------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = self._common_disc(o)
        return QExt._new(self.rat + o.rat, self.irr + o.irr, d)

    __radd__ = __add__

    def __neg__(self):
        return QExt._new(-self.rat, -self.irr, self.disc)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = self._common_disc(o)
        return QExt._new(self.rat - o.rat, self.irr - o.irr, d)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = self._common_disc(o)
        a, b, c, e = self.rat, self.irr, o.rat, o.irr
        if b == 0 and e == 0:
            return QExt._new(a * c, _ZERO, 1)
        return QExt._new(a * c + b * e * d, a * e + b * c, d)

    __rmul__ = __mul__

    def conjugate(self) -> "QExt":
        """Galois conjugate ``rat - irr*sqrt(disc)``."""
        return QExt._new(self.rat, -self.irr, self.disc)

    def field_norm(self) -> Fraction:
        return self.rat * self.rat - self.irr * self.irr * self.disc

    def inverse(self) -> "QExt":
        if self.irr == 0:
            if self.rat == 0:
                raise DivisionByZero("division by zero in Q(sqrt(D))")
            return QExt._new(1 / self.rat, _ZERO, 1)
        n = self.field_norm()
        if n == 0:
            # rat^2 == irr^2 * D with D square-free forces both parts to vanish
            raise DivisionByZero("division by zero in Q(sqrt(D))")
        return QExt._new(self.rat / n, -self.irr / n, self.disc)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        self._common_disc(o)
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        result, base = QExt(1), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- order --------------------------------------------------------------------
    def sign(self) -> int:
        a, b = self.rat, self.irr
        if b == 0:
            return (a > 0) - (a < 0)
        sa = (a > 0) - (a < 0)
        sb = 1 if b > 0 else -1
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 with b^2 D
        diff = a * a - b * b * self.disc
        return sa if diff > 0 else sb

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.rat == o.rat and self.irr == o.irr and (self.irr == 0 or self.disc == o.disc)

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash(self.rat) if self.irr == 0 else hash((self.rat, self.irr, self.disc))
            object.__setattr__(self, "_hash", h)
        return h

    def _cmp(self, other) -> int:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return (self - o).sign()

    def __lt__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c >= 0

    def __bool__(self):
        return self.rat != 0 or self.irr != 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def floor(self) -> int:
        """Exact floor."""
        if self.irr == 0:
            return math.floor(self.rat)
        guess = math.floor(float(self))
        while QExt(guess) > self:
            guess -= 1
        while QExt(guess + 1) <= self:
            guess += 1
        return guess

    def ceil(self) -> int:
        return -((-self).floor())

    def round_half_down(self) -> int:
        """Nearest integer, ties resolved toward the smaller integer."""
        return (self - Fraction(1, 2)).ceil()

    # -- conversion ---------------------------------------------------------------
    def __float__(self):
        a, b, d = self.rat, self.irr, self.disc
        if b == 0:
            return float(a)
        if (a >= 0) == (b >= 0) or a == 0:
            return float(a) + float(b) * math.sqrt(d)
        # cancellation: a + b r = (a^2 - b^2 D) / (a - b r), denominator has no cancellation
        return float(a * a - b * b * d) / (float(a) - float(b) * math.sqrt(d))

    def to_mpf(self, prec: int | None = None):
        """Value as an ``mpmath.mpf`` (``prec`` in bits, default: current context)."""
        if prec is None:
            return mpmath.mpf(self.rat.numerator) / self.rat.denominator + (
                mpmath.mpf(self.irr.numerator) / self.irr.denominator
            ) * mpmath.sqrt(self.disc)
        with mpmath.workprec(prec + 20):
            v = self.to_mpf()
        return v

    def __repr__(self):
        return f"QExt({format_qext(self)!r})"

    def __str__(self):
        return format_qext(self)


def qext(x) -> QExt:
    """Coerce ints, Fractions, strings, or QExt to :class:`QExt`."""
    if isinstance(x, QExt):
        return x
    if isinstance(x, str):
        return parse_qext(x)
    return QExt(x)


def qext_arith(a: QExt, b: QExt, kind: str) -> QExt:
    a, b = qext(a), qext(b)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if kind == "div":
        return a / b
    raise ValueError(f"unknown operation {kind!r}")


def qext_sign(a: QExt) -> int:
    return qext(a).sign()


def _fmt_frac(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def format_qext(a: QExt) -> str:
    """Render as ``p/q + r/s*sqrt(D)`` (the irrational term only when present)."""
    if a.irr == 0:
        return _fmt_frac(a.rat)
    sign = "+" if a.irr > 0 else "-"
    return f"{_fmt_frac(a.rat)} {sign} {_fmt_frac(abs(a.irr))}*sqrt({a.disc})"


_TERM = re.compile(
    r"""^(?:
        (?P<num>\d+(?:/\d+)?)(?:\*sqrt\((?P<d1>\d+)\))?(?:/(?P<den>\d+))?
      | sqrt\((?P<d2>\d+)\)(?:/(?P<den2>\d+))?
    )$""",
    re.X,
)


def parse_qext(text: str) -> QExt:
    """Parse the textual form produced by :func:`format_qext`.

    Also accepts shorthands such as ``sqrt(3)/2``, ``-1/2*sqrt(2)`` and
    ``1/2 + sqrt(3)/6``.
    """
    s = text.replace(" ", "")
    if not s:
        raise ValueError("empty QExt literal")
    # split into signed terms
    terms = re.findall(r"[+-]?[^+-]+", s)
    if "".join(terms) != s:
        raise ValueError(f"cannot parse {text!r}")
    total = QExt(0)
    for t in terms:
        sgn = -1 if t.startswith("-") else 1
        body = t.lstrip("+-")
        m = _TERM.match(body)
        if not m:
            raise ValueError(f"cannot parse term {t!r} in {text!r}")
        if m.group("d2") is not None:
            val = QExt(0, Fraction(1, int(m.group("den2") or 1)), int(m.group("d2")))
        else:
            coef = Fraction(m.group("num")) / int(m.group("den") or 1)
            val = QExt(0, coef, int(m.group("d1"))) if m.group("d1") else QExt(coef)
        total = total + (val if sgn > 0 else -val)
    return total


def eval_qext(text: str) -> QExt:
    """Exact value of an arithmetic expression over Q(sqrt D).

    Accepts integers, decimals, ``+ - * /``, integer powers and ``sqrt(n)``,
    e.g. ``"(sqrt(5)-1)/2"`` or ``"0.01"``; raises ValueError otherwise
    (for instance on ``pi`` or a cube root).
    """
    import ast

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return QExt(Fraction(str(node.value)))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                    raise ValueError("only integer powers are exact")
                return ev(node.left) ** node.right.value
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                return a / b
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id == "sqrt"
            and len(node.args) == 1
        ):
            v = ev(node.args[0])
            if not v.is_rational or v.rat.denominator != 1 or v.rat < 0:
                raise ValueError("sqrt needs a nonnegative integer")
            return QExt.sqrt(int(v.rat))
        raise ValueError(f"not an exact expression: {text!r}")

    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {text!r}") from exc
    return ev(tree)

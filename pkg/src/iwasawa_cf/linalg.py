"""Small exact linear algebra over QExt / Fraction, and integer row reduction."""
from __future__ import annotations

from fractions import Fraction
from math import gcd

__all__ = ["SingularMatrix", "solve_exact", "inverse_exact", "det_exact", "integer_echelon"]


class SingularMatrix(ValueError):
    pass


def _forward(M, rhs_cols):
    """Gaussian elimination on an augmented copy; returns (rows, det sign/product)."""
    n = len(M)
    A = [list(M[i]) + [col[i] for col in rhs_cols] for i in range(n)]
    det = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c]), None)
        if piv is None:
            raise SingularMatrix("matrix is singular")
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        p = A[c][c]
        det = det * p
        inv = 1 / p
        A[c] = [v * inv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c]:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return A, det


def solve_exact(M, rhs):
    """Solve ``M y = rhs`` exactly (entries support +, -, *, / and truthiness)."""
    n = len(M)
    if n == 0:
        return []
    A, _ = _forward(M, [rhs])
    return [A[i][n] for i in range(n)]


def inverse_exact(M):
    n = len(M)
    ident = [[1 if i == j else 0 for i in range(n)] for j in range(n)]
    A, _ = _forward(M, ident)
    return [[A[i][n + j] for j in range(n)] for i in range(n)]


def det_exact(M):
    try:
        _, det = _forward(M, [])
    except SingularMatrix:
        return 0
    return det


def integer_echelon(rows: list[list[int]]) -> list[list[int]]:
    """Row echelon form over Z (unimodular row operations only).

    The nonzero rows span the same Z-module as the input; for a full-rank
    module of rank d the product of the pivots is its index in Z^d.
    """
    A = [list(map(int, r)) for r in rows if any(r)]
    if not A:
        return []
    ncol = len(A[0])
    out = []
    for c in range(ncol):
        # Euclid on column c among the remaining rows
        while True:
            nz = [r for r in A if r[c] != 0]
            if len(nz) <= 1:
                break
            nz.sort(key=lambda r: abs(r[c]))
            p = nz[0]
            for r in nz[1:]:
                q = r[c] // p[c]
                for k in range(ncol):
                    r[k] -= q * p[k]
            A = [r for r in A if any(r)]
        piv = next((r for r in A if r[c] != 0), None)
        if piv is None:
            continue
        if piv[c] < 0:
            piv[:] = [-v for v in piv]
        out.append(piv)
        A = [r for r in A if r is not piv]
    return out


def lcm_denominators(values) -> int:
    m = 1
    for v in values:
        den = Fraction(v).denominator
        m = m * den // gcd(m, den)
    return m

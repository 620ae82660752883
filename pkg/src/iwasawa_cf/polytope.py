"""Exact convex polytopes ``{x : a_k . x <= b_k}`` with QExt data.

Projection onto the polytope is solved by active-set enumeration: floating
point screens the candidate active sets, and the chosen one is then
verified exactly through its KKT conditions, so returned distances are exact.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .algebra import Vec
from .linalg import SingularMatrix, solve_exact
from .scalar import QExt, qext

__all__ = ["Polytope"]

_TOL = 1e-9


class Polytope:
    def __init__(self, normals: list[Vec], offsets: list, max_active: int | None = None):
        if not normals:
            raise ValueError("polytope needs at least one inequality")
        self.normals = list(normals)
        self.offsets = [qext(b) for b in offsets]
        self.dim = normals[0].dim
        self.A = np.array([a.to_float() for a in self.normals])
        self.b = np.array([float(b) for b in self.offsets])
        self._gram = [[a.dot(c) for c in self.normals] for a in self.normals]
        m = len(self.normals)
        kmax = min(self.dim, m) if max_active is None else min(max_active, m)
        self._groups = []
        for k in range(1, kmax + 1):
            subs, invs = [], []
            for S in combinations(range(m), k):
                AS = self.A[list(S)]
                Q = AS @ AS.T
                if np.linalg.matrix_rank(Q, tol=1e-10) < k:
                    continue
                subs.append(S)
                invs.append(np.linalg.inv(Q))
            if subs:
                self._groups.append((np.array(subs), np.array(invs)))
        self._vertices = None

    # -- membership ---------------------------------------------------------------
    def contains(self, p: Vec) -> bool:
        return all((a.dot(p) - b).sign() <= 0 for a, b in zip(self.normals, self.offsets))

    def contains_float(self, P: np.ndarray, tol: float = 0.0) -> np.ndarray:
        P = np.atleast_2d(P)
        return np.all(P @ self.A.T <= self.b + tol, axis=1)

    # -- projection -----------------------------------------------------------------
    def _float_candidates(self, pf: np.ndarray):
        """Active sets whose float KKT point is (nearly) valid, nearest first."""
        out = []
        if np.all(self.A @ pf <= self.b + _TOL):
            out.append((0.0, ()))
        for subs, invs in self._groups:
            AS = self.A[subs]  # (n, k, d)
            r = np.einsum("nkd,d->nk", AS, pf) - self.b[subs]
            lam = np.einsum("nkl,nl->nk", invs, r)
            x = pf[None, :] - np.einsum("nk,nkd->nd", lam, AS)
            ok = np.all(lam >= -_TOL, axis=1) & np.all(x @ self.A.T <= self.b + _TOL, axis=1)
            for idx in np.nonzero(ok)[0]:
                out.append((float(np.sum((x[idx] - pf) ** 2)), tuple(int(t) for t in subs[idx])))
        out.sort(key=lambda t: t[0])
        return out

    def _verify(self, p: Vec, S: tuple):
        if not S:
            return (p, QExt(0)) if self.contains(p) else None
        M = [[self._gram[i][j] for j in S] for i in S]
        rhs = [self.normals[i].dot(p) - self.offsets[i] for i in S]
        try:
            lam = solve_exact(M, rhs)
        except SingularMatrix:
            return None
        if any(l.sign() < 0 for l in lam):
            return None
        x = p
        for l, i in zip(lam, S):
            if l:
                x = x - self.normals[i] * l
        if not self.contains(x):
            return None
        diff = p - x
        return x, diff.norm_sq()

    def project(self, p: Vec) -> tuple[Vec, QExt]:
        """Nearest point of the polytope to ``p`` and the exact squared distance."""
        pf = p.to_float()
        tried = set()
        for _, S in self._float_candidates(pf):
            tried.add(S)
            res = self._verify(p, S)
            if res is not None:
                return res
        # exhaustive exact fallback
        for k in range(0, min(self.dim, len(self.normals)) + 1):
            for S in combinations(range(len(self.normals)), k):
                if S in tried:
                    continue
                res = self._verify(p, S)
                if res is not None:
                    return res
        raise RuntimeError("projection failed: polytope may be empty")

    def dist_sq(self, p: Vec) -> QExt:
        return self.project(p)[1]

    # -- vertices -------------------------------------------------------------------
    def vertices(self) -> list[Vec]:
        """All vertices, by intersecting every d-subset of facet hyperplanes."""
        if self._vertices is not None:
            return self._vertices
        d = self.dim
        m = len(self.normals)
        found = {}
        combos = np.array(list(combinations(range(m), d)))
        if len(combos) == 0:
            self._vertices = []
            return []
        AS = self.A[combos]
        dets = np.linalg.det(AS)
        good = np.abs(dets) > 1e-10
        combos, AS = combos[good], AS[good]
        xs = np.linalg.solve(AS, self.b[combos][..., None])[..., 0]
        feas = np.all(xs @ self.A.T <= self.b + 1e-7, axis=1)
        for S in combos[feas]:
            M = [[self.normals[i].coords[j] for j in range(d)] for i in S]
            try:
                x = Vec(solve_exact(M, [self.offsets[i] for i in S]))
            except SingularMatrix:
                continue
            if x not in found and self.contains(x):
                found[x] = None
        self._vertices = sorted(found)
        return self._vertices

    def vertices_float(self) -> np.ndarray:
        return np.array([v.to_float() for v in self.vertices()])

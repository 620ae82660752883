"""Hot numeric loops, each with a numba build and a pure-numpy fallback.

The backend is chosen by the ``IWACF_BACKEND`` environment variable
(``numba`` or ``numpy``); without it numba is used when importable.  The
numba versions are the plain-Python loop bodies below compiled with
``njit``; the numpy versions are vectorized rewrites, since an uncompiled
per-point Python loop would be far too slow for orbit and Ulam work.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

__all__ = [
    "HAVE_NUMBA",
    "get_backend",
    "set_backend",
    "enumerate_ellipsoid",
    "nearest_coeffs",
    "TMapParams",
    "tmap_batch",
    "birkhoff_histogram",
    "band_mask",
]


def _initial_backend() -> str:
    flag = os.environ.get("IWACF_BACKEND", "").strip().lower()
    if flag in ("numpy", "python", "off", "0"):
        return "numpy"
    if flag == "numba" and not HAVE_NUMBA:
        raise RuntimeError("IWACF_BACKEND=numba but numba is not importable")
    return "numba" if HAVE_NUMBA else "numpy"


_backend = _initial_backend()


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Switch backend at runtime (used by the benchmarks and tests)."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(name)
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    _backend = name


def _njit(fn, inline: bool = False):
    if not HAVE_NUMBA:
        return fn
    # per-point helpers are inlined: a real call costs a refcount round trip per array argument
    return numba.njit(cache=True, nogil=True, inline="always" if inline else "never")(fn)


# ---------------------------------------------------------------------------
# Ellipsoid enumeration (Fincke-Pohst) in lattice-coefficient space
# ---------------------------------------------------------------------------


def _fp_enum_loop(R, c, rsq, cap):
    d = R.shape[0]
    out = np.empty((cap, d), np.int64)
    cnt = 0
    n = np.zeros(d, np.int64)
    hi = np.zeros(d, np.int64)
    ctr = np.zeros(d)
    partial = np.zeros(d + 1)
    i = d - 1
    # set up the top level
    s = 0.0
    ctr[i] = c[i]
    hw = math.sqrt(max(rsq, 0.0)) / R[i, i]
    n[i] = int(math.ceil(ctr[i] - hw - 1e-9))
    hi[i] = int(math.floor(ctr[i] + hw + 1e-9))
    while True:
        if n[i] > hi[i]:
            i += 1
            if i == d:
                break
            n[i] += 1
            continue
        v = R[i, i] * (n[i] - ctr[i])
        partial[i] = partial[i + 1] + v * v
        if partial[i] > rsq + 1e-9 * (1.0 + rsq):
            n[i] += 1
            continue
        if i == 0:
            if cnt == cap:
                return out, -1
            for j in range(d):
                out[cnt, j] = n[j]
            cnt += 1
            n[0] += 1
            continue
        i -= 1
        s = 0.0
        for j in range(i + 1, d):
            s += R[i, j] * (n[j] - c[j])
        ctr[i] = c[i] - s / R[i, i]
        hw = math.sqrt(max(rsq - partial[i + 1], 0.0)) / R[i, i]
        n[i] = int(math.ceil(ctr[i] - hw - 1e-9))
        hi[i] = int(math.floor(ctr[i] + hw + 1e-9))
    return out[:cnt], cnt


_fp_enum_nb = _njit(_fp_enum_loop)


def enumerate_ellipsoid(R: np.ndarray, center: np.ndarray, radius_sq: float) -> np.ndarray:
    """Integer vectors n with ``|R (n - center)|^2 <= radius_sq`` (small float slack).

    ``R`` is the upper-triangular Cholesky factor of the Gram matrix, so the
    result is every lattice point within ``sqrt(radius_sq)`` of the point with
    coefficients ``center``.  Callers needing exactness filter afterwards.
    """
    R = np.ascontiguousarray(R, dtype=np.float64)
    center = np.ascontiguousarray(center, dtype=np.float64)
    fn = _fp_enum_nb if _backend == "numba" else _fp_enum_loop
    cap = 1024
    while True:
        out, cnt = fn(R, center, float(radius_sq), cap)
        if cnt >= 0:
            return out
        cap *= 4


# ---------------------------------------------------------------------------
# Nearest lattice point with lexicographic tie-breaking
# ---------------------------------------------------------------------------


def _relhalf(rel):
    m, d = rel.shape
    out = np.empty(m)
    for k in range(m):
        s = 0.0
        for j in range(d):
            s += rel[k, j] * rel[k, j]
        out[k] = 0.5 * s
    return out


def _nearest_one(x, B, Binv, rel, relcoef, relhalf, n, y, cpt, cand):
    """Nearest lattice point to ``x``: coefficients into ``n``, residual ``x - nB`` into ``y``."""
    d = x.shape[0]
    m = rel.shape[0]
    scale = 0.0
    for j in range(d):
        scale += abs(x[j])
    tol = 1e-13 * (1.0 + scale)
    for j in range(d):
        s = 0.0
        for i in range(d):
            s += x[i] * Binv[i, j]
        n[j] = int(math.ceil(s - 0.5))
    for j in range(d):
        s = 0.0
        for i in range(d):
            s += n[i] * B[i, j]
        y[j] = x[j] - s
    for _ in range(10000):
        best = -1
        bv = tol
        for k in range(m):
            t = -relhalf[k]
            for j in range(d):
                t += y[j] * rel[k, j]
            if t > bv:
                bv = t
                best = k
        if best < 0:
            break
        for j in range(d):
            y[j] -= rel[best, j]
            n[j] += relcoef[best, j]
    # tie-break: walk to lexicographically smaller equidistant neighbours
    # until none is left (a linear order has no local minima on the tie face)
    for _ in range(1000):
        for j in range(d):
            cpt[j] = x[j] - y[j]
        bestk = -1
        for k in range(m):
            t = -relhalf[k]
            for j in range(d):
                t += y[j] * rel[k, j]
            if t > -tol:
                for j in range(d):
                    cand[j] = x[j] - y[j] + rel[k, j]
                less = False
                for j in range(d):
                    diff = cand[j] - cpt[j]
                    if diff < -tol:
                        less = True
                        break
                    if diff > tol:
                        break
                if less:
                    for j in range(d):
                        cpt[j] = cand[j]
                    bestk = k
        if bestk < 0:
            break
        for j in range(d):
            n[j] += relcoef[bestk, j]
            y[j] -= rel[bestk, j]


def _nearest_loop(X, B, Binv, rel, relcoef):
    N, d = X.shape
    out = np.empty((N, d), np.int64)
    relhalf = _relhalf(rel)
    n = np.empty(d, np.int64)
    y = np.empty(d)
    cpt = np.empty(d)
    cand = np.empty(d)
    for p in range(N):
        _nearest_one(X[p], B, Binv, rel, relcoef, relhalf, n, y, cpt, cand)
        for j in range(d):
            out[p, j] = n[j]
    return out


_relhalf = _njit(_relhalf, inline=True)
_nearest_one = _njit(_nearest_one, inline=True)
_nearest_nb = _njit(_nearest_loop)


def _nearest_numpy(X, B, Binv, rel, relcoef):
    relhalf = 0.5 * np.einsum("kj,kj->k", rel, rel)
    tol = 1e-13 * (1.0 + np.abs(X).sum(axis=1))
    n = np.ceil(X @ Binv - 0.5).astype(np.int64)
    y = X - n @ B
    active = np.ones(len(X), dtype=bool)
    for _ in range(10000):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        t = y[idx] @ rel.T - relhalf
        best = np.argmax(t, axis=1)
        gain = t[np.arange(idx.size), best]
        move = gain > tol[idx]
        active[idx[~move]] = False
        mi = idx[move]
        y[mi] -= rel[best[move]]
        n[mi] += relcoef[best[move]]
    for _ in range(1000):
        t = y @ rel.T - relhalf
        base = X - y
        cpt = base.copy()
        choice = np.full(len(X), -1)
        for k in range(len(rel)):
            tie = t[:, k] > -tol
            if not tie.any():
                continue
            cand = base + rel[k]
            diff = cand - cpt
            # first coordinate where they differ beyond tolerance decides
            sig = np.abs(diff) > tol[:, None]
            first = np.where(sig.any(axis=1), sig.argmax(axis=1), -1)
            less = (first >= 0) & (diff[np.arange(len(X)), np.maximum(first, 0)] < 0)
            upd = tie & less
            cpt[upd] = cand[upd]
            choice[upd] = k
        sel = choice >= 0
        if not sel.any():
            break
        n[sel] += relcoef[choice[sel]]
        y[sel] -= rel[choice[sel]]
    return n


def nearest_coeffs(X, B, Binv, rel, relcoef) -> np.ndarray:
    """Lattice coefficients of the nearest lattice point to each row of ``X``.

    ``B`` holds the generators as rows, ``rel`` the Voronoi-relevant vectors
    (ambient coordinates) and ``relcoef`` their integer coefficients.  Ties are
    resolved toward the lexicographically smallest lattice point.
    """
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    args = (
        X,
        np.ascontiguousarray(B, dtype=np.float64),
        np.ascontiguousarray(Binv, dtype=np.float64),
        np.ascontiguousarray(rel, dtype=np.float64),
        np.ascontiguousarray(relcoef, dtype=np.int64),
    )
    if _backend == "numba":
        return _nearest_nb(*args)
    return _nearest_numpy(*args)


# ---------------------------------------------------------------------------
# The CF map T on float points
# ---------------------------------------------------------------------------

MODE_DIRICHLET, MODE_BOX_UPPER, MODE_BOX_LOWER = 0, 1, 2


class TMapParams:
    """Float data describing ``Tx = iota(x) - [iota(x)]`` for the kernels.

    ``mode`` selects nearest-point rounding (Dirichlet K) or box rounding
    onto ``lo + (0,1]^d`` (upper) / ``lo + [0,1)^d`` (lower).
    """

    def __init__(self, O, mode, lo, B, Binv, rel, relcoef):
        self.O = np.ascontiguousarray(O, dtype=np.float64)
        self.mode = int(mode)
        self.lo = np.ascontiguousarray(lo, dtype=np.float64)
        self.B = np.ascontiguousarray(B, dtype=np.float64)
        self.Binv = np.ascontiguousarray(Binv, dtype=np.float64)
        self.rel = np.ascontiguousarray(rel, dtype=np.float64)
        self.relcoef = np.ascontiguousarray(relcoef, dtype=np.int64)
        self.relhalf = 0.5 * np.einsum("kj,kj->k", self.rel, self.rel)

    @property
    def dim(self) -> int:
        return self.O.shape[0]

    def args(self):
        return (self.O, self.mode, self.lo, self.B, self.Binv, self.rel, self.relcoef, self.relhalf)


def _tmap_one(x, O, mode, lo, B, Binv, rel, relcoef, relhalf, n, y, cpt, cand, w, out):
    d = x.shape[0]
    r2 = 0.0
    for j in range(d):
        r2 += x[j] * x[j]
    if r2 == 0.0:
        for j in range(d):
            out[j] = 0.0
            n[j] = 0
        return False
    for i in range(d):
        s = 0.0
        for j in range(d):
            s += O[i, j] * x[j]
        w[i] = s / r2
    if mode == 0:
        _nearest_one(w, B, Binv, rel, relcoef, relhalf, n, y, cpt, cand)
        for j in range(d):
            out[j] = y[j]
    elif mode == 1:
        for j in range(d):
            a = math.ceil(w[j] - lo[j] - 1.0)
            n[j] = int(a)
            out[j] = w[j] - a
    else:
        for j in range(d):
            a = math.floor(w[j] - lo[j])
            n[j] = int(a)
            out[j] = w[j] - a
    return True


_tmap_one = _njit(_tmap_one, inline=True)


def _tmap_loop(X, O, mode, lo, B, Binv, rel, relcoef, relhalf):
    N, d = X.shape
    Y = np.empty((N, d))
    D = np.empty((N, d), np.int64)
    ok = np.empty(N, np.bool_)
    n = np.empty(d, np.int64)
    y = np.empty(d)
    cpt = np.empty(d)
    cand = np.empty(d)
    w = np.empty(d)
    out = np.empty(d)
    for p in range(N):
        ok[p] = _tmap_one(X[p], O, mode, lo, B, Binv, rel, relcoef, relhalf, n, y, cpt, cand, w, out)
        for j in range(d):
            Y[p, j] = out[j]
            D[p, j] = n[j]
    return Y, D, ok


_tmap_nb = _njit(_tmap_loop)


def _tmap_numpy(X, O, mode, lo, B, Binv, rel, relcoef, relhalf):
    r2 = np.einsum("nj,nj->n", X, X)
    ok = r2 > 0
    W = np.zeros_like(X)
    W[ok] = (X[ok] @ O.T) / r2[ok, None]
    if mode == 0:
        D = _nearest_numpy(W, B, Binv, rel, relcoef)
        Y = W - D @ B
    elif mode == 1:
        A = np.ceil(W - lo - 1.0)
        D = A.astype(np.int64)
        Y = W - A
    else:
        A = np.floor(W - lo)
        D = A.astype(np.int64)
        Y = W - A
    Y[~ok] = 0.0
    D[~ok] = 0
    return Y, D, ok


def tmap_batch(X: np.ndarray, params: TMapParams):
    """Apply T to each row of X: returns (images, digit coefficients, nonzero mask)."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    if _backend == "numba":
        return _tmap_nb(X, *params.args())
    return _tmap_numpy(X, *params.args())


# ---------------------------------------------------------------------------
# Birkhoff histogram of one long orbit
# ---------------------------------------------------------------------------


def _bin_index(x, gmin, gsize, res):
    d = x.shape[0]
    idx = 0
    for j in range(d):
        k = int(math.floor((x[j] - gmin[j]) / gsize[j]))
        if k < 0:
            k = 0
        elif k >= res[j]:
            k = res[j] - 1
        idx = idx * res[j] + k
    return idx


_bin_index = _njit(_bin_index, inline=True)


def _birkhoff_loop(x0, nsteps, burn, seed, O, mode, lo, B, Binv, rel, relcoef, relhalf, gmin, gsize, res):
    d = x0.shape[0]
    total = 1
    for j in range(d):
        total *= res[j]
    counts = np.zeros(total, np.int64)
    np.random.seed(seed)
    x = x0.copy()
    n = np.empty(d, np.int64)
    y = np.empty(d)
    cpt = np.empty(d)
    cand = np.empty(d)
    w = np.empty(d)
    out = np.empty(d)
    restarts = 0
    for step in range(nsteps + burn):
        alive = _tmap_one(x, O, mode, lo, B, Binv, rel, relcoef, relhalf, n, y, cpt, cand, w, out)
        if not alive:
            # landed on 0 (a rational point in floating point): restart generically
            restarts += 1
            for j in range(d):
                x[j] = gmin[j] + gsize[j] * res[j] * np.random.random()
            continue
        for j in range(d):
            x[j] = out[j]
        if step >= burn:
            counts[_bin_index(x, gmin, gsize, res)] += 1
    return counts, restarts


_birkhoff_nb = _njit(_birkhoff_loop)


def _birkhoff_numpy(x0, nsteps, burn, seed, O, mode, lo, B, Binv, rel, relcoef, relhalf, gmin, gsize, res, width=4096):
    d = x0.shape[0]
    rng = np.random.default_rng(seed)
    X = x0[None, :] + 1e-3 * rng.standard_normal((width, d))
    params = (O, mode, lo, B, Binv, rel, relcoef, relhalf)
    total = int(np.prod(res))
    counts = np.zeros(total, np.int64)
    restarts = 0
    steps = -(-nsteps // width)
    mult = np.cumprod(np.concatenate([[1], res[1:][::-1]]))[::-1]
    for step in range(steps + burn):
        X, _, ok = _tmap_numpy(X, *params)
        if not ok.all():
            bad = ~ok
            restarts += int(bad.sum())
            X[bad] = gmin + gsize * res * rng.random((int(bad.sum()), d))
        if step >= burn:
            K = np.clip(np.floor((X - gmin) / gsize).astype(np.int64), 0, res - 1)
            counts += np.bincount(K @ mult, minlength=total)
    return counts, restarts


def birkhoff_histogram(x0, nsteps: int, params: TMapParams, gmin, gsize, res, burn: int = 1000, seed: int = 0):
    """Visit counts of ``nsteps`` orbit points on a regular grid.

    The numba kernel follows one orbit; the numpy fallback advances a block
    of orbits in lockstep (``nsteps`` is then split across the block).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    gmin = np.asarray(gmin, dtype=np.float64)
    gsize = np.asarray(gsize, dtype=np.float64)
    res = np.asarray(res, dtype=np.int64)
    if _backend == "numba":
        return _birkhoff_nb(x0, int(nsteps), int(burn), int(seed), *params.args(), gmin, gsize, res)
    return _birkhoff_numpy(x0, int(nsteps), max(1, int(burn) // 100), int(seed), *params.args(), gmin, gsize, res)


# ---------------------------------------------------------------------------
# Exclusion bands around hyperplanes and spheres on a grid
# ---------------------------------------------------------------------------


def _band_loop(gmin, gsize, res, start, count, kind, cen, rad, halfN, halfb, band):
    """For flat cells ``start .. start+count``: 1 = inside K and clear of every HAS, 0 otherwise."""
    d = gmin.shape[0]
    out = np.zeros(count, np.uint8)
    x = np.empty(d)
    m = kind.shape[0]
    q = halfN.shape[0]
    for c in range(count):
        rem = start + c
        for j in range(d - 1, -1, -1):
            k = rem % res[j]
            rem //= res[j]
            x[j] = gmin[j] + (k + 0.5) * gsize[j]
        inside = True
        for i in range(q):
            s = 0.0
            for j in range(d):
                s += halfN[i, j] * x[j]
            if s > halfb[i]:
                inside = False
                break
        if not inside:
            continue
        clear = True
        for i in range(m):
            s = 0.0
            if kind[i] == 0:
                for j in range(d):
                    s += cen[i, j] * x[j]
                dist = abs(s - rad[i])
            else:
                for j in range(d):
                    t = x[j] - cen[i, j]
                    s += t * t
                dist = abs(math.sqrt(s) - rad[i])
            if dist <= band:
                clear = False
                break
        if clear:
            out[c] = 1
    return out


_band_nb = _njit(_band_loop)


def _band_numpy(gmin, gsize, res, start, count, kind, cen, rad, halfN, halfb, band):
    d = gmin.shape[0]
    flat = np.arange(start, start + count, dtype=np.int64)
    X = np.empty((count, d))
    rem = flat
    for j in range(d - 1, -1, -1):
        X[:, j] = gmin[j] + (rem % res[j] + 0.5) * gsize[j]
        rem = rem // res[j]
    ok = np.all(X @ halfN.T <= halfb, axis=1)
    for i in range(kind.shape[0]):
        if kind[i] == 0:
            dist = np.abs(X @ cen[i] - rad[i])
        else:
            dist = np.abs(np.sqrt(np.einsum("nj,nj->n", X - cen[i], X - cen[i])) - rad[i])
        ok &= dist > band
    return ok.astype(np.uint8)


def band_mask(gmin, gsize, res, kind, cen, rad, halfN, halfb, band: float, chunk: int = 1 << 22) -> np.ndarray:
    """Grid mask of cells whose centre lies in ``{halfN x <= halfb}`` and farther than ``band`` from every HAS.

    Planes are ``kind 0`` with unit normal ``cen[i]`` and offset ``rad[i]``;
    spheres are ``kind 1`` with centre ``cen[i]`` and radius ``rad[i]``.
    Returned as a uint8 array shaped ``res``.
    """
    gmin = np.asarray(gmin, dtype=np.float64)
    gsize = np.asarray(gsize, dtype=np.float64)
    res = np.asarray(res, dtype=np.int64)
    args = (
        np.ascontiguousarray(kind, dtype=np.int64),
        np.ascontiguousarray(cen, dtype=np.float64),
        np.ascontiguousarray(rad, dtype=np.float64),
        np.ascontiguousarray(halfN, dtype=np.float64),
        np.ascontiguousarray(halfb, dtype=np.float64),
        float(band),
    )
    total = int(np.prod(res))
    out = np.empty(total, np.uint8)
    fn = _band_nb if _backend == "numba" else _band_numpy
    for start in range(0, total, chunk):
        cnt = min(chunk, total - start)
        out[start:start + cnt] = fn(gmin, gsize, res, start, cnt, *args)
    return out.reshape(tuple(int(r) for r in res))

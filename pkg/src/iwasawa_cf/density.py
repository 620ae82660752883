"""Invariant density of T by Ulam's method, with Birkhoff and smoothness checks.

K's bounding box is cut into ``res^d`` cells; a cell belongs to the
partition when its centre lies in K.  Each partition cell carries the
same scrambled Sobol pattern of sample points; the Ulam matrix moves the
mass of a cell to the cells hit by the images of its samples.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse
from scipy.stats import qmc

from . import kernels
from .cf import CFSystem, DigitString, expand_float_batch

__all__ = [
    "EmptyCell",
    "InsufficientSamples",
    "UlamModel",
    "JumpStats",
    "build_ulam",
    "stationary",
    "kuzmin_decay",
    "birkhoff_density",
    "l1_distance",
    "invariance_defect",
    "smoothness_probe",
    "cf_mixing_probe",
    "write_density",
    "read_density",
]

_MAGIC = b"IWCFDEN1"
_CHUNK = 1 << 21  # sample points per T batch


class EmptyCell(ValueError):
    pass


class InsufficientSamples(RuntimeError):
    pass


def _sobol(d: int, n: int, seed: int) -> np.ndarray:
    m = int(math.log2(n))
    if 2**m == n:
        return qmc.Sobol(d, scramble=True, seed=seed).random_base2(m)
    return qmc.Sobol(d, scramble=True, seed=seed).random(n)


@dataclass
class UlamModel:
    system: CFSystem
    res: tuple
    gmin: np.ndarray
    gsize: np.ndarray
    cells: np.ndarray  # flat grid index of each partition cell
    weights: np.ndarray  # Lebesgue measure of cell n K
    matrix: sparse.csr_matrix  # column-stochastic, entry (j, i)
    samples_per_cell: int
    seed: int
    mass: np.ndarray | None = None  # stationary probability per cell
    residual: float | None = None
    iterations: int = 0
    terminated: int = 0
    cellmap: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.res)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def density(self) -> np.ndarray:
        """Density per cell; ``sum(density * weights) == 1``."""
        if self.mass is None:
            raise ValueError("stationary mass not computed")
        return self.mass / self.weights

    def centers(self) -> np.ndarray:
        idx = np.array(np.unravel_index(self.cells, self.res)).T
        return self.gmin + (idx + 0.5) * self.gsize

    def grid(self, values: np.ndarray | None = None, fill: float = np.nan) -> np.ndarray:
        """Per-cell values laid out on the full ``res`` grid (outside K: ``fill``)."""
        values = self.density if values is None else values
        out = np.full(int(np.prod(self.res)), fill, dtype=np.float64)
        out[self.cells] = values
        return out.reshape(self.res)

    def cell_of(self, Y: np.ndarray) -> np.ndarray:
        """Partition index of the cell containing each row (nearest partition cell when outside)."""
        g = np.floor((np.atleast_2d(Y) - self.gmin) / self.gsize).astype(np.int64)
        g = np.clip(g, 0, np.array(self.res) - 1)
        flat = np.ravel_multi_index(g.T, self.res)
        return self.cellmap[flat]

    def cell_samples(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        """Sample points of partition cells ``start..stop`` and their owning cell."""
        pat = _sobol(self.dim, self.samples_per_cell, self.seed)
        idx = np.array(np.unravel_index(self.cells[start:stop], self.res)).T
        X = (self.gmin + (idx[:, None, :] + pat[None, :, :]) * self.gsize).reshape(-1, self.dim)
        owner = np.repeat(np.arange(start, stop), len(pat))
        return X, owner

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.matrix @ p

    def to_json(self) -> dict:
        return {
            "system": self.system.to_json(),
            "res": list(self.res),
            "gmin": self.gmin.tolist(),
            "gsize": self.gsize.tolist(),
            "n_cells": self.n_cells,
            "samples_per_cell": self.samples_per_cell,
            "seed": self.seed,
            "residual": self.residual,
            "iterations": self.iterations,
            "terminated_samples": self.terminated,
            "backend": kernels.get_backend(),
        }


def _cellmap(inside: np.ndarray, res: tuple) -> np.ndarray:
    """Flat grid index -> partition index, with cells outside K sent to the nearest partition cell."""
    part = -np.ones(inside.size, dtype=np.int64)
    part[np.flatnonzero(inside)] = np.arange(int(inside.sum()))
    grid = inside.reshape(res)
    if grid.all():
        return part
    _, ind = ndimage.distance_transform_edt(~grid, return_indices=True)
    near = np.ravel_multi_index(tuple(i.ravel() for i in ind), res)
    return part[near]


def build_ulam(sys: CFSystem, res: int, samples_per_cell: int = 64, seed: int = 0, solve: bool = True) -> UlamModel:
    if res < 8:
        raise ValueError("res must be at least 8")
    d = sys.dim
    lo, hi = sys.bbox
    shape = (res,) * d
    gsize = (hi - lo) / res
    idx = np.indices(shape).reshape(d, -1).T
    inside = sys.contains_float(lo + (idx + 0.5) * gsize)
    cells = np.flatnonzero(inside)
    cmap = _cellmap(inside, shape)
    model = UlamModel(sys, shape, lo.astype(float), gsize, cells, np.zeros(len(cells)), None, samples_per_cell, seed, cellmap=cmap)
    n = len(cells)
    per = max(1, _CHUNK // samples_per_cell)
    counts_in = np.zeros(n, dtype=np.int64)
    term = np.zeros(n, dtype=np.int64)
    keys, vals = [], []
    params = sys.params
    for start in range(0, n, per):
        stop = min(n, start + per)
        X, owner = model.cell_samples(start, stop)
        ok_in = sys.contains_float(X)
        X, owner = X[ok_in], owner[ok_in]
        counts_in[start:stop] = np.bincount(owner - start, minlength=stop - start)
        Y, _, alive = kernels.tmap_batch(X, params)
        term += np.bincount(owner[~alive], minlength=n)
        tgt = model.cell_of(Y[alive])
        k, c = np.unique(tgt * n + owner[alive], return_counts=True)
        keys.append(k)
        vals.append(c)
    empty = np.flatnonzero(counts_in == 0)
    if len(empty):
        raise EmptyCell(f"{len(empty)} partition cells have no sample inside K (first: grid index {cells[empty[0]]})")
    cellvol = float(np.prod(gsize))
    model.weights = counts_in / samples_per_cell * cellvol
    k = np.concatenate(keys)
    c = np.concatenate(vals).astype(np.float64)
    rows, cols = np.divmod(k, n)
    data = c / counts_in[cols]
    # samples landing on 0 (measure zero): spread their mass uniformly over K
    tcols = np.flatnonzero(term)
    if len(tcols):
        u = model.weights / model.weights.sum()
        rows = np.concatenate([rows, np.tile(np.arange(n), len(tcols))])
        cols = np.concatenate([cols, np.repeat(tcols, n)])
        data = np.concatenate([data, np.concatenate([u * term[i] / counts_in[i] for i in tcols])])
    model.matrix = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    model.terminated = int(term.sum())
    if solve:
        stationary(model)
    return model


def stationary(model: UlamModel, tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Fixed vector of the Ulam matrix by power iteration; sets ``model.mass``."""
    p = model.weights / model.weights.sum()
    M = model.matrix
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        q = M @ p
        q /= q.sum()
        res = float(np.abs(q - p).sum())
        p = q
        if res <= tol:
            break
    # report the residual of the returned vector itself
    model.mass = p
    model.residual = float(np.abs(M @ p - p).sum())
    model.iterations = it
    return p


def kuzmin_decay(model: UlamModel, f: np.ndarray, n_max: int) -> list[float]:
    """``||A^n f - (int f) h||_1`` for n = 0..n_max, with f a density per cell.

    Evaluated as ``||A^n (f - (int f) h)||_1``: iterating the zero-sum
    difference avoids the cancellation that would otherwise stall the
    sequence at the accuracy of h.  A preserves sums, so the rounding
    residue along h is deflated after every step.
    """
    p = np.asarray(f, dtype=np.float64) * model.weights
    h = model.mass / model.mass.sum()
    g = p - p.sum() * h
    out = []
    for _ in range(n_max + 1):
        out.append(float(np.abs(g).sum()))
        g = model.matrix @ g
        g -= g.sum() * h
    return out


def birkhoff_density(sys: CFSystem, nsteps: int, res: int, x0=None, seed: int = 0, burn: int = 1000) -> np.ndarray:
    """Normalised visit histogram of one long orbit on a ``res^d`` grid over K's bounding box."""
    lo, hi = sys.bbox
    d = sys.dim
    gsize = (hi - lo) / res
    if x0 is None:
        x0 = sys.sample_uniform(1, np.random.default_rng(seed))[0]
    counts, _ = kernels.birkhoff_histogram(x0, nsteps, sys.params, lo, gsize, (res,) * d, burn=burn, seed=seed)
    counts = counts.astype(np.float64).reshape((res,) * d)
    return counts / (counts.sum() * float(np.prod(gsize)))


def l1_distance(model: UlamModel, other: np.ndarray) -> float:
    """L1 distance between the model density and a grid density on the same box.

    ``other`` may be coarser than the model grid (each axis dividing it);
    both are read as piecewise constant functions.
    """
    other = np.asarray(other, dtype=np.float64)
    reps = [r // s for r, s in zip(model.res, other.shape)]
    if any(r * s != m for r, s, m in zip(reps, other.shape, model.res)):
        raise ValueError("grid resolutions do not nest")
    fine = other
    for ax, r in enumerate(reps):
        fine = np.repeat(fine, r, axis=ax)
    vals = fine.reshape(-1)[model.cells]
    return float(np.sum(np.abs(model.density - vals) * model.weights))


def _samples_T(model: UlamModel, start: int, stop: int):
    X, owner = model.cell_samples(start, stop)
    keep = model.system.contains_float(X)
    X, owner = X[keep], owner[keep]
    Y, _, alive = kernels.tmap_batch(X, model.system.params)
    return X[alive], Y[alive], owner[alive]


def invariance_defect(model: UlamModel, g, lipschitz: float) -> tuple[float, float]:
    """``|int g o T dmu - int g dmu|`` for the Ulam measure, and the scale ``Lip(g) * cell diameter``.

    The Ulam measure is uniform inside each cell, so the two integrals can
    differ only by how mass is placed within cells.
    """
    n = model.n_cells
    per = max(1, _CHUNK // model.samples_per_cell)
    lhs = rhs = 0.0
    for start in range(0, n, per):
        stop = min(n, start + per)
        X, Y, owner = _samples_T(model, start, stop)
        cnt = np.bincount(owner - start, minlength=stop - start)
        cnt = np.maximum(cnt, 1)
        w = model.mass[start:stop] / cnt
        lhs += float(np.sum(g(Y) * w[owner - start]))
        rhs += float(np.sum(g(X) * w[owner - start]))
    return abs(lhs - rhs), lipschitz * float(np.linalg.norm(model.gsize))


# ---------------------------------------------------------------------------
# smoothness across E
# ---------------------------------------------------------------------------


@dataclass
class JumpStats:
    res: tuple
    cross_count: int
    interior_count: int
    cross_median: float
    interior_median: float
    cross_mean: float
    interior_mean: float

    @property
    def ratio(self) -> float:
        return self.cross_median / self.interior_median if self.interior_median > 0 else math.inf

    def to_json(self) -> dict:
        return {
            "res": list(self.res),
            "cross_count": self.cross_count,
            "interior_count": self.interior_count,
            "cross_median": self.cross_median,
            "interior_median": self.interior_median,
            "cross_mean": self.cross_mean,
            "interior_mean": self.interior_mean,
            "ratio": self.ratio,
        }


def _support_sides(report, X: np.ndarray) -> np.ndarray:
    """Sign of every support's defining function at each row of X: shape (len(X), n_supports)."""
    cols = []
    for h in report.supports:
        a, b, g = h.float_coeffs()
        cols.append(np.sign(a * np.einsum("ij,ij->i", X, X) + X @ b + g))
    return np.array(cols).T.astype(np.int8)


def smoothness_probe(model: UlamModel, report, values: np.ndarray | None = None) -> JumpStats:
    """Jumps of the density between adjacent cells, split by whether the pair straddles E.

    A pair straddles E when some support of the report separates the two
    cell centres.  ``values`` overrides the density (for controls).
    """
    rho = model.density if values is None else np.asarray(values, dtype=np.float64)
    full = model.grid(rho)
    d = model.dim
    cross, inner = [], []
    centers_all = model.gmin + (np.indices(model.res).reshape(d, -1).T + 0.5) * model.gsize
    for ax in range(d):
        a = np.take(full, np.arange(model.res[ax] - 1), axis=ax).reshape(-1)
        b = np.take(full, np.arange(1, model.res[ax]), axis=ax).reshape(-1)
        ia = np.take(np.arange(full.size).reshape(model.res), np.arange(model.res[ax] - 1), axis=ax).reshape(-1)
        ib = np.take(np.arange(full.size).reshape(model.res), np.arange(1, model.res[ax]), axis=ax).reshape(-1)
        ok = np.isfinite(a) & np.isfinite(b)
        a, b, ia, ib = a[ok], b[ok], ia[ok], ib[ok]
        jumps = np.abs(a - b)
        sep = np.zeros(len(jumps), dtype=bool)
        for s in range(0, len(jumps), 1 << 18):
            sl = slice(s, s + (1 << 18))
            sa = _support_sides(report, centers_all[ia[sl]])
            sb = _support_sides(report, centers_all[ib[sl]])
            sep[sl] = np.any(sa * sb <= 0, axis=1)
        cross.append(jumps[sep])
        inner.append(jumps[~sep])
    cross = np.concatenate(cross)
    inner = np.concatenate(inner)

    def med(v):
        return float(np.median(v)) if len(v) else 0.0

    def mean(v):
        return float(np.mean(v)) if len(v) else 0.0

    return JumpStats(model.res, len(cross), len(inner), med(cross), med(inner), mean(cross), mean(inner))


# ---------------------------------------------------------------------------
# mixing of cylinders
# ---------------------------------------------------------------------------


def sample_mu(model: UlamModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Points distributed by the Ulam measure (uniform inside cells, restricted to K)."""
    out = []
    need = n
    prob = model.mass / model.mass.sum()
    while need > 0:
        m = int(need * 1.1) + 16
        c = rng.choice(model.n_cells, size=m, p=prob)
        idx = np.array(np.unravel_index(model.cells[c], model.res)).T
        X = model.gmin + (idx + rng.random((m, model.dim))) * model.gsize
        X = X[model.system.contains_float(X)]
        out.append(X[:need])
        need -= len(out[-1])
    return np.concatenate(out)


def cf_mixing_probe(model: UlamModel, s: DigitString, region, m_max: int, samples: int = 10**6, seed: int = 0, max_rel_se: float = 0.25) -> list[float]:
    """Estimates of ``psi(m) = |mu(C_s n T^{-|s|-m} E) - mu(C_s) mu(E)| / (mu(C_s) mu(E))`` for m = 0..m_max.

    ``region`` is a predicate on rows of points (the set E).  Raises
    InsufficientSamples when the standard error of some estimate, relative
    to ``mu(C_s) mu(E)``, exceeds ``max_rel_se``.
    """
    sys = model.system
    rng = np.random.default_rng(seed)
    X = sample_mu(model, samples, rng)
    n = len(s)
    if n:
        D, alive, cur = expand_float_batch(X, n, sys)
        want = np.array([list(c) for c in s.coeffs], dtype=np.float64)
        in_cyl = np.all(alive, axis=1) & np.all(np.abs(D - want[None]) < 0.5, axis=(1, 2))
    else:
        in_cyl = np.ones(len(X), dtype=bool)
        cur = X.copy()
    p_c = float(in_cyl.mean())
    p_e = float(np.mean(region(X)))
    if p_c == 0 or p_e == 0:
        raise InsufficientSamples("cylinder or target set received no samples")
    out = []
    Y = cur
    live = np.ones(len(X), dtype=bool)
    for m in range(m_max + 1):
        hit = in_cyl & live & region(Y)
        p_ce = float(hit.mean())
        se = math.sqrt(max(p_ce * (1 - p_ce), 1.0 / len(X)) / len(X)) / (p_c * p_e)
        if se > max_rel_se:
            raise InsufficientSamples(f"relative standard error {se:.2f} at m={m}")
        out.append(abs(p_ce - p_c * p_e) / (p_c * p_e))
        Y, _, ok = kernels.tmap_batch(Y, sys.params)
        live &= ok
    return out


# ---------------------------------------------------------------------------
# binary export
# ---------------------------------------------------------------------------


def write_density(model: UlamModel, path_bin: str, path_json: str | None = None) -> None:
    """Little-endian float64 grid, row-major, after a header ``magic, d, res...``; NaN outside K."""
    from .io import atomic_write_bytes, atomic_write_text

    grid = model.grid()
    header = _MAGIC + struct.pack("<I", model.dim) + struct.pack(f"<{model.dim}I", *model.res)
    atomic_write_bytes(path_bin, header + grid.astype("<f8").tobytes(order="C"))
    if path_json is not None:
        atomic_write_text(path_json, json.dumps(model.to_json(), indent=2, sort_keys=True) + "\n")


def read_density(path_bin: str) -> np.ndarray:
    with open(path_bin, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC:
        raise ValueError("not a density grid file")
    (d,) = struct.unpack_from("<I", raw, 8)
    res = struct.unpack_from(f"<{d}I", raw, 12)
    off = 12 + 4 * d
    return np.frombuffer(raw, dtype="<f8", offset=off).reshape(res)

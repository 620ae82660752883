"""Pictures of the boundary levels: SVG/PNG frames in the plane, OBJ meshes in space.

Every support is drawn clipped to K.  Colours follow the object type;
supports of box systems carry no type and are coloured by the level at
which they first appear.  Output bytes depend only on the input levels
and the drawing options.
"""
from __future__ import annotations

import io as _io
import math
import os
from dataclasses import dataclass

import numpy as np

from .io import atomic_write_bytes, atomic_write_text

__all__ = [
    "UnsupportedDimension",
    "FloatHAS",
    "LevelDump",
    "dump_from_report",
    "dump_from_json",
    "svg_frame",
    "png_frame",
    "obj_mesh",
    "render_levels",
    "TYPE_COLORS",
]


class UnsupportedDimension(ValueError):
    pass


# T1 walls are drawn in grey when included; T2..T5 follow blue, red, green, yellow
TYPE_COLORS = {
    "T1": (110, 110, 110),
    "T2": (30, 80, 220),
    "T3": (210, 40, 40),
    "T4": (30, 160, 60),
    "T5": (235, 200, 20),
    "Other": (150, 60, 170),
}
_LEVEL_COLORS = [
    (0, 0, 0),
    (30, 80, 220),
    (210, 40, 40),
    (30, 160, 60),
    (235, 140, 20),
    (150, 60, 170),
    (20, 170, 190),
    (120, 90, 40),
    (230, 90, 160),
]


@dataclass(frozen=True)
class FloatHAS:
    alpha: float
    b: tuple
    gamma: float
    type: str
    level: int

    @property
    def is_plane(self) -> bool:
        return self.alpha == 0.0

    def center(self) -> np.ndarray:
        return -np.array(self.b) / (2 * self.alpha)

    def radius(self) -> float:
        c = self.center()
        return math.sqrt(max(float(c @ c) - self.gamma / self.alpha, 0.0))


@dataclass
class LevelDump:
    """Supports with the level of first appearance, plus K as half-spaces ``N x <= h``."""

    dim: int
    supports: list
    n_levels: int
    N: np.ndarray
    h: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    typed: bool
    name: str = ""

    def level(self, k: int) -> list:
        return [s for s in self.supports if s.level <= k]

    def color(self, s: FloatHAS) -> tuple:
        if self.typed:
            return TYPE_COLORS.get(s.type, TYPE_COLORS["Other"])
        return _LEVEL_COLORS[s.level % len(_LEVEL_COLORS)]

    def slice(self, axes: tuple) -> "LevelDump":
        """Restriction to the coordinate plane spanned by ``axes`` (other coordinates 0)."""
        i, j = axes
        out = []
        for s in self.supports:
            b = (s.b[i], s.b[j])
            if s.alpha == 0.0 and b == (0.0, 0.0):
                continue
            out.append(FloatHAS(s.alpha, b, s.gamma, s.type, s.level))
        N = self.N[:, [i, j]]
        keep = np.linalg.norm(N, axis=1) > 0
        return LevelDump(2, out, self.n_levels, N[keep], self.h[keep], self.lo[[i, j]], self.hi[[i, j]], self.typed, self.name)


def dump_from_report(report) -> LevelDump:
    sys = report.system
    supports = []
    for lvl, delta in enumerate(report.level_deltas()):
        for h in delta:
            a, b, g = h.float_coeffs()
            supports.append(FloatHAS(float(a), tuple(float(v) for v in b), float(g), report.type_of(h), lvl))
    N, hh = sys.halfspaces
    lo, hi = sys.bbox
    return LevelDump(sys.dim, supports, len(report.levels), N, hh, lo, hi, report.mode == "exact", sys.name)


def dump_from_json(obj: dict) -> LevelDump:
    from .cf import CFSystem

    sys = CFSystem.from_json(obj["system"])
    supports = []
    for lvl, delta in enumerate(obj["levels"]):
        for h in delta:
            supports.append(
                FloatHAS(_num(h["alpha"]), tuple(_num(v) for v in h["b"]), _num(h["gamma"]), h.get("type", "Other"), lvl)
            )
    N, hh = sys.halfspaces
    lo, hi = sys.bbox
    return LevelDump(sys.dim, supports, len(obj["levels"]), N, hh, lo, hi, obj.get("mode") == "exact", sys.name)


def _num(text) -> float:
    from .scalar import qext

    try:
        return float(text)
    except ValueError:
        return float(qext(text))


# ---------------------------------------------------------------------------
# planar geometry
# ---------------------------------------------------------------------------


def _inside(dump: LevelDump, P: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    return np.all(P @ dump.N.T <= dump.h + tol, axis=1)


def _curve_runs(dump: LevelDump, f, t: np.ndarray) -> list[np.ndarray]:
    """Pieces of the curve ``f(t)`` inside K; run ends are bisected onto the boundary of K."""
    P = f(t)
    mask = _inside(dump, P)
    out = []
    edges = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(np.int8), [0]])))
    for a, b in zip(edges[::2], edges[1::2]):
        pts = [P[k] for k in range(a, b)]
        if a > 0:
            pts.insert(0, _bisect(dump, f, t[a], t[a - 1]))
        if b < len(t):
            pts.append(_bisect(dump, f, t[b - 1], t[b]))
        if len(pts) >= 2:
            out.append(np.array(pts))
    return out


def _bisect(dump: LevelDump, f, t_in: float, t_out: float) -> np.ndarray:
    for _ in range(48):
        m = 0.5 * (t_in + t_out)
        if _inside(dump, f(np.array([m])))[0]:
            t_in = m
        else:
            t_out = m
    return f(np.array([t_in]))[0]


def _polylines(dump: LevelDump, s: FloatHAS, px: float) -> list[np.ndarray]:
    """Pieces of the support inside K as polylines with chord error at most ``px``."""
    span = float(np.max(dump.hi - dump.lo))
    if s.is_plane:
        n = np.array(s.b, dtype=float)
        nn = float(np.linalg.norm(n))
        n /= nn
        p0 = -s.gamma / nn * n
        u = np.array([-n[1], n[0]])
        t0 = float((0.5 * (dump.lo + dump.hi) - p0) @ u)
        t = t0 + np.linspace(-span, span, max(2, int(2 * span / (64 * px)) + 1))
        return _curve_runs(dump, lambda t: p0 + t[:, None] * u, t)
    c, r = s.center(), s.radius()
    if r == 0.0:
        return []
    step = 2 * math.acos(max(-1.0, 1 - px / r)) if px < 2 * r else math.pi / 2
    k = max(16, int(math.ceil(2 * math.pi / step)))

    def f(th):
        return c + r * np.stack([np.cos(th), np.sin(th)], axis=1)

    th = np.linspace(0.0, 2 * math.pi, k + 1)
    mask = _inside(dump, f(th))
    if mask.all():
        return [f(th)]
    # start the parameter outside K so no run wraps around
    th = th + th[int(np.flatnonzero(~mask)[0])]
    return _curve_runs(dump, f, th)


def _k_outline(dump: LevelDump, px: float) -> list[np.ndarray]:
    """Boundary of K as a closed polygon (from its half-spaces)."""
    pts = []
    m = len(dump.N)
    for a in range(m):
        for b in range(a + 1, m):
            M = dump.N[[a, b]]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            x = np.linalg.solve(M, dump.h[[a, b]])
            if _inside(dump, x[None])[0]:
                pts.append(x)
    if len(pts) < 3:
        return []
    P = np.unique(np.round(np.array(pts), 12), axis=0)
    c = P.mean(axis=0)
    order = np.argsort(np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0]))
    P = P[order]
    return [np.concatenate([P, P[:1]])]


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------


def _frame_transform(dump: LevelDump, size: int, margin: int = 10):
    lo, hi = dump.lo.astype(float), dump.hi.astype(float)
    if dump.dim == 1:
        lo = np.array([lo[0], -0.05 * (hi[0] - lo[0])])
        hi = np.array([hi[0], 0.05 * (hi[0] - lo[0])])
    scale = (size - 2 * margin) / float(np.max(hi - lo))
    h = int(round((hi[1] - lo[1]) * scale)) + 2 * margin

    def to_px(P):
        P = np.atleast_2d(P)
        return np.stack([margin + (P[:, 0] - lo[0]) * scale, h - margin - (P[:, 1] - lo[1]) * scale], axis=1)

    return to_px, scale, (size, h)


def _frame_items(dump: LevelDump, level: int | None, size: int):
    """(colour, level, type, polylines in model units) for every support drawn in the frame."""
    if dump.dim not in (1, 2):
        raise UnsupportedDimension(f"planar frames need d <= 2 (got {dump.dim}); use a coordinate slice")
    _, scale, _ = _frame_transform(dump, size)
    px = 0.25 / scale
    chosen = dump.supports if level is None else dump.level(level)
    items = []
    for s in chosen:
        if dump.dim == 1:
            pts = _points_1d(s)
            lines = [np.array([[x, -0.03 * float(dump.hi[0] - dump.lo[0])], [x, 0.03 * float(dump.hi[0] - dump.lo[0])]]) for x in pts if dump.lo[0] - 1e-9 <= x <= dump.hi[0] + 1e-9]
        else:
            lines = _polylines(dump, s, px)
        items.append((dump.color(s), s.level, s.type, lines))
    return items


def _points_1d(s: FloatHAS) -> list[float]:
    if s.is_plane:
        return [-s.gamma / s.b[0]]
    c, r = float(s.center()[0]), s.radius()
    return [c - r, c + r] if r > 0 else [c]


def svg_frame(dump: LevelDump, level: int | None = None, size: int = 800) -> str:
    """SVG 1.1 document; one ``<g class="has">`` per support of the level (all levels if None)."""
    to_px, _, (w, h) = _frame_transform(dump, size)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
    ]
    if dump.dim == 2:
        for poly in _k_outline(dump, 1.0):
            out.append(f'<polygon class="K" points="{_pts(to_px(poly[:-1]))}" fill="none" stroke="#000000" stroke-width="1.5"/>')
    else:
        seg = to_px(np.array([[dump.lo[0], 0.0], [dump.hi[0], 0.0]]))
        out.append(f'<polyline class="K" points="{_pts(seg)}" fill="none" stroke="#000000" stroke-width="1.5"/>')
    for color, lvl, typ, lines in _frame_items(dump, level, size):
        hexc = "#%02x%02x%02x" % color
        out.append(f'<g class="has" data-type="{typ}" data-level="{lvl}" stroke="{hexc}" fill="none" stroke-width="1">')
        for line in lines:
            out.append(f'<polyline points="{_pts(to_px(line))}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _pts(P: np.ndarray) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in P)


def png_frame(dump: LevelDump, level: int | None = None, size: int = 800) -> bytes:
    """RGBA8 PNG of the same drawing as :func:`svg_frame`."""
    from PIL import Image, ImageDraw

    to_px, _, (w, h) = _frame_transform(dump, size)
    img = Image.new("RGBA", (w, h), (255, 255, 255, 255))
    draw = ImageDraw.Draw(img)
    if dump.dim == 2:
        for poly in _k_outline(dump, 1.0):
            draw.line([tuple(p) for p in to_px(poly)], fill=(0, 0, 0, 255), width=2)
    else:
        seg = to_px(np.array([[dump.lo[0], 0.0], [dump.hi[0], 0.0]]))
        draw.line([tuple(p) for p in seg], fill=(0, 0, 0, 255), width=2)
    for color, _, _, lines in _frame_items(dump, level, size):
        for line in lines:
            draw.line([tuple(p) for p in to_px(line)], fill=(*color, 255), width=1)
    buf = _io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------


def _clip_polygon(P: list, N: np.ndarray, h: np.ndarray) -> list:
    """Sutherland-Hodgman clip of a planar polygon (list of 3-vectors) to ``N x <= h``."""
    for n, c in zip(N, h):
        if not P:
            break
        out = []
        for k in range(len(P)):
            a, b = P[k - 1], P[k]
            fa, fb = float(n @ a) - c, float(n @ b) - c
            if fb <= 1e-12:
                if fa > 1e-12:
                    out.append(a + (b - a) * (fa / (fa - fb)))
                out.append(b)
            elif fa <= 1e-12:
                out.append(a + (b - a) * (fa / (fa - fb)))
        P = out
    return P


def _sphere_triangles(c: np.ndarray, r: float, chord: float) -> np.ndarray:
    """Latitude-longitude triangulation with chord error at most ``chord``."""
    step = 2 * math.acos(max(-1.0, 1 - chord / r)) if chord < 2 * r else math.pi / 2
    nl = max(8, int(math.ceil(math.pi / step)))
    nm = 2 * nl
    th = np.linspace(0, math.pi, nl + 1)
    ph = np.linspace(0, 2 * math.pi, nm + 1)
    V = np.stack(
        [np.outer(np.sin(th), np.cos(ph)), np.outer(np.sin(th), np.sin(ph)), np.outer(np.cos(th), np.ones_like(ph))],
        axis=-1,
    )
    V = c + r * V
    tris = []
    for i in range(nl):
        for j in range(nm):
            a, b, cc, d = V[i, j], V[i + 1, j], V[i + 1, j + 1], V[i, j + 1]
            if i > 0:
                tris.append((a, b, d))
            if i < nl - 1:
                tris.append((b, cc, d))
    return np.array(tris)


def _plane_polygon(s: FloatHAS, N: np.ndarray, h: np.ndarray, span: float) -> list:
    n = np.array(s.b, dtype=float)
    nn = float(np.linalg.norm(n))
    n /= nn
    p0 = -s.gamma / nn * n
    helper = np.eye(3)[int(np.argmin(np.abs(n)))]
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    P = [p0 + span * (su * u + sv * v) for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
    return _clip_polygon(P, N, h)


def obj_mesh(dump: LevelDump, chord: float = 1e-3, include_walls: bool = False, mtl_name: str = "types.mtl") -> tuple[str, str]:
    """Wavefront OBJ (one group per support, material per type) and its MTL."""
    if dump.dim != 3:
        raise UnsupportedDimension(f"meshes are for d = 3 (got {dump.dim})")
    span = 4.0 * float(np.max(dump.hi - dump.lo))
    verts: list = []
    lines = [f"mtllib {mtl_name}"]
    faces_out = []
    for k, s in enumerate(dump.supports):
        if s.type == "T1" and not include_walls:
            continue
        mat = s.type if s.type in TYPE_COLORS else "Other"
        polys = []
        if s.is_plane:
            P = _plane_polygon(s, dump.N, dump.h, span)
            if len(P) >= 3:
                polys.append(P)
        else:
            tris = _sphere_triangles(s.center(), s.radius(), chord)
            side = np.einsum("tvj,mj->tvm", tris, dump.N) - dump.h  # (T, 3, m)
            inside = np.all(side <= 1e-12, axis=(1, 2))
            out = np.any(np.all(side > 1e-12, axis=1), axis=1)
            for t in tris[inside]:
                polys.append(list(t))
            for t in tris[~inside & ~out]:
                P = _clip_polygon(list(t), dump.N, dump.h)
                if len(P) >= 3:
                    polys.append(P)
        if not polys:
            continue
        faces_out.append((k, s, mat, polys))
    for k, s, mat, polys in faces_out:
        lines.append(f"g has_{k}_L{s.level}_{s.type}")
        lines.append(f"usemtl {mat}")
        for P in polys:
            base = len(verts) + 1
            verts.extend(P)
            for q in range(1, len(P) - 1):
                lines.append(f"f {base} {base + q} {base + q + 1}")
    vlines = [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in verts]
    obj = "\n".join([lines[0], *vlines, *lines[1:]]) + "\n"
    return obj, _mtl()


def _mtl() -> str:
    out = []
    for name in ("T1", "T2", "T3", "T4", "T5", "Other"):
        r, g, b = (v / 255 for v in TYPE_COLORS[name])
        out += [f"newmtl {name}", f"Kd {r:.4f} {g:.4f} {b:.4f}", "Ka 0.0000 0.0000 0.0000", "d 1.0", ""]
    return "\n".join(out)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def render_levels(dump: LevelDump, outdir: str, fmt: str = "both", size: int = 800, slice_axes: tuple | None = None, include_walls: bool = False) -> list[str]:
    """Write frames (d <= 2 or a 2D slice) or a mesh (d = 3); returns the written paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    if slice_axes is not None:
        dump = dump.slice(tuple(slice_axes))
    elif dump.dim in (4, 8) or dump.dim > 3:
        raise UnsupportedDimension(f"d = {dump.dim}: only 2D coordinate slices can be rendered")
    if dump.dim == 3:
        obj, mtl = obj_mesh(dump, include_walls=include_walls)
        for name, text in (("mesh.obj", obj), ("types.mtl", mtl)):
            path = os.path.join(outdir, name)
            atomic_write_text(path, text)
            written.append(path)
        return written
    frames = list(range(dump.n_levels)) + [None]
    for k in frames:
        stem = "composite" if k is None else f"level_{k:02d}"
        if fmt in ("svg", "both"):
            path = os.path.join(outdir, stem + ".svg")
            atomic_write_text(path, svg_frame(dump, k, size))
            written.append(path)
        if fmt in ("png", "both"):
            path = os.path.join(outdir, stem + ".png")
            atomic_write_bytes(path, png_frame(dump, k, size))
            written.append(path)
    return written

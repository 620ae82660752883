"""Command-line entry point: ``iwacf <command> ...``.

Every command prints a JSON report on stdout.  With ``--out DIR`` the report,
the run configuration and any grids or images are also written into DIR.
Exit codes: 0 success, 1 bad input or I/O failure, 2 certification broken,
3 budget exhausted (or a report that did not stabilize).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CERT = 2
EXIT_BUDGET = 3

COMMANDS = ("catalog", "check", "orbit-boundary", "serendipity", "expand", "alpha-orbit", "density", "kuzmin", "render")


@dataclass
class RunConfig:
    command: str
    target: str | None = None
    offsets: list | None = None
    levels: int | None = None
    grid: int | None = None
    res: int | None = None
    samples: int | None = None
    steps: int | None = None
    budget: int | None = None
    out: str | None = None
    seed: int = 0
    options: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def _apply_env(args) -> None:
    if args.backend:
        os.environ["IWACF_BACKEND"] = args.backend
    threads = os.environ.get("IWACF_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _offsets(text: str | None) -> list | None:
    if text is None:
        return None
    return [p.strip() for p in text.split(",")]


def _emit(report: dict, cfg: RunConfig, schema: str, name: str) -> None:
    from .io import validate, write_json

    report = dict(report, run_config=cfg.to_json())
    validate(report, schema)
    if cfg.out:
        write_json(os.path.join(cfg.out, f"{name}.json"), report, schema)
        write_json(os.path.join(cfg.out, "run_config.json"), cfg.to_json(), "run_config")
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_catalog(args, cfg):
    from .lattice import catalog

    entries = []
    for spec in catalog().values():
        e = spec.to_json()
        e["description"] = spec.description
        entries.append(e)
    _emit({"lattices": entries}, cfg, "catalog", "catalog")


def _cmd_check(args, cfg):
    from .lattice import check_properties, get_lattice

    report = check_properties(get_lattice(args.lattice), norm_bound=args.norm_bound)
    _emit(report.to_json(), cfg, "property_report", "check")


def _boundary(args, cfg, max_level):
    from .cf import get_system
    from .serendipity import iterate_boundary

    sys_ = get_system(args.system, _offsets(args.offset))
    return iterate_boundary(sys_, max_level=max_level, max_expand=args.budget)


def _default_grid(dim: int) -> int | None:
    return {1: 4096, 2: 1024, 3: 128}.get(dim)


def _cmd_orbit_boundary(args, cfg):
    from .render import UnsupportedDimension, dump_from_report, render_levels

    report = _boundary(args, cfg, args.levels)
    out = report.to_json(include_levels=True)
    files = []
    if cfg.out:
        dump = dump_from_report(report)
        try:
            files = render_levels(dump, cfg.out, fmt=args.format, size=args.size, slice_axes=_axes(args.slice), include_walls=args.include_walls)
        except UnsupportedDimension as exc:
            out["render_skipped"] = str(exc)
    out["files"] = sorted(os.path.basename(f) for f in files)
    _emit(out, cfg, "decomposition_report", "orbit_boundary")
    if report.budget_exhausted:
        return EXIT_BUDGET
    return EXIT_OK


def _cmd_serendipity(args, cfg):
    from .serendipity import ResolutionUnstable, count_components

    report = _boundary(args, cfg, args.levels)
    grid = args.grid or _default_grid(report.system.dim)
    note = None
    if report.stabilized and not report.budget_exhausted and grid:
        cfg.grid = grid
        try:
            count_components(report, grid, check_double=not args.single)
        except ResolutionUnstable as exc:
            note = str(exc)
    out = report.to_json(include_levels=args.with_levels)
    if note:
        out["note"] = note
    _emit(out, cfg, "decomposition_report", "serendipity")
    if report.budget_exhausted or not report.stabilized or note:
        return EXIT_BUDGET
    return EXIT_OK


def _parse_point(text: str, dim: int):
    from .algebra import Vec
    from .scalar import eval_qext

    parts = [p.strip() for p in text.split(",")]
    if len(parts) != dim:
        raise ValueError(f"point needs {dim} coordinates, got {len(parts)}")
    return Vec(eval_qext(p) for p in parts)


def _cmd_expand(args, cfg):
    from .cf import InvalidPoint, convergent, expand, get_system
    from .scalar import format_qext

    sys_ = get_system(args.system, _offsets(args.offset))
    x = _parse_point(args.point, sys_.dim)
    if not sys_.contains(x):
        raise InvalidPoint(f"{args.point} is not in K for {sys_.name}")
    digits, rem = expand(x, args.n, sys_)
    convs = []
    for k in range(1, len(digits) + 1):
        prefix = type(digits)(digits.digits[:k], sys_, digits.coeffs[:k])
        convs.append([format_qext(c) for c in convergent(prefix)])
    out = {
        "system": sys_.to_json(),
        "point": [format_qext(c) for c in x],
        "digits": [[format_qext(c) for c in a] for a in digits.digits],
        "digit_coeffs": digits.to_json(),
        "remainders": [[format_qext(c) for c in r] for r in rem],
        "convergents": convs,
        "terminated": len(digits) < args.n,
    }
    _emit(out, cfg, "expansion", "expand")


def _cmd_alpha_orbit(args, cfg):
    from .cf import alpha_orbit

    report = alpha_orbit(args.alpha, args.variant, max_steps=args.max_steps)
    _emit(report.to_json(), cfg, "orbit_report", "alpha_orbit")
    return EXIT_OK


def _uniform(model):
    import numpy as np

    return np.full(model.n_cells, 1.0 / model.weights.sum())


def _cmd_density(args, cfg):
    from .cf import get_system
    from .density import birkhoff_density, build_ulam, write_density

    sys_ = get_system(args.system, _offsets(args.offset))
    model = build_ulam(sys_, args.res, samples_per_cell=args.samples, seed=args.seed)
    out = {"model": model.to_json()}
    if args.birkhoff:
        from .density import l1_distance

        bres = max(1, args.res // args.birkhoff_coarsen)
        hist = birkhoff_density(sys_, args.birkhoff, bres, seed=args.seed)
        out["birkhoff"] = {"steps": args.birkhoff, "res": bres, "l1": l1_distance(model, hist)}
    if cfg.out:
        write_density(model, os.path.join(cfg.out, "density.bin"))
        out["grid_file"] = "density.bin"
    _emit(out, cfg, "density_meta", "density")


def _cmd_kuzmin(args, cfg):
    from .cf import get_system
    from .density import build_ulam, kuzmin_decay

    sys_ = get_system(args.system, _offsets(args.offset))
    model = build_ulam(sys_, args.res, samples_per_cell=args.samples, seed=args.seed)
    dist = kuzmin_decay(model, _uniform(model), args.steps)
    window = dist[3:]
    monotone = all(b < a for a, b in zip(window, window[1:]))
    out = {"system": sys_.to_json(), "model": model.to_json(), "initial": "uniform", "distances": dist, "monotone_from_3": monotone}
    _emit(out, cfg, "kuzmin", "kuzmin")


def _axes(text: str | None):
    if text is None:
        return None
    i, j = (int(v) for v in text.split(","))
    return (i, j)


def _cmd_render(args, cfg):
    from .render import dump_from_json, render_levels

    with open(args.report, encoding="utf-8") as fh:
        obj = json.load(fh)
    if "levels" not in obj:
        raise ValueError(f"{args.report} has no per-level supports; rerun with --with-levels or use orbit-boundary")
    dump = dump_from_json(obj)
    outdir = cfg.out or "."
    files = render_levels(dump, outdir, fmt=args.format, size=args.size, slice_axes=_axes(args.slice), include_walls=args.include_walls)
    print(json.dumps({"files": sorted(os.path.basename(f) for f in files)}, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iwacf", description="Iwasawa continued fractions: lattices, boundary orbits, densities.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="directory for reports and artifacts")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--backend", choices=("numba", "numpy"), help="overrides IWACF_BACKEND")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("catalog", parents=[common], help="list the built-in lattices")

    c = sub.add_parser("check", parents=[common], help="integrality, unit generation, radius, remoteness")
    c.add_argument("lattice")
    c.add_argument("--norm-bound", type=int, default=3)

    def boundary_args(q, levels_default):
        q.add_argument("system", help="lattice name, gauss, or alpha:<value>[:minus]")
        q.add_argument("--offset", help="comma-separated shift of the box [-1/2,1/2]^d, e.g. 0,0.01")
        q.add_argument("--levels", type=int, default=levels_default)
        q.add_argument("--budget", type=int, help="max new supports per level in box mode")

    def render_args(q):
        q.add_argument("--format", choices=("svg", "png", "both"), default="both")
        q.add_argument("--size", type=int, default=800)
        q.add_argument("--slice", help="two coordinate axes, e.g. 0,1 (required for d = 4, 8)")
        q.add_argument("--include-walls", action="store_true", help="draw type-1 planes in meshes")

    ob = sub.add_parser("orbit-boundary", parents=[common], help="per-level images of the boundary orbit")
    boundary_args(ob, 3)
    render_args(ob)

    s = sub.add_parser("serendipity", parents=[common], help="iterate the boundary and count components")
    boundary_args(s, None)
    s.add_argument("--grid", type=int, help="grid resolution per axis for component counting")
    s.add_argument("--single", action="store_true", help="skip the doubled-resolution check")
    s.add_argument("--with-levels", action="store_true", help="include per-level supports in the report")

    e = sub.add_parser("expand", parents=[common], help="digits, remainders and convergents of a point")
    e.add_argument("system")
    e.add_argument("point", help="comma-separated exact coordinates, e.g. 1/3,-1/5")
    e.add_argument("-n", type=int, default=10)
    e.add_argument("--offset")

    a = sub.add_parser("alpha-orbit", parents=[common], help="endpoint orbits of an alpha continued fraction")
    a.add_argument("alpha", help="e.g. 3/7, (sqrt(5)-1)/2, 2^(1/3)/4, pi/8")
    a.add_argument("variant", nargs="?", default="one_over_x", choices=("one_over_x", "minus_one_over_x"))
    a.add_argument("--max-steps", type=int, default=10_000)

    for name, helptext in (("density", "Ulam estimate of the invariant density"), ("kuzmin", "distance of A^n f to the invariant density")):
        q = sub.add_parser(name, parents=[common], help=helptext)
        q.add_argument("system")
        q.add_argument("--offset")
        q.add_argument("--res", type=int, default=256)
        q.add_argument("--samples", type=int, default=64, help="sample points per grid cell")
        if name == "density":
            q.add_argument("--birkhoff", type=int, default=0, help="also compare with an orbit histogram of this many steps")
            q.add_argument("--birkhoff-coarsen", type=int, default=4)
        else:
            q.add_argument("--steps", type=int, default=30)

    r = sub.add_parser("render", parents=[common], help="frames or a mesh from a saved report")
    r.add_argument("report")
    render_args(r)
    return p


def _config(args) -> RunConfig:
    cfg = RunConfig(command=args.command, out=args.out, seed=args.seed)
    cfg.target = getattr(args, "lattice", None) or getattr(args, "system", None) or getattr(args, "report", None) or getattr(args, "alpha", None)
    cfg.offsets = _offsets(getattr(args, "offset", None))
    cfg.levels = getattr(args, "levels", None)
    cfg.grid = getattr(args, "grid", None)
    cfg.res = getattr(args, "res", None)
    cfg.samples = getattr(args, "samples", None)
    cfg.steps = getattr(args, "steps", None) or getattr(args, "n", None) or getattr(args, "max_steps", None)
    cfg.budget = getattr(args, "budget", None)
    opts = {}
    for key in ("variant", "point", "norm_bound", "birkhoff", "format", "size", "slice", "single", "include_walls", "backend"):
        v = getattr(args, key, None)
        if v not in (None, False):
            opts[key] = v
    cfg.options = opts
    return cfg


_HANDLERS = {
    "catalog": _cmd_catalog,
    "check": _cmd_check,
    "orbit-boundary": _cmd_orbit_boundary,
    "serendipity": _cmd_serendipity,
    "expand": _cmd_expand,
    "alpha-orbit": _cmd_alpha_orbit,
    "density": _cmd_density,
    "kuzmin": _cmd_kuzmin,
    "render": _cmd_render,
}


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _apply_env(args)
    from .cf import InvalidPoint, PrecisionExhausted
    from .lattice import UnknownLattice
    from .serendipity import BudgetExhausted, CertificationBroken

    cfg = _config(args)
    try:
        code = _HANDLERS[args.command](args, cfg)
    except CertificationBroken as exc:
        print(f"error: certification broken: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (BudgetExhausted, PrecisionExhausted) as exc:
        print(f"error: budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except UnknownLattice as exc:
        print(f"error: unknown lattice {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (InvalidPoint, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if code is None else code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

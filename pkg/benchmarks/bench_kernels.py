"""Time the hot kernels under both backends.

    python benchmarks/bench_kernels.py [--repeat 3]

numba timings exclude the first (compiling) call.
"""
import argparse
import time

import numpy as np

from iwasawa_cf import kernels
from iwasawa_cf.cf import get_system
from iwasawa_cf.serendipity import _support_arrays, iterate_boundary


def best_of(fn, repeat):
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return min(out)


def cases():
    hur = get_system("hurwitz")
    z3 = get_system("z3")
    rng = np.random.default_rng(0)
    X2 = hur.sample_uniform(200_000, rng)
    X3 = z3.sample_uniform(200_000, rng)
    p = hur.params
    lo, hi = hur.bbox
    rep = iterate_boundary(z3)
    kind, cen, rad = _support_arrays(rep.supports, 3)
    N, b = z3.halfspaces
    zlo, zhi = z3.bbox
    return {
        "tmap hurwitz 2e5": lambda: kernels.tmap_batch(X2, p),
        "tmap z3 2e5": lambda: kernels.tmap_batch(X3, z3.params),
        "nearest hurwitz 2e5": lambda: kernels.nearest_coeffs(X2 * 7, p.B, p.Binv, p.rel, p.relcoef),
        "birkhoff hurwitz 2e6": lambda: kernels.birkhoff_histogram(X2[0], 2_000_000, p, lo, (hi - lo) / 128, (128, 128)),
        "band z3 128^3": lambda: kernels.band_mask(zlo, (zhi - zlo) / 128, (128,) * 3, kind, cen, rad, N, b, 1e-3),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    table = cases()
    backends = ["numba", "numpy"] if kernels.HAVE_NUMBA else ["numpy"]
    print(f"{'kernel':<24}" + "".join(f"{b:>12}" for b in backends) + "   speedup")
    for name, fn in table.items():
        row = []
        for b in backends:
            kernels.set_backend(b)
            fn()  # warm-up, compiles under numba
            row.append(best_of(fn, args.repeat))
        speed = f"{row[1] / row[0]:9.1f}x" if len(row) == 2 else ""
        print(f"{name:<24}" + "".join(f"{t:11.3f}s" for t in row) + "   " + speed)


if __name__ == "__main__":
    main()

"""Time the per-point kernels on the compiled and numpy backends.

    python3 benchmarks/bench_kernels.py [--points 640000] [--repeat 3]

Also times a full 800x800 strip render through each backend.
"""
import argparse
import time

import numpy as np

from newtonflow import kernels
from newtonflow.algebra import rational_from_expr
from newtonflow.elliptic import Lattice
from newtonflow.expr import parse
from newtonflow.newton import FieldSpec
from newtonflow.render import RasterRegion, StripPartition, render_strips_plane


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(n, rng):
    z = rng.uniform(-2, 2, n) + 1j * rng.uniform(-2, 2, n)
    rho = rng.uniform(-10, 10, n)
    L = Lattice(1.0, 0.25 + 1.25j)
    spec = FieldSpec.from_rational(rational_from_expr(parse("z*(2*z-i)^2/(2*z+i)^2")), 1.0)
    region = RasterRegion(-2, 2, -2, 2, 800, 800)
    return {
        "psi closed form": lambda: spec.psi_array(z),
        "wp": lambda: L.wp(z),
        "wp_prime": lambda: L.wp_prime(z),
        "wzeta": lambda: L.wzeta(z),
        "wsigma": lambda: L.wsigma(z),
        "strip bins": lambda: kernels.strip_bins(rho, 24),
        "level mask": lambda: kernels.level_mask(rho, rho[::-1].copy(), 0.3),
        "800x800 strip render": lambda: render_strips_plane(spec, region, StripPartition()),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=640_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    names = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])
    if len(names) == 1:
        print("compiled kernels not built; timing the numpy backend only")
    results = {}
    for name in names:
        kernels.use(name)
        for label, fn in cases(args.points, np.random.default_rng(0)).items():
            fn()  # warm up caches and lazy setup
            results[label, name] = best_of(fn, args.repeat)

    header = f"{'kernel':<22}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else "")
    print(f"{args.points} points, best of {args.repeat}")
    print(header)
    for label in cases(1, np.random.default_rng(0)):
        row = f"{label:<22}" + "".join(f"{results[label, n] * 1e3:>10.1f}ms" for n in names)
        if len(names) > 1:
            row += f"{results[label, 'python'] / results[label, 'cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()

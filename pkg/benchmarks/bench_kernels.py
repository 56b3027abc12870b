"""Time the Volterra sums and a full Picard sweep under both backends.

    python benchmarks/bench_kernels.py [--paths 1 16 256] [--steps 256] [--repeat 5]
"""

import argparse
import time

import numpy as np

from fuzzyvolterra import _kernels
from fuzzyvolterra import coefficients as co
from fuzzyvolterra.fuzzy_core import AlphaGrid, random_cuts
from fuzzyvolterra.solver import PicardEngine, ProblemSpec
from fuzzyvolterra.stochastic_paths import make_grid, sample_increments


def best_of(fn, repeat):
    fn()  # warm-up (numba compiles here)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def fuzzy_problem(dt):
    a = AlphaGrid.uniform()
    return ProblemSpec(
        tau=0.25, horizon=1.0, dt=dt, alpha=a, rho=0.5, lipschitz_C=0.3125,
        phi=co.TriangularInitial(alpha=a, center=1.0, left=0.5, right=0.5),
        g1=co.ConstantKernel(1.0), g2=co.ConstantKernel(1.0),
        h1=co.ConstantKernel(0.5), h2=co.ConstantKernel(1.0),
        K1=co.LinearDrift(a=0.2), K2=co.LinearDrift(a=0.5, c=0.25),
        L1=co.LinearCenterDiffusion(c=0.2), L2=co.LinearCenterDiffusion(a=0.3),
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, nargs="+", default=[1, 16, 256])
    ap.add_argument("--steps", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.steps
    w = np.tril(rng.uniform(-1, 1, size=(n + 1, n)), -1) / n
    print(f"{'kernel':<12}{'paths':>7}{'numba [ms]':>13}{'numpy [ms]':>13}{'max diff':>12}")
    for p in args.paths:
        d = random_cuts(rng, (n, p), 11)
        res = {b: _kernels.fuzzy_weighted_sum(w, d, b) for b in ("numba", "numpy")}
        tb = {b: best_of(lambda b=b: _kernels.fuzzy_weighted_sum(w, d, b), args.repeat) for b in res}
        diff = np.abs(res["numba"] - res["numpy"]).max()
        print(f"{'aumann':<12}{p:>7}{tb['numba'] * 1e3:>13.2f}{tb['numpy'] * 1e3:>13.2f}{diff:>12.1e}")

    spec = fuzzy_problem(1.0 / n)
    grid = make_grid(spec.tau, spec.horizon, spec.dt)
    for p in args.paths:
        db1, db2 = sample_increments(grid, spec.rho, 0, range(p))
        engines = {b: PicardEngine(spec, backend=b) for b in ("numba", "numpy")}
        start = engines["numpy"].start(p)
        tb = {b: best_of(lambda e=e: e.step(start, db1, db2), args.repeat) for b, e in engines.items()}
        print(f"{'sweep':<12}{p:>7}{tb['numba'] * 1e3:>13.2f}{tb['numpy'] * 1e3:>13.2f}")


if __name__ == "__main__":
    main()

"""Compare the compiled and numpy kernel backends on representative workloads.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--n-z 401] [--n-t 401]
"""
import argparse
import timeit

import numpy as np

from mmvgame import model as M
from mmvgame import pde
from mmvgame._kernels import backends


def _workloads(n_z, n_t):
    m = M.ou_tanh(rho=0.5)
    grid = pde.GridSpec(-6.0, 6.0, n_z, n_t)
    z = grid.z
    drift = pde._shifted_drift(m, z) * np.ones(n_z)
    half = 0.5 * np.asarray(m.b(z), dtype=float) ** 2 * np.ones(n_z)
    reac = -(np.asarray(m.lam(z), dtype=float) ** 2) * np.ones(n_z)
    lo, di, up = pde.operator_bands(drift, half, reac, grid.dz)
    src = np.zeros(n_z)
    u = np.ones(n_z)
    dt = grid.dt(m.horizon_T)
    rng = np.random.default_rng(0)
    fields = rng.standard_normal((2, n_z, n_t))
    zq = rng.uniform(-5.9, 5.9, 20000)
    tq = rng.uniform(0.0, 0.99, 20000)
    d = 4.0 + rng.random(n_z)
    l, up_, rhs = rng.random(n_z), rng.random(n_z), rng.random(n_z)
    return {
        "tridiag_solve": lambda k: k.tridiag_solve(l, d, up_, rhs),
        "cn_step": lambda k: k.cn_step(lo, di, up, src, u, dt),
        "cn_march": lambda k: k.cn_march(lo, di, up, src, u, dt, n_t),
        "bilinear(20k)": lambda k: k.bilinear(fields, -6.0, grid.dz, 0.0, 1.0 / (n_t - 1), zq, tq),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--n-z", type=int, default=401)
    p.add_argument("--n-t", type=int, default=401)
    args = p.parse_args(argv)
    impls = backends()
    work = _workloads(args.n_z, args.n_t)
    names = sorted(impls)
    print(f"{'kernel':<16}" + "".join(f"{n + ' [ms]':>16}" for n in names)
          + ("    speedup" if len(names) > 1 else ""))
    for label, fn in work.items():
        best = {}
        for n in names:
            k = impls[n]
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(k), number=1), 1e-6)))
            best[n] = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
        line = f"{label:<16}" + "".join(f"{1e3 * best[n]:>16.4f}" for n in names)
        if "cython" in best:
            line += f"    {best['python'] / best['cython']:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()

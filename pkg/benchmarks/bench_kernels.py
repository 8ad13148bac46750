"""Numba vs numpy timings for the hot kernels, plus one full period step.

    python benchmarks/bench_kernels.py [--n 64 128 256] [--repeat 20]

The full-step row uses whichever backend the import selected; rerun with
FERROPERIOD_DISABLE_JIT=1 to time the numpy path end to end.
"""
import argparse
import time

import numpy as np

from ferroperiod import kernels
from ferroperiod.constitutive import LangevinLaw, PhysParams
from ferroperiod.grid import Grid
from ferroperiod.hydro import Mollifier, streamfunction_field
from ferroperiod.periodic import Forcing, State, evolve
from ferroperiod.thermal import BoundaryVariant, ZetaProfile


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_grid(n, repeat, rng):
    g = Grid(n, n)
    psi = np.zeros((n + 1, n + 1))
    psi[1:-1, 1:-1] = rng.standard_normal((n - 1, n - 1))
    U = streamfunction_field(psi, g)
    U = U * (1.0 / U.max_abs())
    q = rng.random(g.shape)
    dt = 0.5 / kernels.scalar_inflow_rate(U.u, U.w, g.dx, g.dz)
    m = Mollifier.build(4 * g.dx, g)
    cases = {
        "advect_scalar": (lambda: kernels.advect_scalar_numpy(q, U.u, U.w, g.dx, g.dz, dt),
                          lambda: kernels.advect_scalar_numba(q, U.u, U.w, g.dx, g.dz, dt)),
        "advect_momentum": (lambda: kernels.advect_momentum_numpy(U.u, U.w, g.dx, g.dz, dt),
                            lambda: kernels.advect_momentum_numba(U.u, U.w, g.dx, g.dz, dt)),
        "convolve_zero": (lambda: kernels.convolve_zero_numpy(q, m.weights),
                          lambda: kernels.convolve_zero_numba(q, m.weights)),
    }
    rows = []
    for name, (f_np, f_nb) in cases.items():
        a, b = f_np(), f_nb()
        if isinstance(a, tuple):
            diff = max(np.abs(x - y).max() for x, y in zip(a, b))
        else:
            diff = np.abs(a - b).max()
        t_np, t_nb = best_of(f_np, repeat), best_of(f_nb, repeat)
        rows.append((name, n, t_np, t_nb, diff))
    return rows


def bench_step(n):
    g = Grid(n, n)
    var = BoundaryVariant("dirichlet_bottom", ZetaProfile.constant(0.5, g))
    xc, zc = g.centers()
    shape = np.cos(np.pi * xc) * np.cos(np.pi * zc)
    forcing = Forcing(1.0, var, F=lambda t: 0.01 * np.cos(2 * np.pi * t) * shape, g=lambda t: 1.0)
    params = PhysParams(alpha=1.0, g_mag=1.0, tau_star=0.5)
    law = LangevinLaw()
    x = State.rest(g)
    evolve(x, g, forcing, params, law, t0=0.0, t1=0.01, nsteps=1)
    t0 = time.perf_counter()
    evolve(x, g, forcing, params, law, t0=0.0, t1=0.2, nsteps=20)
    return (time.perf_counter() - t0) / 20


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"backend in use: {kernels.BACKEND}")
    print(f"{'kernel':16s} {'n':>5s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max diff':>9s}")
    for n in args.n:
        for name, nn, t_np, t_nb, diff in bench_grid(n, args.repeat, rng):
            print(f"{name:16s} {nn:5d} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:8.1f} {diff:9.1e}")
    for n in args.n:
        if n <= 128:
            print(f"full step ({kernels.BACKEND}) n={n}: {1e3 * bench_step(n):.1f} ms")


if __name__ == "__main__":
    main()

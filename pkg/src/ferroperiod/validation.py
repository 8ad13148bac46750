"""Quick invariant suite behind ``ferroperiod validate``.

Each check returns ``(ok, detail)``; the grid is capped at 32x32 so the
whole suite runs in seconds.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .config import Setup
from .constitutive import flux_a
from .grid import Grid, VectorField, divergence_fc
from .hydro import Mollifier, project, streamfunction_field
from .magnetostatics import MagnetostaticProblem, PotentialSolveOptions, operator, solve_potential
from .periodic import Forcing, State, energy, evolve_period, gamma_constant
from .thermal import VARIANTS, BoundaryVariant, ZetaProfile, check_max_principle, step_temperature


def _small(grid: Grid) -> Grid:
    return Grid(min(grid.nx, 32), min(grid.nz, 32), grid.Lx, grid.d)


def random_div_free(grid: Grid, rng, scale=1.0) -> VectorField:
    psi = np.zeros((grid.nx + 1, grid.nz + 1))
    psi[1:-1, 1:-1] = rng.standard_normal((grid.nx - 1, grid.nz - 1))
    V = streamfunction_field(psi, grid)
    return V * (scale / max(V.max_abs(), 1e-300))


def check_max_principle_runs(setup: Setup, rng, runs=3, steps=40):
    grid = _small(setup.grid)
    worst = 0.0
    for kind in VARIANTS:
        for _ in range(runs):
            c = rng.uniform(0.2, 1.0)
            zm = ZetaProfile.constant(c, grid, setup.forcing.T)
            zp = ZetaProfile.constant(rng.uniform(0.0, 1.0), grid, setup.forcing.T) if kind == "dirichlet_both" else None
            var = BoundaryVariant(kind, zm, zp)
            params = dataclasses.replace(setup.params, tau_star=var.tau_star)
            tau = rng.uniform(0.0, var.tau_star, grid.shape) - var.offset(0.0, grid)
            U = random_div_free(grid, rng)
            dt = 0.9 / (2.0 * (U.max_abs() / grid.dx + U.max_abs() / grid.dz))
            for n in range(steps):
                tau = step_temperature(tau, U, var, params, n * dt, dt, grid, check=False)
                rep = check_max_principle(tau, var.offset((n + 1) * dt, grid), var.tau_star)
                worst = max(worst, -rep.min, rep.max - var.tau_star)
                if not rep.ok:
                    return False, f"{kind}: tau left [0, tau_star] ({rep.min:.3e}, {rep.max:.3e})"
    return True, f"worst excursion {worst:.2e}"


def check_projection(setup: Setup, rng):
    grid = _small(setup.grid)
    V = VectorField(rng.standard_normal((grid.nx + 1, grid.nz)), rng.standard_normal((grid.nx, grid.nz + 1)))
    P, _ = project(V, grid)
    div = float(np.abs(divergence_fc(P, grid)).max()) / max(P.max_abs(), 1e-300)
    P2, _ = project(P, grid)
    idem = (P2 - P).max_abs()
    ok = div <= 1e-10 and P.boundary_max_abs() == 0.0 and idem <= 1e-10
    return ok, f"relative div {div:.1e}, idempotence {idem:.1e}"


def check_magnetostatics(setup: Setup, rng):
    grid = _small(setup.grid)
    xc, zc = grid.centers()
    phi = np.cos(np.pi * xc / grid.Lx) * np.cos(2 * np.pi * zc / grid.d) * rng.uniform(0.5, 3.0)
    phi -= phi.mean()
    b = rng.uniform(0.0, 1.0, grid.shape)
    F = operator(phi, b, setup.law, setup.params.M_S, grid)
    F -= F.mean()
    sol = solve_potential(MagnetostaticProblem(grid, setup.law, setup.params.M_S, b, F),
                          PotentialSolveOptions(picard_tol=1e-10))
    err = np.linalg.norm(sol.phi - phi) / np.linalg.norm(phi)
    return err <= 1e-9, f"manufactured relative error {err:.1e} in {sol.iterations} iterations"


def check_monotone_flux(setup: Setup, rng, n=2000):
    x1 = rng.standard_normal((n, 2)) * 3
    x2 = rng.standard_normal((n, 2)) * 3
    d = np.sum((flux_a(setup.law, x1) - flux_a(setup.law, x2)) * (x1 - x2), axis=1)
    return bool(d.min() >= -1e-14), f"min pairing {d.min():.2e}"


def check_gamma(setup: Setup, rng):
    g = gamma_constant(setup.params, setup.C_p)
    p = setup.params
    ref = min(p.mu / (4 * p.rho0 * setup.C_p ** 2), p.eta / (p.rho0 * p.cp * setup.C_p ** 2), p.mu / 4, p.eta)
    return g == ref and g > 0, f"gamma = {g:.6g}"


def check_rest_orbit(setup: Setup, rng):
    grid = Grid(8, 8, setup.grid.Lx, setup.grid.d)
    c = 0.5
    var = BoundaryVariant("dirichlet_bottom", ZetaProfile.constant(c, grid, setup.forcing.T))
    forcing = Forcing(setup.forcing.T, var)
    params = dataclasses.replace(setup.params, tau_star=c)
    x = evolve_period(State.rest(grid), grid, forcing, params, setup.law, nsteps=10)
    E = energy(x, params, grid)[0]
    return E <= 1e-24, f"rest energy after one period {E:.1e}"


def check_boundary_data(setup: Setup, rng):
    var = setup.forcing.variant
    T = var.T
    profiles = [var.zeta_minus] + ([var.zeta_plus] if var.zeta_plus is not None else [])
    for z in profiles:
        a, b = z.raw(0.0), z.raw(T)
        if np.abs(a - b).max() > 1e-10 * max(z.tau_star, 1.0):
            return False, "zeta(0) != zeta(T)"
        if z.zmin < -1e-12 * z.tau_star:
            return False, f"zeta < 0 (min {z.zmin:.3e})"
    return True, f"tau_star = {var.tau_star:.6g}"


def check_mollifier(setup: Setup, rng):
    grid = _small(setup.grid)
    m = Mollifier.build(3 * max(grid.dx, grid.dz), grid)
    s = float(m.weights.sum())
    return abs(s - 1.0) <= 1e-14 and m.weights.min() >= 0, f"kernel mass {s!r}"


CHECKS = [
    ("max_principle", check_max_principle_runs),
    ("projection", check_projection),
    ("magnetostatics", check_magnetostatics),
    ("monotone_flux", check_monotone_flux),
    ("gamma", check_gamma),
    ("rest_orbit", check_rest_orbit),
    ("boundary_data", check_boundary_data),
    ("mollifier", check_mollifier),
]


def run_suite(setup: Setup, seed=0):
    """``[(name, ok, detail), ...]``; exceptions count as failures."""
    rng = np.random.default_rng(seed)
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn(setup, rng)
        except Exception as exc:  # a crash is a failed invariant, reported not raised
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results


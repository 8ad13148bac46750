"""Period map and the search for time-periodic solutions.

One sub-step of the evolution is the operator splitting

    phi  <- h_map(tau_tilde(t))                    field at the old temperature
    S    <- kelvin_force(tau_tilde, H, g(t_mid))
    U    <- step_velocity(U, S)                    projection step
    tau  <- step_temperature(tau_tilde, U_new)     advection + implicit diffusion

with ``F`` and ``g`` sampled at the sub-step midpoint. Composing ``nsteps`` of
these over ``[0, T]`` gives the period map ``K``; a periodic solution is a
fixed point ``x = K(x)``, searched by damped Picard iteration with optional
Anderson mixing in the energy norm ``rho0 (|U|^2 + cp |tau_tilde|^2)``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constitutive import ChiLaw, PhysParams
from .errors import CFLError
from .grid import Grid, VectorField, divergence_fc, inner_cells, inner_faces
from .hydro import KelvinForceSpec, Mollifier, kelvin_force, step_velocity
from .magnetostatics import PotentialSolveOptions, h_map_solve
from .thermal import BoundaryVariant, check_periodic, step_temperature

MAX_HALVINGS = 4


def _zero_source(t):
    return 0.0


@dataclass
class Forcing:
    """Time-periodic data: source ``F(t)`` (cell array, zero mean or the
    scalar 0), gravity magnitude ``g(t)`` and the boundary variant."""

    T: float
    variant: BoundaryVariant
    F: Callable = _zero_source
    g: Callable = _zero_source

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("period T must be positive")
        if abs(self.variant.T - self.T) > 1e-12 * self.T:
            raise ValueError("boundary data period differs from the forcing period")
        check_periodic(self.F, self.T)
        check_periodic(self.g, self.T)

    def source(self, t, grid: Grid):
        return np.broadcast_to(np.asarray(self.F(t), dtype=float), grid.shape)

    def gravity(self, t) -> float:
        return float(self.g(t))


@dataclass
class State:
    U: VectorField
    tau_tilde: np.ndarray
    phi: np.ndarray
    t: float = 0.0

    @classmethod
    def rest(cls, grid: Grid, t=0.0) -> "State":
        return cls(VectorField.zeros(grid), grid.zeros(), grid.zeros(), t)

    def copy(self) -> "State":
        return State(self.U.copy(), self.tau_tilde.copy(), self.phi.copy(), self.t)


@dataclass
class StepInfo:
    """Passed to ``evolve`` callbacks after every (sub)step."""

    t: float
    dt: float
    H: VectorField
    pressure: np.ndarray
    potential_iterations: int
    div_max: float


@dataclass
class PeriodicOptions:
    tol_period: float = 1e-8
    max_outer: int = 50
    damping: float = 1.0
    anderson_depth: int = 3
    nsteps: int = 200
    potential: PotentialSolveOptions = field(default_factory=PotentialSolveOptions)

    def __post_init__(self):
        if not self.tol_period > 0:
            raise ValueError("tol_period must be positive")
        if self.max_outer < 0 or self.anderson_depth < 0:
            raise ValueError("max_outer and anderson_depth must be >= 0")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.nsteps < 1:
            raise ValueError("nsteps must be >= 1")


@dataclass
class PeriodicSolveReport:
    converged: bool
    iterations: int
    defect_history: list
    energy_history: list
    gamma_estimate: float
    final_state: State
    relative_defect: float = math.nan


# ---------------------------------------------------------------------------
# energy and constants
# ---------------------------------------------------------------------------

def energy(x: State, params: PhysParams, grid: Grid):
    """``E = rho0 (|U|^2 + cp |tau_tilde|^2)`` and its two parts."""
    kin = params.rho0 * inner_faces(x.U, x.U, grid)
    th = params.rho0 * params.cp * inner_cells(x.tau_tilde, x.tau_tilde, grid)
    return kin + th, {"kinetic": kin, "thermal": th}


def energy_distance(a: State, b: State, params: PhysParams, grid: Grid) -> float:
    diff = State(a.U - b.U, a.tau_tilde - b.tau_tilde, a.phi)
    return math.sqrt(energy(diff, params, grid)[0])


def poincare_constant(grid: Grid) -> float:
    """Default ``C_p``: Poincare constant of the box for functions vanishing
    on part of the boundary, bounded by ``max(Lx, d) / pi``."""
    return max(grid.Lx, grid.d) / math.pi


def gamma_constant(params: PhysParams, C_p: float) -> float:
    rho0, mu, eta, cp = params.rho0, params.mu, params.eta, params.cp
    return min(mu / (4.0 * rho0 * C_p ** 2), eta / (rho0 * cp * C_p ** 2), mu / 4.0, eta)


def _effective(params: PhysParams, forcing: Forcing) -> PhysParams:
    ts = forcing.variant.tau_star
    if params.tau_star == ts:
        return params
    return dataclasses.replace(params, tau_star=ts)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

def _step(x: State, grid, forcing, params, law, spec, mollifier, t, dt, popts, callback):
    tm = t + 0.5 * dt
    zf = forcing.variant.offset(t, grid)
    H, sol = h_map_solve(x.tau_tilde, zf, forcing.source(tm, grid), params, law, grid, popts, x.phi)
    S = kelvin_force(x.tau_tilde, zf, H, law, params, grid, spec, g_mag=forcing.gravity(tm), mollifier=mollifier)
    U, p = step_velocity(x.U, S, params, dt, grid)
    tau_tilde = step_temperature(x.tau_tilde, U, forcing.variant, params, t, dt, grid)
    new = State(U, tau_tilde, sol.phi, t + dt)
    if callback is not None:
        div = float(np.abs(divergence_fc(U, grid)).max())
        callback(new, StepInfo(t + dt, dt, H, p, sol.iterations, div))
    return new


def _advance(x, grid, forcing, params, law, spec, mollifier, t, dt, popts, callback, depth=0):
    try:
        return _step(x, grid, forcing, params, law, spec, mollifier, t, dt, popts, callback)
    except CFLError:
        if depth >= MAX_HALVINGS:
            raise
    y = _advance(x, grid, forcing, params, law, spec, mollifier, t, 0.5 * dt, popts, callback, depth + 1)
    return _advance(y, grid, forcing, params, law, spec, mollifier, t + 0.5 * dt, 0.5 * dt, popts,
                    callback, depth + 1)


def evolve(x0: State, grid: Grid, forcing: Forcing, params: PhysParams, law: ChiLaw,
           spec: KelvinForceSpec = KelvinForceSpec(), t0=0.0, t1=None, nsteps=200,
           potential: PotentialSolveOptions | None = None, callback=None) -> State:
    """Evolve ``x0`` from ``t0`` to ``t1`` (default ``t0 + T``) in ``nsteps``
    uniform steps. A step whose CFL bound fails is split in halves, at most
    four levels deep, before :class:`CFLError` propagates.

    ``callback(state, info)`` is invoked after every (sub)step.
    """
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    t1 = t0 + forcing.T if t1 is None else t1
    spec.validate(grid)
    params = _effective(params, forcing)
    mollifier = Mollifier.build(spec.epsilon, grid) if spec.regularized else None
    dt = (t1 - t0) / nsteps
    x = x0.copy()
    for n in range(nsteps):
        x = _advance(x, grid, forcing, params, law, spec, mollifier, t0 + n * dt, dt, potential, callback)
    x.t = t1
    return x


def evolve_period(x0: State, grid: Grid, forcing: Forcing, params: PhysParams, law: ChiLaw,
                  spec: KelvinForceSpec = KelvinForceSpec(), nsteps=200,
                  potential: PotentialSolveOptions | None = None, callback=None) -> State:
    """The period map ``K``: one period from phase 0, returned at phase 0."""
    x = evolve(x0, grid, forcing, params, law, spec, 0.0, forcing.T, nsteps, potential, callback)
    x.t = 0.0
    return x


# ---------------------------------------------------------------------------
# fixed point search
# ---------------------------------------------------------------------------

class _Packer:
    """Flatten states into energy-weighted vectors (Euclidean norm of the
    vector equals the energy norm)."""

    def __init__(self, grid: Grid, params: PhysParams):
        self.grid = grid
        self.wu = math.sqrt(params.rho0 * grid.cell_area)
        self.wt = math.sqrt(params.rho0 * params.cp * grid.cell_area)
        self.nu = (grid.nx - 1) * grid.nz
        self.nw = grid.nx * (grid.nz - 1)

    def pack(self, x: State) -> np.ndarray:
        return np.concatenate([self.wu * x.U.flat_interior(), self.wt * x.tau_tilde.ravel()])

    def unpack(self, v: np.ndarray, phi, t=0.0) -> State:
        g = self.grid
        U = VectorField.zeros(g)
        U.u[1:-1] = (v[: self.nu] / self.wu).reshape(g.nx - 1, g.nz)
        U.w[:, 1:-1] = (v[self.nu: self.nu + self.nw] / self.wu).reshape(g.nx, g.nz - 1)
        tau = (v[self.nu + self.nw:] / self.wt).reshape(g.shape)
        return State(U, tau, phi, t)


def _anderson_update(x, f, dX, dF, theta):
    """Type-II Anderson step from the history of iterate and residual
    differences; plain damped Picard when the history is empty."""
    if not dX:
        return x + theta * f
    Xm = np.column_stack(dX)
    Fm = np.column_stack(dF)
    gamma, *_ = np.linalg.lstsq(Fm, f, rcond=None)
    return x + theta * f - (Xm + theta * Fm) @ gamma


def _observed_rate(defects, T):
    d = np.asarray(defects, dtype=float)
    d = d[d > 0]
    if d.size < 2:
        return math.nan
    ratios = d[1:] / d[:-1]
    return float(-np.log(np.median(ratios)) / T)


def find_periodic(guess: State, grid: Grid, forcing: Forcing, params: PhysParams, law: ChiLaw,
                  spec: KelvinForceSpec = KelvinForceSpec(), opts: PeriodicOptions | None = None,
                  callback=None) -> PeriodicSolveReport:
    """Iterate the period map until ``|K(x) - x|_E <= tol * max(1, |x|_E)``.

    The guess is always mapped once; ``iterations`` counts period-map
    evaluations and ``max_outer`` bounds the number of updates of ``x``.
    Mixed iterates have their temperature clipped back into
    ``[0, tau_star]``; velocity mixing preserves the discrete divergence.
    Non-convergence is reported, not raised.
    """
    opts = opts or PeriodicOptions()
    params = _effective(params, forcing)
    pk = _Packer(grid, params)
    z0 = forcing.variant.offset(0.0, grid)
    lo, hi = -z0, params.tau_star - z0

    x_state = guess.copy()
    x_state.t = 0.0
    x = pk.pack(x_state)
    defects, energies = [], []
    dX, dF = [], []
    prev_x = prev_f = None
    converged = False
    rel = math.nan
    iters = 0
    best = None
    for k in range(opts.max_outer + 1):
        Kx_state = evolve_period(x_state, grid, forcing, params, law, spec, opts.nsteps, opts.potential, callback)
        iters += 1
        Kx = pk.pack(Kx_state)
        f = Kx - x
        d = float(np.linalg.norm(f))
        xn = float(np.linalg.norm(x))
        defects.append(d)
        energies.append(xn ** 2)
        rel = d / max(1.0, xn)
        if best is None or d < best[0]:
            best = (d, x_state, rel)
        if rel <= opts.tol_period:
            converged = True
            break
        if k == opts.max_outer:
            break
        if prev_x is not None and opts.anderson_depth > 0:
            dX.append(x - prev_x)
            dF.append(f - prev_f)
            if len(dX) > opts.anderson_depth:
                dX.pop(0)
                dF.pop(0)
        prev_x, prev_f = x, f
        x_new = _anderson_update(x, f, dX, dF, opts.damping)
        x_state = pk.unpack(x_new, Kx_state.phi)
        x_state.tau_tilde = np.clip(x_state.tau_tilde, lo, hi)
        x = pk.pack(x_state)

    final = x_state if converged else best[1]
    return PeriodicSolveReport(converged, iters, defects, energies, _observed_rate(defects, forcing.T),
                               final, rel if converged else best[2])


def periodicity_defect(x: State, grid, forcing, params, law, spec=KelvinForceSpec(), nsteps=200,
                       potential=None) -> float:
    """``|K(x) - x|_E / max(1, |x|_E)`` from an independent re-evolution
    (the normalization of the convergence test)."""
    params = _effective(params, forcing)
    y = evolve_period(x, grid, forcing, params, law, spec, nsteps, potential)
    n = math.sqrt(energy(x, params, grid)[0])
    d = energy_distance(y, x, params, grid)
    return d / max(1.0, n)

"""Nonlinear magnetostatic potential problem.

For given ``b >= 0`` and zero-mean ``F`` find zero-mean ``phi`` with

    div( grad phi + M_S b a(grad phi) ) = F,   flux . nu = 0 on dD.

The nonlinear part is discretized variationally: the field is averaged to
cell centres, ``xi_c = (avg u-faces, avg w-faces)``, the flux
``M_S b_c a(xi_c)`` is formed at centres and averaged back to interior faces.
This is exactly ``-G^T (M_S b a(G phi))`` for the centring map ``G``, so the
discrete operator is the gradient of the convex functional

    J(phi) = sum_c [ |grad phi|^2 / 2 + M_S b_c kappa(|xi_c|) + F phi ] |c|

and inherits the strong monotonicity of the continuous problem.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from .constitutive import ChiLaw, PhysParams, flux_a, thermal_factor_b
from .errors import CompatibilityError, ConvergenceError
from .grid import Grid, VectorField, divergence_fc, gradient_cc, laplacian_matrix, zero_mean_project


@dataclass
class PotentialSolveOptions:
    picard_tol: float = 1e-10
    picard_max: int = 200
    inner_tol: float = 1e-13
    inner_max: int = 5000
    #: relaxation of the Picard update; ``None`` picks ``2 / (2 + q)`` with
    #: ``q = M_S * max(b) * chi1`` (the optimal factor for the linearized map)
    damping: float | None = None
    #: ``'direct'`` (pinned sparse LU) or ``'cg'`` (zero-mean projected CG)
    inner: str = "direct"

    def __post_init__(self):
        if not (self.picard_tol > 0 and self.inner_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.picard_max < 1 or self.inner_max < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.damping is not None and not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.inner not in ("direct", "cg"):
            raise ValueError("inner solver must be 'direct' or 'cg'")


@dataclass
class MagnetostaticProblem:
    grid: Grid
    law: ChiLaw
    M_S: float
    b_field: np.ndarray
    F_field: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F_field, dtype=float)
        scale = float(np.abs(F).max()) if F.size else 0.0
        if abs(F.mean()) > 1e-10 * scale:
            raise CompatibilityError(f"source F has nonzero mean {F.mean():.3e}; the Neumann problem needs zero mean")
        b = np.asarray(self.b_field, dtype=float)
        if np.any(b < -1e-10 * max(float(np.abs(b).max()), 1e-300)):
            raise CompatibilityError("b field must be nonnegative")
        self.F_field = zero_mean_project(F)
        self.b_field = np.maximum(b, 0.0)


@dataclass
class PotentialSolve:
    """Result of :func:`solve_potential`."""

    phi: np.ndarray
    iterations: int
    residual: float
    residual_history: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# discrete operators
# ---------------------------------------------------------------------------

def centre_field(H: VectorField):
    """Cell-centred components of a face field (two-face averages)."""
    return H.cell_average()


def field_magnitude(H: VectorField, delta=0.0):
    """``|H|`` at cell centres, optionally regularized ``sqrt(|H|^2 + delta^2)``."""
    hx, hz = centre_field(H)
    return np.sqrt(hx * hx + hz * hz + delta * delta)


def nonlinear_flux(phi, b, law: ChiLaw, M_S, grid: Grid) -> VectorField:
    """Face flux ``M_S b a(grad phi)`` averaged from cell centres onto
    interior faces; boundary faces carry zero."""
    g = gradient_cc(phi, grid)
    hx, hz = centre_field(g)
    a = flux_a(law, np.stack([hx, hz], axis=-1))
    cx = M_S * b * a[..., 0]
    cz = M_S * b * a[..., 1]
    q = VectorField.zeros(grid)
    q.u[1:-1] = 0.5 * (cx[:-1] + cx[1:])
    q.w[:, 1:-1] = 0.5 * (cz[:, :-1] + cz[:, 1:])
    return q


def operator(phi, b, law: ChiLaw, M_S, grid: Grid):
    """``div(grad phi + M_S b a(grad phi))`` on cells."""
    g = gradient_cc(phi, grid)
    return divergence_fc(g + nonlinear_flux(phi, b, law, M_S, grid), grid)


def energy_functional(phi, b, F, law: ChiLaw, M_S, grid: Grid) -> float:
    """Convex functional whose critical point solves the discrete problem."""
    g = gradient_cc(phi, grid)
    hx, hz = centre_field(g)
    r = np.hypot(hx, hz)
    area = grid.cell_area
    dirichlet = 0.5 * (np.sum(g.u ** 2) + np.sum(g.w ** 2))
    return float((dirichlet + np.sum(M_S * b * law.kappa(r)) + np.sum(F * phi)) * area)


def residual_norm(phi, problem: MagnetostaticProblem) -> float:
    """``||op(phi) - F|| / ||F||`` (absolute when ``F = 0``)."""
    r = operator(phi, problem.b_field, problem.law, problem.M_S, problem.grid) - problem.F_field
    nF = np.linalg.norm(problem.F_field)
    return float(np.linalg.norm(r) / nF) if nF > 0 else float(np.linalg.norm(r))


@lru_cache(maxsize=16)
def _neumann_lu(grid: Grid):
    # pin the first unknown: the remaining rows determine phi up to the
    # zero-mean shift applied afterwards (rows of the Neumann matrix sum to 0)
    L = laplacian_matrix(grid, "neumann").tolil()
    L[0, :] = 0.0
    L[0, 0] = 1.0
    return spla.splu(L.tocsc())


def solve_neumann_poisson(rhs, grid: Grid, method="direct", tol=1e-13, maxiter=5000):
    """Zero-mean solution of the pure-Neumann ``lap phi = rhs``.

    ``rhs`` is projected to zero mean first (its compatibility is the
    caller's responsibility).
    """
    rhs = zero_mean_project(rhs)
    if method == "direct":
        r = rhs.ravel().copy()
        r[0] = 0.0
        phi = _neumann_lu(grid).solve(r).reshape(grid.shape)
        return zero_mean_project(phi)
    L = laplacian_matrix(grid, "neumann")
    n = L.shape[0]
    proj = spla.LinearOperator((n, n), matvec=lambda v: zero_mean_project(v), dtype=float)
    neg = spla.LinearOperator((n, n), matvec=lambda v: -(L @ zero_mean_project(v)), dtype=float)
    x, info = spla.cg(neg, -rhs.ravel(), rtol=tol, atol=0.0, maxiter=maxiter, M=proj)
    if info != 0:
        raise ConvergenceError(f"inner CG stagnated (info={info})")
    return zero_mean_project(x.reshape(grid.shape))


def auto_damping(problem: MagnetostaticProblem) -> float:
    q = problem.M_S * float(np.max(problem.b_field, initial=0.0)) * problem.law.chi1
    return 2.0 / (2.0 + q)


def solve_potential(problem: MagnetostaticProblem, opts: PotentialSolveOptions | None = None,
                    warm_start=None, track_energy=False) -> PotentialSolve:
    """Picard iteration on the Laplacian splitting.

    ``phi <- (1 - theta) phi + theta * lap^{-1}(F - div(M_S b a(grad phi)))``,
    each iterate projected to zero mean. Raises
    :class:`~ferroperiod.errors.ConvergenceError` when ``picard_max`` is
    reached without meeting ``picard_tol``.
    """
    opts = opts or PotentialSolveOptions()
    grid, law, M_S = problem.grid, problem.law, problem.M_S
    b, F = problem.b_field, problem.F_field
    theta = opts.damping if opts.damping is not None else auto_damping(problem)
    nF = np.linalg.norm(F)

    phi = grid.zeros() if warm_start is None else zero_mean_project(warm_start)
    res_hist, en_hist = [], []
    for it in range(opts.picard_max + 1):
        nl = divergence_fc(nonlinear_flux(phi, b, law, M_S, grid), grid)
        r = divergence_fc(gradient_cc(phi, grid), grid) + nl - F
        res = float(np.linalg.norm(r) / nF) if nF > 0 else float(np.linalg.norm(r))
        res_hist.append(res)
        if track_energy:
            en_hist.append(energy_functional(phi, b, F, law, M_S, grid))
        if res <= opts.picard_tol:
            return PotentialSolve(phi, it, res, res_hist, en_hist)
        if it == opts.picard_max:
            break
        target = solve_neumann_poisson(F - nl, grid, opts.inner, opts.inner_tol, opts.inner_max)
        phi = target if theta == 1.0 else zero_mean_project((1.0 - theta) * phi + theta * target)
    raise ConvergenceError(
        f"magnetostatic Picard iteration did not reach {opts.picard_tol:g} in {opts.picard_max} "
        f"iterations (last relative residual {res_hist[-1]:.3e})")


def field_H(phi, grid: Grid) -> VectorField:
    """``H = grad phi`` with homogeneous Neumann boundary faces."""
    return gradient_cc(phi, grid, "neumann")


def h_map(tau_tilde, zeta_field, F_field, params: PhysParams, law: ChiLaw, grid: Grid,
          opts: PotentialSolveOptions | None = None, warm_start=None) -> VectorField:
    """Temperature-to-field map ``tau_tilde -> H``."""
    H, _ = h_map_solve(tau_tilde, zeta_field, F_field, params, law, grid, opts, warm_start)
    return H


def h_map_solve(tau_tilde, zeta_field, F_field, params: PhysParams, law: ChiLaw, grid: Grid,
                opts: PotentialSolveOptions | None = None, warm_start=None):
    """As :func:`h_map` but also returns the :class:`PotentialSolve`."""
    b = thermal_factor_b(params.tau_star, zeta_field, tau_tilde)
    b = np.broadcast_to(b, grid.shape).astype(float)
    problem = MagnetostaticProblem(grid, law, params.M_S, b, F_field)
    sol = solve_potential(problem, opts, warm_start)
    return field_H(sol.phi, grid), sol

"""Navier-Stokes step with Kelvin and buoyancy forcing.

Momentum: donor-cell advection (explicit), force (explicit), backward-Euler
viscous diffusion with no-slip walls, then a Chorin projection through the
pure-Neumann pressure Poisson problem. On the MAC grid the projection is
exact: ``div_h U_new`` is zero up to the accuracy of the sparse LU solve.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constitutive import DELTA_A, ChiLaw, PhysParams
from .errors import CFLError
from .grid import Grid, VectorField, divergence_fc, gradient_cc, inner_faces, velocity_laplacians
from .kernels import advect_momentum, convolve_zero, momentum_rate
from .magnetostatics import field_magnitude, solve_neumann_poisson

PROJ_TOL = 1e-10


@dataclass(frozen=True)
class KelvinForceSpec:
    regularized: bool = False
    epsilon: float = 0.0
    form: str = "pointwise"

    def __post_init__(self):
        if self.form not in ("pointwise", "conservative"):
            raise ValueError("force form must be 'pointwise' or 'conservative'")
        if self.regularized and not self.epsilon > 0:
            raise ValueError("regularized force needs epsilon > 0")

    def validate(self, grid: Grid):
        if self.regularized and self.epsilon < 2 * max(grid.dx, grid.dz) - 1e-12:
            raise ValueError("mollifier radius must span at least two cells")


@dataclass
class Mollifier:
    """Truncated Gaussian (std ``epsilon / 2``, cut at ``epsilon``),
    renormalized to unit discrete mass."""

    epsilon: float
    weights: np.ndarray

    @classmethod
    def build(cls, epsilon: float, grid: Grid) -> "Mollifier":
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        kx = int(np.floor(epsilon / grid.dx + 1e-12))
        kz = int(np.floor(epsilon / grid.dz + 1e-12))
        ox = np.arange(-kx, kx + 1) * grid.dx
        oz = np.arange(-kz, kz + 1) * grid.dz
        X, Z = np.meshgrid(ox, oz, indexing="ij")
        r2 = X ** 2 + Z ** 2
        sigma = epsilon / 2.0
        w = np.where(r2 <= epsilon ** 2 * (1 + 1e-12), np.exp(-r2 / (2 * sigma ** 2)), 0.0)
        return cls(epsilon, w / w.sum())


def mollify(f, m: Mollifier):
    """Convolution with the kernel, ``f`` extended by zero outside ``D``."""
    return convolve_zero(np.ascontiguousarray(f, dtype=float), m.weights)


def _face_avg_u(c):
    return 0.5 * (c[:-1] + c[1:])


def _face_avg_w(c):
    return 0.5 * (c[:, :-1] + c[:, 1:])


def buoyancy(b, params: PhysParams, grid: Grid, g_mag=None) -> VectorField:
    """``rho0 (1 + alpha b) g`` with ``g = -|g| e_z`` on interior w-faces."""
    g_mag = params.g_mag if g_mag is None else g_mag
    S = VectorField.zeros(grid)
    S.w[:, 1:-1] = -params.rho0 * (1.0 + params.alpha * _face_avg_w(b)) * g_mag
    return S


def kelvin_force(tau_tilde, zeta_field, H: VectorField, law: ChiLaw, params: PhysParams, grid: Grid,
                 spec: KelvinForceSpec = KelvinForceSpec(), g_mag=None, mollifier=None) -> VectorField:
    """Body force on interior faces (boundary faces stay zero).

    ``pointwise``: ``mu0 M_S b chi(|H|) grad|H| + rho0 (1 + alpha b) g``.
    ``conservative``: ``mu0 M_S kappa(|H|) grad(tau_tilde + zeta) + buoyancy``,
    which differs from the pointwise form by the gradient of the magnetic
    pressure ``mu0 M_S b kappa(|H|)``.
    With ``spec.regularized`` ``|H|`` is replaced by its mollification.
    """
    tau_tilde = np.asarray(tau_tilde, dtype=float)
    if tau_tilde.shape != grid.shape or H.u.shape != (grid.nx + 1, grid.nz):
        raise ValueError("field shapes do not match the grid")
    tau = tau_tilde + zeta_field
    b = np.maximum(params.tau_star - tau, 0.0)
    hmag = field_magnitude(H, DELTA_A)
    if spec.regularized:
        m = mollifier if mollifier is not None else Mollifier.build(spec.epsilon, grid)
        hmag = mollify(hmag, m)
    c = params.mu0 * params.M_S
    S = buoyancy(b, params, grid, g_mag)
    if spec.form == "pointwise":
        coef = b * law.chi(hmag)
        gh = gradient_cc(hmag, grid)
        S.u[1:-1] += c * _face_avg_u(coef) * gh.u[1:-1]
        S.w[:, 1:-1] += c * _face_avg_w(coef) * gh.w[:, 1:-1]
    else:
        k = law.kappa(hmag)
        gt = gradient_cc(tau, grid)
        S.u[1:-1] += c * _face_avg_u(k) * gt.u[1:-1]
        S.w[:, 1:-1] += c * _face_avg_w(k) * gt.w[:, 1:-1]
    return S


def magnetic_pressure(tau, H: VectorField, law: ChiLaw, params: PhysParams):
    """``p_m = mu0 M_S (tau_star - tau) kappa(|H|)`` at cell centres."""
    return params.mu0 * params.M_S * (params.tau_star - np.asarray(tau)) * law.kappa(field_magnitude(H))


@lru_cache(maxsize=16)
def _viscous_lu(grid: Grid, dt: float, rho0: float, mu: float):
    lu, lw = velocity_laplacians(grid)
    Au = (rho0 / dt) * sp.identity(lu.shape[0], format="csc") - mu * lu
    Aw = (rho0 / dt) * sp.identity(lw.shape[0], format="csc") - mu * lw
    return spla.splu(Au.tocsc()), spla.splu(Aw.tocsc())


def project(V: VectorField, grid: Grid):
    """Discrete Helmholtz projection onto div-free fields vanishing in the
    normal direction on ``dD``. Returns ``(V_div_free, q)`` with
    ``V = V_div_free + grad q``."""
    V = V.copy()
    V.u[[0, -1], :] = 0.0
    V.w[:, [0, -1]] = 0.0
    q = solve_neumann_poisson(divergence_fc(V, grid), grid)
    gq = gradient_cc(q, grid)
    return V - gq, q


def velocity_cfl(U: VectorField, grid: Grid, dt):
    return dt * momentum_rate(U.u, U.w, grid.dx, grid.dz)


def step_velocity(U: VectorField, S: VectorField, params: PhysParams, dt, grid: Grid):
    """One projection step; returns ``(U_new, p)``.

    The force is Helmholtz-split first: only its div-free part enters the
    viscous solve, its gradient part is added to the pressure.
    """
    if velocity_cfl(U, grid, dt) > 1.0 + 1e-12:
        raise CFLError(f"momentum CFL number {velocity_cfl(U, grid, dt):.3f} > 1")
    u_adv, w_adv = advect_momentum(np.ascontiguousarray(U.u), np.ascontiguousarray(U.w), grid.dx, grid.dz, dt)
    rho0 = params.rho0
    lu_u, lu_w = _viscous_lu(grid, float(dt), rho0, params.mu)
    # the gradient part of S goes straight to the pressure, so a hydrostatic
    # force leaves a fluid at rest untouched by the viscous solve
    S_df, p_force = project(S, grid)
    rhs_u = (rho0 / dt) * u_adv[1:-1] + S_df.u[1:-1]
    rhs_w = (rho0 / dt) * w_adv[:, 1:-1] + S_df.w[:, 1:-1]
    Us = VectorField.zeros(grid)
    Us.u[1:-1] = lu_u.solve(rhs_u.ravel()).reshape(rhs_u.shape)
    Us.w[:, 1:-1] = lu_w.solve(rhs_w.ravel()).reshape(rhs_w.shape)
    U_new, q = project(Us, grid)
    # U* - (dt / rho0) grad p = U_new
    return U_new, (rho0 / dt) * q + p_force


def weak_force_pairing(S: VectorField, V: VectorField, grid: Grid, tol=1e-8) -> float:
    """``int S . V`` for a discretely div-free test field ``V`` vanishing on ``dD``."""
    scale = max(V.max_abs(), 1e-300) / min(grid.dx, grid.dz)
    if np.abs(divergence_fc(V, grid)).max() > tol * scale or V.boundary_max_abs() > 0:
        raise ValueError("test field must be discretely divergence-free and vanish on the boundary")
    return inner_faces(S, V, grid)


def streamfunction_field(psi, grid: Grid) -> VectorField:
    """Velocity ``(d psi/dz, -d psi/dx)`` from a corner streamfunction
    ``psi`` of shape ``(nx + 1, nz + 1)``; exactly div-free, and zero on the
    boundary when ``psi`` vanishes on the boundary corners."""
    V = VectorField.zeros(grid)
    V.u[:] = (psi[:, 1:] - psi[:, :-1]) / grid.dz
    V.w[:] = -(psi[1:, :] - psi[:-1, :]) / grid.dx
    return V

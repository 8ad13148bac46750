"""Temperature transport with the three boundary-condition variants.

The evolved unknown is the shifted temperature ``tau_tilde = tau - zeta_ext``
where ``zeta_ext`` extends the boundary data into the domain:

* ``dirichlet_bottom``: ``zeta_ext(t, x, z) = zeta(t, x)``;
* ``dirichlet_both``: linear in ``z`` between ``zeta_minus`` and ``zeta_plus``;
* ``robin_bottom``: ``zeta_ext = 0`` (the unknown is ``tau`` itself and
  ``b = tau_star - tau``).

One step = donor-cell advection (explicit) followed by backward-Euler
diffusion. Written in ``tau`` this is

    rho0 cp (tau^{n+1} - A(U) tau^n) / dt - eta lap_h tau^{n+1} = 0

with the variant's boundary data at ``t + dt``. Subtracting ``zeta_ext`` gives
the ``tau_tilde`` equation with the sources ``-rho0 cp U.grad zeta`` (same
upwind operator) and ``Z(zeta) = -rho0 cp dzeta/dt + eta lap zeta`` where the
time derivative is the step difference quotient. Both the advection matrix
and the implicit matrix are M-matrices, so ``0 <= tau <= tau_star`` holds to
round-off.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .constitutive import PhysParams, tol_clamp
from .errors import CFLError, CompatibilityError, MaxPrincipleError
from .grid import Grid, VectorField, laplacian_cc, laplacian_matrix
from .kernels import advect_scalar, scalar_inflow_rate

VARIANTS = ("dirichlet_bottom", "dirichlet_both", "robin_bottom")


class ZetaProfile:
    """Time-periodic boundary temperature ``zeta(t, x_hat)`` sampled at the
    horizontal cell centres of a grid.

    Build with :meth:`constant`, :meth:`from_samples` (periodic cubic
    spline in time) or :meth:`from_function` (closed form with its time
    derivative).
    """

    def __init__(self, T, x, value, rate, samples=None, kind="function"):
        if not T > 0:
            raise ValueError("period T must be positive")
        self.T = float(T)
        self.x = np.asarray(x, dtype=float)
        self._value = value
        self._rate = rate
        self.kind = kind
        self._samples = samples
        self.zmin, self.tau_star = self._extrema()
        if self.zmin < -1e-12 * max(abs(self.tau_star), 1.0):
            raise CompatibilityError(f"boundary temperature zeta must be >= 0 (min {self.zmin:.3e})")
        if not self.tau_star > 0:
            raise CompatibilityError("tau_star = sup zeta must be > 0")

    # construction --------------------------------------------------------

    @classmethod
    def constant(cls, c, grid: Grid, T=1.0):
        x = grid.xc
        return cls(T, x, lambda t: np.full(x.shape, float(c)), lambda t: np.zeros(x.shape), kind="constant")

    @classmethod
    def from_function(cls, fn, dfn, grid: Grid, T):
        """``fn(t, x)`` and ``dfn(t, x) = d fn / dt`` evaluated at cell centres."""
        x = grid.xc
        check_periodic(lambda t: np.broadcast_to(fn(t, x), x.shape), T)
        return cls(T, x, lambda t: np.broadcast_to(np.asarray(fn(t, x), float), x.shape).copy(),
                   lambda t: np.broadcast_to(np.asarray(dfn(t, x), float), x.shape).copy())

    @classmethod
    def from_samples(cls, samples, grid: Grid, T, include_endpoint=False):
        """``samples[k, i]`` at ``t_k = k T / nt``; with ``include_endpoint``
        the last row is ``t = T`` and must equal the first."""
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != grid.nx:
            raise ValueError(f"zeta samples must have shape (nt, {grid.nx})")
        if include_endpoint:
            if not np.allclose(samples[0], samples[-1], rtol=1e-12, atol=1e-12 * np.abs(samples).max()):
                raise CompatibilityError("zeta(0) != zeta(T): boundary data is not time-periodic")
            samples = samples[:-1]
        nt = samples.shape[0]
        if nt < 3:
            raise ValueError("need at least 3 time samples per period")
        t = np.arange(nt + 1) * T / nt
        spline = CubicSpline(t, np.vstack([samples, samples[:1]]), bc_type="periodic", axis=0)
        d1 = spline.derivative()
        return cls(T, grid.xc, lambda tt: spline(tt % T), lambda tt: d1(tt % T), samples=samples, kind="samples")

    # evaluation ----------------------------------------------------------

    def __call__(self, t):
        """``zeta(t)`` on the cell centres, guarded into ``[0, tau_star]``."""
        return np.clip(self._value(t), 0.0, self.tau_star)

    def raw(self, t):
        return np.asarray(self._value(t), dtype=float)

    def rate(self, t):
        """``d zeta / dt`` at ``t``."""
        return np.asarray(self._rate(t), dtype=float)

    def samples(self, nt=64):
        """``(times, values)`` over one period, ``nt`` uniform samples."""
        if self._samples is not None and nt == self._samples.shape[0]:
            return np.arange(nt) * self.T / nt, self._samples.copy()
        t = np.arange(nt) * self.T / nt
        return t, np.array([self.raw(tk) for tk in t])

    def _extrema(self):
        if self.kind == "constant":
            v = self.raw(0.0)
            return float(v.min()), float(v.max())
        return sup_inf(self.raw, self.T)


def sup_inf(value, T, n=512):
    """``(inf, sup)`` of ``value(t)[i]`` over one period: dense scan, then a
    bounded scalar search around the best sample of the extremal column."""
    t = np.arange(n) * T / n
    vals = np.array([value(tk) for tk in t])
    h = T / n
    out = []
    for sign in (1.0, -1.0):
        k, i = np.unravel_index(np.argmax(sign * vals), vals.shape)
        res = minimize_scalar(lambda s: -sign * value(s)[i], bounds=(t[k] - h, t[k] + h),
                              method="bounded", options={"xatol": 1e-12 * T})
        out.append(sign * max(sign * vals[k, i], -res.fun))
    return float(out[1]), float(out[0])


def check_periodic(fn, T, rtol=1e-12):
    """Raise unless ``fn(0) == fn(T)`` samplewise."""
    a = np.asarray(fn(0.0), dtype=float)
    b = np.asarray(fn(T), dtype=float)
    scale = max(float(np.abs(a).max(initial=0.0)), float(np.abs(b).max(initial=0.0)), 1e-300)
    if np.abs(a - b).max(initial=0.0) > rtol * scale:
        raise CompatibilityError("descriptor is not time-periodic: value(0) != value(T)")


def check_neumann_compatible(profile: ZetaProfile, Lx, tol=5e-2, nt=16):
    """Reject data with a clear nonzero horizontal slope at the endpoints
    (quadratic extrapolation of the first/last three cell values)."""
    x = profile.x
    if x.size < 3:
        return
    for t in np.arange(nt) * profile.T / nt:
        z = profile.raw(t)
        scale = max(float(np.ptp(z)), 1e-12 * max(profile.tau_star, 1.0))
        for xs, zs, x0 in ((x[:3], z[:3], 0.0), (x[-3:], z[-3:], Lx)):
            c = np.polyfit(xs - x0, zs, 2)
            slope = c[1]
            if abs(slope) * Lx > tol * scale and np.ptp(z) > 1e-12 * profile.tau_star:
                raise CompatibilityError(
                    f"zeta violates the lateral Neumann compatibility (endpoint slope {slope:.3e})")


@dataclass
class BoundaryVariant:
    kind: str
    zeta_minus: ZetaProfile
    zeta_plus: ZetaProfile | None = None

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ValueError(f"unknown boundary variant {self.kind!r}")
        if self.kind == "dirichlet_both" and self.zeta_plus is None:
            raise ValueError("dirichlet_both needs zeta_plus")
        if self.zeta_plus is not None and self.zeta_plus.T != self.zeta_minus.T:
            raise ValueError("zeta_minus and zeta_plus must share the period")

    @property
    def T(self):
        return self.zeta_minus.T

    @property
    def tau_star(self) -> float:
        if self.kind == "dirichlet_both":
            return max(self.zeta_minus.tau_star, self.zeta_plus.tau_star)
        return self.zeta_minus.tau_star

    @property
    def bc(self) -> str:
        return self.kind

    def offset(self, t, grid: Grid) -> np.ndarray:
        """The extension ``zeta_ext(t)`` on cell centres."""
        if self.kind == "robin_bottom":
            return grid.zeros()
        zm = self.zeta_minus(t)
        if self.kind == "dirichlet_bottom":
            return np.repeat(zm[:, None], grid.nz, axis=1)
        zp = self.zeta_plus(t)
        s = grid.zc / grid.d
        return zm[:, None] + s[None, :] * (zp - zm)[:, None]

    def offset_rate(self, t, grid: Grid) -> np.ndarray:
        if self.kind == "robin_bottom":
            return grid.zeros()
        rm = self.zeta_minus.rate(t)
        if self.kind == "dirichlet_bottom":
            return np.repeat(rm[:, None], grid.nz, axis=1)
        rp = self.zeta_plus.rate(t)
        s = grid.zc / grid.d
        return rm[:, None] + s[None, :] * (rp - rm)[:, None]

    def boundary_data(self, t):
        """``(bottom, top)`` rows fed to the diffusion solve."""
        top = self.zeta_plus(t) if self.kind == "dirichlet_both" else 0.0
        return self.zeta_minus(t), top


def horizontal_laplacian(row, dx):
    """1D Neumann second difference of a row of cell values."""
    p = np.concatenate([row[:1], row, row[-1:]])
    return (p[2:] - 2.0 * row + p[:-2]) / dx ** 2


def z_source(zeta: ZetaProfile, params: PhysParams, t, grid: Grid) -> np.ndarray:
    """``Z(zeta) = -rho0 cp dzeta/dt + eta lap_hat zeta``, constant in ``z``."""
    row = -params.rho0 * params.cp * zeta.rate(t) + params.eta * horizontal_laplacian(zeta.raw(t), grid.dx)
    return np.repeat(row[:, None], grid.nz, axis=1)


def construct_admissible_zeta(f_samples, params: PhysParams, grid: Grid, T, tol=1e-10) -> ZetaProfile:
    """Periodic solution of ``rho0 cp s_t - eta s_xx = f`` (Neumann in x),
    shifted to ``zeta = s + sup|s| >= 0``.

    ``f_samples[k, i]`` holds ``f(k T / nt, x_i)`` at cell centres. The
    equation is diagonalized by an FFT in time and a DCT-II in space, with
    the exact eigenvalues ``eta (m pi / Lx)^2``; the zero mode is set to 0.
    """
    f = np.asarray(f_samples, dtype=float)
    if f.ndim != 2 or f.shape[1] != grid.nx:
        raise ValueError(f"driver samples must have shape (nt, {grid.nx})")
    scale = float(np.abs(f).max(initial=0.0))
    if abs(f.mean()) > tol * max(scale, 1e-300) and abs(f.mean()) > 0:
        raise CompatibilityError(f"driver f has nonzero space-time mean {f.mean():.3e}")
    nt, nx = f.shape
    fhat = scipy.fft.fft(scipy.fft.dct(f, type=2, axis=1, norm="ortho"), axis=0)
    omega = 2.0 * np.pi * scipy.fft.fftfreq(nt, d=T / nt)
    lam = params.eta * (np.arange(nx) * np.pi / grid.Lx) ** 2
    denom = 1j * params.rho0 * params.cp * omega[:, None] + lam[None, :]
    denom[0, 0] = 1.0
    chat = fhat / denom
    chat[0, 0] = 0.0
    if not np.any(np.abs(chat) > 1e-300):
        raise CompatibilityError("driver f is zero: tau_star = sup zeta would vanish")

    # closed-form evaluation of the band-limited solution
    kk = scipy.fft.fftfreq(nt, d=1.0 / nt)
    x = grid.xc
    modes = np.arange(nx)
    cosmat = np.cos(np.outer(modes, np.pi * x / grid.Lx))
    weight = np.where(modes == 0, np.sqrt(1.0 / nx), np.sqrt(2.0 / nx))
    basis = weight[:, None] * cosmat                  # inverse orthonormal DCT-II

    def series(t, deriv=False):
        ph = np.exp(2j * np.pi * kk * t / T) / nt
        if deriv:
            ph = ph * (2j * np.pi * kk / T)
        coeff = (ph[:, None] * chat).sum(axis=0)
        return np.real(coeff @ basis)

    lo, hi = sup_inf(series, T)
    shift = max(abs(lo), abs(hi))
    return ZetaProfile(T, x, lambda t: series(t) + shift, lambda t: series(t, True))


@dataclass
class MaxPrincipleReport:
    min: float
    max: float
    ok: bool


def check_max_principle(tau_tilde, zeta_field, tau_star, tol=None) -> MaxPrincipleReport:
    """Check ``0 <= tau_tilde + zeta <= tau_star`` within ``1e-10 tau_star``."""
    tol = tol_clamp(tau_star) if tol is None else tol
    tau = np.asarray(tau_tilde) + np.asarray(zeta_field)
    lo, hi = float(tau.min()), float(tau.max())
    return MaxPrincipleReport(lo, hi, lo >= -tol and hi <= tau_star + tol)


@lru_cache(maxsize=32)
def _diffusion_lu(grid: Grid, bc: str, dt: float, rho_cp: float, eta: float):
    L = laplacian_matrix(grid, bc, robin_eta=eta if bc == "robin_bottom" else None)
    A = (rho_cp / dt) * sp.identity(L.shape[0], format="csc") - eta * L
    return spla.splu(A.tocsc())


def step_temperature(tau_tilde, U: VectorField, variant: BoundaryVariant, params: PhysParams,
                     t, dt, grid: Grid, check=True):
    """Advance ``tau_tilde`` from ``t`` to ``t + dt`` with velocity ``U``.

    Raises :class:`CFLError` when ``dt`` exceeds the donor-cell bound and
    :class:`MaxPrincipleError` if the result leaves ``[0, tau_star]``.
    """
    rate = scalar_inflow_rate(U.u, U.w, grid.dx, grid.dz)
    if dt * rate > 1.0 + 1e-12:
        raise CFLError(f"advective CFL number {dt * rate:.3f} > 1")
    tau = tau_tilde + variant.offset(t, grid)
    adv = advect_scalar(np.ascontiguousarray(tau), U.u, U.w, grid.dx, grid.dz, dt)
    rho_cp = params.rho0 * params.cp
    bottom, top = variant.boundary_data(t + dt)
    robin = params.eta if variant.bc == "robin_bottom" else None
    contrib = laplacian_cc(grid.zeros(), grid, variant.bc, bottom=bottom, top=top, robin_eta=robin)
    rhs = (rho_cp / dt) * adv + params.eta * contrib
    tau_new = _diffusion_lu(grid, variant.bc, float(dt), rho_cp, params.eta).solve(rhs.ravel()).reshape(grid.shape)
    if check:
        rep = check_max_principle(tau_new, 0.0, variant.tau_star)
        if not rep.ok:
            raise MaxPrincipleError(
                f"temperature left [0, tau_star]: min {rep.min:.3e}, max {rep.max:.3e}, tau_star {variant.tau_star:.3e}")
    return tau_new - variant.offset(t + dt, grid)

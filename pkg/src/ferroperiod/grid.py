"""Staggered (MAC) grid on the vertical section ``D = (0, Lx) x (0, d)``.

Scalars live at cell centres as ``(nx, nz)`` arrays indexed ``[i, j]`` with
``i`` horizontal. Vector fields store the horizontal component on vertical
faces ``(nx + 1, nz)`` and the vertical component on horizontal faces
``(nx, nz + 1)``. Boundary conditions are applied through a one-cell ghost
layer that is rebuilt on every operator call, never stored.

Boundary tags understood by :func:`gradient_cc` / :func:`laplacian_cc`:

``neumann``
    zero normal derivative on all of ``dD``.
``dirichlet_bottom``
    value prescribed on the bottom ``x3 = 0``, Neumann elsewhere.
``dirichlet_both``
    values prescribed on bottom and top, Neumann on the lateral walls.
``robin_bottom``
    ``phi + eta * dphi/dnu = g`` on the bottom, Neumann elsewhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

BC_TAGS = ("neumann", "dirichlet_bottom", "dirichlet_both", "robin_bottom")


@dataclass(frozen=True)
class Grid:
    nx: int
    nz: int
    Lx: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.nz < 2:
            raise ValueError(f"grid needs nx, nz >= 2, got {self.nx} x {self.nz}")
        if not (self.Lx > 0 and self.d > 0):
            raise ValueError("Lx and d must be positive")

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dz(self) -> float:
        return self.d / self.nz

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nz)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dz

    @property
    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def zc(self) -> np.ndarray:
        return (np.arange(self.nz) + 0.5) * self.dz

    def centers(self):
        """Meshgrid of cell centres, ``indexing='ij'``."""
        return np.meshgrid(self.xc, self.zc, indexing="ij")

    def u_faces(self):
        """Coordinates of the horizontal-velocity faces."""
        return np.meshgrid(np.arange(self.nx + 1) * self.dx, self.zc, indexing="ij")

    def w_faces(self):
        """Coordinates of the vertical-velocity faces."""
        return np.meshgrid(self.xc, np.arange(self.nz + 1) * self.dz, indexing="ij")

    def boundary_of_face(self, component: str, i: int, j: int) -> str | None:
        """Tag a face as ``'bottom'``, ``'top'``, ``'lateral'`` or ``None``
        (interior). Each boundary face gets exactly one tag."""
        if component == "u":
            return "lateral" if i in (0, self.nx) else None
        if component == "w":
            if j == 0:
                return "bottom"
            if j == self.nz:
                return "top"
            return None
        raise ValueError(f"unknown component {component!r}")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


@dataclass
class VectorField:
    """Face-centred vector field on the MAC grid."""

    u: np.ndarray
    w: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(np.zeros((grid.nx + 1, grid.nz)), np.zeros((grid.nx, grid.nz + 1)))

    def copy(self) -> "VectorField":
        return VectorField(self.u.copy(), self.w.copy())

    def __add__(self, other):
        return VectorField(self.u + other.u, self.w + other.w)

    def __sub__(self, other):
        return VectorField(self.u - other.u, self.w - other.w)

    def __mul__(self, s):
        return VectorField(self.u * s, self.w * s)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return max(float(np.abs(self.u).max()), float(np.abs(self.w).max()))

    def boundary_max_abs(self) -> float:
        """Largest |normal component| on the domain boundary."""
        return max(float(np.abs(self.u[[0, -1], :]).max()),
                   float(np.abs(self.w[:, [0, -1]]).max()))

    def cell_average(self):
        """Both components averaged to cell centres."""
        return 0.5 * (self.u[:-1] + self.u[1:]), 0.5 * (self.w[:, :-1] + self.w[:, 1:])

    def flat_interior(self) -> np.ndarray:
        return np.concatenate([self.u[1:-1].ravel(), self.w[:, 1:-1].ravel()])


def _check_bc(bc):
    if bc not in BC_TAGS:
        raise ValueError(f"unknown boundary-condition tag {bc!r}; expected one of {BC_TAGS}")


def gradient_cc(phi, grid: Grid, bc="neumann", bottom=0.0, top=0.0, robin_eta=None):
    """Two-point face gradient of a cell-centred field.

    ``bottom``/``top`` are the boundary data (scalar or length-``nx`` row)
    for the Dirichlet and Robin tags; ``robin_eta`` is the Robin length.
    Lateral faces are always Neumann (zero).
    """
    _check_bc(bc)
    dx, dz = grid.dx, grid.dz
    g = VectorField.zeros(grid)
    g.u[1:-1] = (phi[1:] - phi[:-1]) / dx
    g.w[:, 1:-1] = (phi[:, 1:] - phi[:, :-1]) / dz
    if bc in ("dirichlet_bottom", "dirichlet_both"):
        g.w[:, 0] = 2.0 * (phi[:, 0] - bottom) / dz
    elif bc == "robin_bottom":
        if robin_eta is None or robin_eta <= 0:
            raise ValueError("robin_bottom needs a positive robin_eta")
        # boundary value eliminated from phi_b - eta * (phi_0 - phi_b) / (dz/2) = g
        # (dphi/dnu = -dphi/dz on the bottom)
        g.w[:, 0] = 2.0 * (phi[:, 0] - bottom) / (dz + 2.0 * robin_eta)
    if bc == "dirichlet_both":
        g.w[:, -1] = 2.0 * (top - phi[:, -1]) / dz
    return g


def divergence_fc(v: VectorField, grid: Grid) -> np.ndarray:
    """Cell flux balance of a face field (boundary faces included)."""
    return (v.u[1:] - v.u[:-1]) / grid.dx + (v.w[:, 1:] - v.w[:, :-1]) / grid.dz


def laplacian_cc(phi, grid: Grid, bc="neumann", bottom=0.0, top=0.0, robin_eta=None):
    """Five-point Laplacian, ``divergence_fc(gradient_cc(phi))``."""
    return divergence_fc(gradient_cc(phi, grid, bc, bottom, top, robin_eta), grid)


def zero_mean_project(phi):
    """``phi - mean(phi)`` (uniform cells, so the mean is the plain average)."""
    phi = np.asarray(phi, dtype=float)
    # two passes: the second removes the O(eps * |mean|) residue of the first
    out = phi - phi.mean()
    return out - out.mean()


def _vector_gradient_sq(v: VectorField, grid: Grid) -> float:
    """Sum of squared first differences of both components with no-slip
    ghosts, times the cell area."""
    dx, dz = grid.dx, grid.dz
    s = np.sum(((v.u[1:] - v.u[:-1]) / dx) ** 2)
    uz = np.diff(v.u, axis=1) / dz
    s += np.sum(uz ** 2) + np.sum((2.0 * v.u[:, 0] / dz) ** 2) + np.sum((2.0 * v.u[:, -1] / dz) ** 2)
    s += np.sum(((v.w[:, 1:] - v.w[:, :-1]) / dz) ** 2)
    wx = np.diff(v.w, axis=0) / dx
    s += np.sum(wx ** 2) + np.sum((2.0 * v.w[0] / dx) ** 2) + np.sum((2.0 * v.w[-1] / dx) ** 2)
    return float(s) * grid.cell_area


def norms(f, grid: Grid, bc="neumann", **bc_kwargs):
    """Return ``(L2, H1 seminorm, max)`` by midpoint quadrature.

    ``f`` may be a cell array or a :class:`VectorField`; for vector fields
    the seminorm uses no-slip ghosts (the velocity convention).
    """
    area = grid.cell_area
    if isinstance(f, VectorField):
        l2 = np.sqrt((np.sum(f.u ** 2) + np.sum(f.w ** 2)) * area)
        h1 = np.sqrt(_vector_gradient_sq(f, grid))
        return float(l2), float(h1), f.max_abs()
    f = np.asarray(f, dtype=float)
    l2 = np.sqrt(np.sum(f ** 2) * area)
    g = gradient_cc(f, grid, bc, **bc_kwargs)
    h1 = np.sqrt((np.sum(g.u ** 2) + np.sum(g.w ** 2)) * area)
    return float(l2), float(h1), float(np.abs(f).max())


def inner_faces(a: VectorField, b: VectorField, grid: Grid) -> float:
    """Midpoint-rule ``int a . b`` over all faces."""
    return float((np.sum(a.u * b.u) + np.sum(a.w * b.w)) * grid.cell_area)


def inner_cells(a, b, grid: Grid) -> float:
    return float(np.sum(a * b) * grid.cell_area)


def lp_norm(v: VectorField, grid: Grid, p=3.0) -> float:
    """Discrete L^p norm of ``|v|`` with components averaged to centres."""
    vx, vz = v.cell_average()
    return float((np.sum(np.hypot(vx, vz) ** p) * grid.cell_area) ** (1.0 / p))


# ---------------------------------------------------------------------------
# sparse assembly
# ---------------------------------------------------------------------------

def _second_difference(n, h, low, high, low_coef=None, high_coef=None):
    """1D cell-centred second difference. ``low``/``high`` select the end
    closure: ``'N'`` Neumann, ``'D'`` Dirichlet ghost, ``'R'`` Robin with the
    diagonal correction ``low_coef``."""
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    for end, kind, coef in ((0, low, low_coef), (n - 1, high, high_coef)):
        if kind == "N":
            main[end] += 1.0
        elif kind == "D":
            main[end] -= 1.0
        elif kind == "R":
            main[end] += 1.0 - coef
        else:
            raise ValueError(kind)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h ** 2


@lru_cache(maxsize=64)
def laplacian_matrix(grid: Grid, bc="neumann", robin_eta=None):
    """Sparse matrix of :func:`laplacian_cc` for homogeneous boundary data,
    acting on ``phi.ravel()`` (C order, ``j`` fastest)."""
    _check_bc(bc)
    dx, dz = grid.dx, grid.dz
    lxx = _second_difference(grid.nx, dx, "N", "N")
    if bc == "neumann":
        lzz = _second_difference(grid.nz, dz, "N", "N")
    elif bc == "dirichlet_bottom":
        lzz = _second_difference(grid.nz, dz, "D", "N")
    elif bc == "dirichlet_both":
        lzz = _second_difference(grid.nz, dz, "D", "D")
    else:
        if robin_eta is None or robin_eta <= 0:
            raise ValueError("robin_bottom needs a positive robin_eta")
        # face gradient 2 phi_0 / (dz + 2 eta)  ->  diagonal -dz * that / dz^2
        coef = 2.0 * dz / (dz + 2.0 * robin_eta)
        lzz = _second_difference(grid.nz, dz, "R", "N", low_coef=coef)
    ix = sp.identity(grid.nx, format="csr")
    iz = sp.identity(grid.nz, format="csr")
    return (sp.kron(lxx, iz) + sp.kron(ix, lzz)).tocsc()


@lru_cache(maxsize=16)
def velocity_laplacians(grid: Grid):
    """Vector Laplacians on interior u- and w-faces with no-slip walls.

    Returns ``(Lu, Lw)`` acting on ``u[1:-1].ravel()`` and
    ``w[:, 1:-1].ravel()`` respectively.
    """
    dx, dz = grid.dx, grid.dz
    nx, nz = grid.nx, grid.nz
    # u: x-direction nodes with zero end values, z-direction ghost reflection
    lxx_u = sp.diags([np.ones(nx - 2), np.full(nx - 1, -2.0), np.ones(nx - 2)], [-1, 0, 1]) / dx ** 2
    lzz_u = _second_difference(nz, dz, "D", "D")
    lu = sp.kron(lxx_u, sp.identity(nz)) + sp.kron(sp.identity(nx - 1), lzz_u)
    lxx_w = _second_difference(nx, dx, "D", "D")
    lzz_w = sp.diags([np.ones(nz - 2), np.full(nz - 1, -2.0), np.ones(nz - 2)], [-1, 0, 1]) / dz ** 2
    lw = sp.kron(lxx_w, sp.identity(nz - 1)) + sp.kron(sp.identity(nx), lzz_w)
    return lu.tocsc(), lw.tocsc()

"""Hot stencil kernels: donor-cell advection and discrete convolution.

Each kernel exists twice, a vectorized numpy version (``*_numpy``) and a
loop version compiled with numba (``*_numba``). The public names dispatch on
:data:`ferroperiod._jit.USE_NUMBA`; both paths are kept importable so tests
and the benchmark can compare them directly.

Layout conventions (see :mod:`ferroperiod.grid`): cell arrays are
``(nx, nz)``, u-faces ``(nx + 1, nz)``, w-faces ``(nx, nz + 1)``. All
boundary-normal face velocities are zero, so no inflow ever comes from
outside the domain.
"""
import numpy as np

from ._jit import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# scalar advection
# ---------------------------------------------------------------------------

def advect_scalar_numpy(q, u, w, dx, dz, dt):
    """One explicit donor-cell step of ``q_t + U.grad q = 0`` (advective form).

    ``q_new = q + dt * sum_inflow_faces |U_f| / h * (q_nb - q)`` which is a
    convex combination of ``q`` and its upwind neighbours whenever
    ``dt * max inflow rate <= 1``.
    """
    qp = np.pad(q, 1, mode="edge")
    qc = qp[1:-1, 1:-1]
    west = np.maximum(u[:-1, :], 0.0) / dx * (qp[:-2, 1:-1] - qc)
    east = np.maximum(-u[1:, :], 0.0) / dx * (qp[2:, 1:-1] - qc)
    south = np.maximum(w[:, :-1], 0.0) / dz * (qp[1:-1, :-2] - qc)
    north = np.maximum(-w[:, 1:], 0.0) / dz * (qp[1:-1, 2:] - qc)
    return q + dt * (west + east + south + north)


@njit
def advect_scalar_numba(q, u, w, dx, dz, dt):
    nx, nz = q.shape
    out = np.empty_like(q)
    for i in range(nx):
        for j in range(nz):
            qc = q[i, j]
            acc = 0.0
            if i > 0:
                acc += max(u[i, j], 0.0) / dx * (q[i - 1, j] - qc)
            if i < nx - 1:
                acc += max(-u[i + 1, j], 0.0) / dx * (q[i + 1, j] - qc)
            if j > 0:
                acc += max(w[i, j], 0.0) / dz * (q[i, j - 1] - qc)
            if j < nz - 1:
                acc += max(-w[i, j + 1], 0.0) / dz * (q[i, j + 1] - qc)
            out[i, j] = qc + dt * acc
    return out


def scalar_inflow_rate(u, w, dx, dz):
    """Largest per-cell sum of inflow rates; ``dt * rate <= 1`` keeps
    :func:`advect_scalar` a convex combination."""
    rate = (np.maximum(u[:-1, :], 0.0) + np.maximum(-u[1:, :], 0.0)) / dx
    rate = rate + (np.maximum(w[:, :-1], 0.0) + np.maximum(-w[:, 1:], 0.0)) / dz
    return float(rate.max()) if rate.size else 0.0


# ---------------------------------------------------------------------------
# momentum advection on the staggered grid
# ---------------------------------------------------------------------------

def advect_momentum_numpy(u, w, dx, dz, dt):
    """Donor-cell advective step for both staggered velocity components.

    Only interior faces are updated; boundary faces are returned unchanged
    (they carry the no-slip value). Advecting velocities are two-point
    averages onto the faces of each staggered control volume.
    """
    u_new = u.copy()
    w_new = w.copy()

    # u control volumes, interior faces i = 1..nx-1
    ui = u[1:-1, :]
    uc = 0.5 * (u[:-1, :] + u[1:, :])              # cell centres (nx, nz)
    a_w = np.maximum(uc[:-1, :], 0.0) / dx
    a_e = np.maximum(-uc[1:, :], 0.0) / dx
    # corner vertical velocity at (i, j) for i = 1..nx-1, j = 0..nz
    wk = 0.5 * (w[:-1, :] + w[1:, :])
    a_s = np.maximum(wk[:, :-1], 0.0) / dz
    a_n = np.maximum(-wk[:, 1:], 0.0) / dz
    up = np.pad(ui, ((0, 0), (1, 1)), mode="edge")  # vertical neighbours, rate 0 at walls
    du = (a_w * (u[:-2, :] - ui) + a_e * (u[2:, :] - ui)
          + a_s * (up[:, :-2] - ui) + a_n * (up[:, 2:] - ui))
    u_new[1:-1, :] = ui + dt * du

    # w control volumes, interior faces j = 1..nz-1
    wi = w[:, 1:-1]
    wc = 0.5 * (w[:, :-1] + w[:, 1:])
    b_s = np.maximum(wc[:, :-1], 0.0) / dz
    b_n = np.maximum(-wc[:, 1:], 0.0) / dz
    uk = 0.5 * (u[:, :-1] + u[:, 1:])               # corners (nx+1, nz-1)
    b_w = np.maximum(uk[:-1, :], 0.0) / dx
    b_e = np.maximum(-uk[1:, :], 0.0) / dx
    wp = np.pad(wi, ((1, 1), (0, 0)), mode="edge")
    dw = (b_s * (w[:, :-2] - wi) + b_n * (w[:, 2:] - wi)
          + b_w * (wp[:-2, :] - wi) + b_e * (wp[2:, :] - wi))
    w_new[:, 1:-1] = wi + dt * dw
    return u_new, w_new


@njit
def advect_momentum_numba(u, w, dx, dz, dt):
    nxp1, nz = u.shape
    nx = nxp1 - 1
    u_new = u.copy()
    w_new = w.copy()
    for i in range(1, nx):
        for j in range(nz):
            uc = u[i, j]
            acc = 0.0
            aw = 0.5 * (u[i - 1, j] + uc)
            ae = 0.5 * (uc + u[i + 1, j])
            acc += max(aw, 0.0) / dx * (u[i - 1, j] - uc)
            acc += max(-ae, 0.0) / dx * (u[i + 1, j] - uc)
            if j > 0:
                ws = 0.5 * (w[i - 1, j] + w[i, j])
                acc += max(ws, 0.0) / dz * (u[i, j - 1] - uc)
            if j < nz - 1:
                wn = 0.5 * (w[i - 1, j + 1] + w[i, j + 1])
                acc += max(-wn, 0.0) / dz * (u[i, j + 1] - uc)
            u_new[i, j] = uc + dt * acc
    for i in range(nx):
        for j in range(1, nz):
            wc = w[i, j]
            acc = 0.0
            bs = 0.5 * (w[i, j - 1] + wc)
            bn = 0.5 * (wc + w[i, j + 1])
            acc += max(bs, 0.0) / dz * (w[i, j - 1] - wc)
            acc += max(-bn, 0.0) / dz * (w[i, j + 1] - wc)
            if i > 0:
                uw = 0.5 * (u[i, j - 1] + u[i, j])
                acc += max(uw, 0.0) / dx * (w[i - 1, j] - wc)
            if i < nx - 1:
                ue = 0.5 * (u[i + 1, j - 1] + u[i + 1, j])
                acc += max(-ue, 0.0) / dx * (w[i + 1, j] - wc)
            w_new[i, j] = wc + dt * acc
    return u_new, w_new


def momentum_rate(u, w, dx, dz):
    """Conservative bound on the momentum-advection inflow rate."""
    umax = float(np.abs(u).max()) if u.size else 0.0
    wmax = float(np.abs(w).max()) if w.size else 0.0
    return 2.0 * (umax / dx + wmax / dz)


# ---------------------------------------------------------------------------
# convolution with zero extension
# ---------------------------------------------------------------------------

def convolve_zero_numpy(f, weights):
    """``out[i, j] = sum_kl weights[k, l] * f[i - k + K, j - l + L]`` with
    ``f`` extended by zero outside the array (odd-sized kernel, centred)."""
    kx, kz = weights.shape
    rx, rz = kx // 2, kz // 2
    nx, nz = f.shape
    fp = np.zeros((nx + 2 * rx, nz + 2 * rz))
    fp[rx:rx + nx, rz:rz + nz] = f
    out = np.zeros_like(f, dtype=float)
    for k in range(kx):
        for l in range(kz):
            wkl = weights[k, l]
            if wkl == 0.0:
                continue
            # offset (k - rx, l - rz) in the kernel reads f at (i - (k - rx), j - (l - rz))
            sx = 2 * rx - k
            sz = 2 * rz - l
            out += wkl * fp[sx:sx + nx, sz:sz + nz]
    return out


@njit
def convolve_zero_numba(f, weights):
    kx, kz = weights.shape
    rx = kx // 2
    rz = kz // 2
    nx, nz = f.shape
    out = np.zeros((nx, nz))
    for i in range(nx):
        for j in range(nz):
            acc = 0.0
            for k in range(kx):
                ii = i - (k - rx)
                if ii < 0 or ii >= nx:
                    continue
                for l in range(kz):
                    jj = j - (l - rz)
                    if jj < 0 or jj >= nz:
                        continue
                    acc += weights[k, l] * f[ii, jj]
            out[i, j] = acc
    return out


if USE_NUMBA:
    advect_scalar = advect_scalar_numba
    advect_momentum = advect_momentum_numba
    convolve_zero = convolve_zero_numba
else:
    advect_scalar = advect_scalar_numpy
    advect_momentum = advect_momentum_numpy
    convolve_zero = convolve_zero_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"

"""Independent reference implementations shared by the test modules."""
import math

import numpy as np
from scipy.optimize import root


def loop_residual(phi, b, F, law, M_S, nx, nz, dx, dz):
    """Discrete operator written cell by cell: face gradients with Neumann
    walls, centre average, flux M_S b chi(|xi|) xi/|xi| averaged back to the
    interior faces, flux balance minus F."""
    gu = np.zeros((nx + 1, nz))
    gw = np.zeros((nx, nz + 1))
    for i in range(1, nx):
        for j in range(nz):
            gu[i, j] = (phi[i, j] - phi[i - 1, j]) / dx
    for i in range(nx):
        for j in range(1, nz):
            gw[i, j] = (phi[i, j] - phi[i, j - 1]) / dz
    cx = np.zeros((nx, nz))
    cz = np.zeros((nx, nz))
    for i in range(nx):
        for j in range(nz):
            hx = 0.5 * (gu[i, j] + gu[i + 1, j])
            hz = 0.5 * (gw[i, j] + gw[i, j + 1])
            r = math.hypot(hx, hz)
            f = law.chi(r) / r if r > 0 else law.chi_prime(0.0)
            cx[i, j] = M_S * b[i, j] * f * hx
            cz[i, j] = M_S * b[i, j] * f * hz
    qu = gu.copy()
    qw = gw.copy()
    for i in range(1, nx):
        for j in range(nz):
            qu[i, j] += 0.5 * (cx[i - 1, j] + cx[i, j])
    for i in range(nx):
        for j in range(1, nz):
            qw[i, j] += 0.5 * (cz[i, j - 1] + cz[i, j])
    res = np.zeros((nx, nz))
    for i in range(nx):
        for j in range(nz):
            res[i, j] = (qu[i + 1, j] - qu[i, j]) / dx + (qw[i, j + 1] - qw[i, j]) / dz - F[i, j]
    return res


def dense_solve(b, F, law, M_S, grid):
    nx, nz = grid.shape

    def eqs(v):
        phi = v.reshape(nx, nz)
        r = loop_residual(phi, b, F, law, M_S, nx, nz, grid.dx, grid.dz).ravel()
        r[0] = phi.sum()  # the Neumann system is rank-deficient by one; fix the mean
        return r

    sol = root(eqs, np.zeros(nx * nz), method="hybr", tol=1e-13)
    assert np.abs(eqs(sol.x)).max() <= 1e-10 * max(1.0, np.abs(F).max())
    return sol.x.reshape(nx, nz)

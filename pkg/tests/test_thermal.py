import math

import numpy as np
import pytest
from scipy.linalg import solve_banded

from ferroperiod.constitutive import PhysParams
from ferroperiod.errors import CFLError, CompatibilityError, MaxPrincipleError
from ferroperiod.grid import Grid, VectorField
from ferroperiod.thermal import (VARIANTS, BoundaryVariant, ZetaProfile, check_max_principle,
                                 check_neumann_compatible, construct_admissible_zeta, horizontal_laplacian,
                                 step_temperature, sup_inf, z_source)
from ferroperiod.kernels import scalar_inflow_rate
from ferroperiod.validation import random_div_free


def variant(kind, grid, c=0.6, c_top=0.2, T=1.0):
    zp = ZetaProfile.constant(c_top, grid, T) if kind == "dirichlet_both" else None
    return BoundaryVariant(kind, ZetaProfile.constant(c, grid, T), zp)


# --- admissible boundary data --------------------------------------------------

def test_admissible_zeta_single_mode():
    g = Grid(32, 8, 2.0, 1.0)
    params = PhysParams(rho0=1.3, cp=0.9, eta=0.7)
    T, nt, amp = 2.0, 16, 0.4
    t = np.arange(nt) * T / nt
    k, w = np.pi / g.Lx, 2 * np.pi / T
    f = amp * np.cos(w * t)[:, None] * np.cos(k * g.xc)[None, :]
    z = construct_admissible_zeta(f, params, g, T)
    # periodic solution of rho cp s' + eta k^2 s = amp cos(w t)
    c = amp / (1j * w * params.rho0 * params.cp + params.eta * k ** 2)
    A = abs(c)
    shift = A * np.abs(np.cos(k * g.xc)).max()
    for tt in np.random.default_rng(0).uniform(0, T, 7):
        s = np.real(c * np.exp(1j * w * tt)) * np.cos(k * g.xc)
        assert np.allclose(z.raw(tt), s + shift, atol=1e-12)
        ds = np.real(1j * w * c * np.exp(1j * w * tt)) * np.cos(k * g.xc)
        assert np.allclose(z.rate(tt), ds, atol=1e-11)
    assert z.zmin == pytest.approx(0.0, abs=1e-12)
    assert z.tau_star == pytest.approx(2 * shift, rel=1e-10)


def test_admissible_zeta_solves_equation():
    # the discrete equation holds pointwise at arbitrary times
    g = Grid(16, 4)
    params = PhysParams(eta=0.5, cp=2.0)
    T, nt = 1.0, 24
    rng = np.random.default_rng(1)
    t = np.arange(nt) * T / nt
    f = (np.cos(2 * np.pi * t)[:, None] * np.cos(np.pi * g.xc)[None, :]
         + 0.3 * np.sin(4 * np.pi * t)[:, None] * np.cos(3 * np.pi * g.xc)[None, :])
    z = construct_admissible_zeta(f, params, g, T)
    for k in rng.integers(0, nt, 4):
        tt = t[k]
        lhs = params.rho0 * params.cp * z.rate(tt) - params.eta * _exact_dct_laplacian(z.raw(tt), g)
        assert np.allclose(lhs, f[k], atol=1e-10)


def _exact_dct_laplacian(row, g):
    from scipy.fft import dct, idct
    c = dct(row, type=2, norm="ortho")
    lam = (np.arange(g.nx) * np.pi / g.Lx) ** 2
    return idct(-lam * c, type=2, norm="ortho")


def test_admissible_zeta_rejects_bad_driver():
    g = Grid(8, 4)
    with pytest.raises(CompatibilityError):
        construct_admissible_zeta(np.ones((8, 8)), PhysParams(), g, 1.0)
    with pytest.raises(CompatibilityError):
        construct_admissible_zeta(np.zeros((8, 8)), PhysParams(), g, 1.0)
    with pytest.raises(ValueError):
        construct_admissible_zeta(np.zeros((8, 5)), PhysParams(), g, 1.0)


# --- boundary profiles -------------------------------------------------------

def test_profile_periodicity_checks():
    g = Grid(8, 4)
    with pytest.raises(CompatibilityError):
        ZetaProfile.from_function(lambda t, x: 1 + 0.1 * t + 0 * x, lambda t, x: 0.1 + 0 * x, g, 1.0)
    s = np.ones((5, 8))
    s[-1] += 0.1
    with pytest.raises(CompatibilityError):
        ZetaProfile.from_samples(s, g, 1.0, include_endpoint=True)
    with pytest.raises(CompatibilityError):
        ZetaProfile.constant(-0.5, g)
    with pytest.raises(CompatibilityError):
        ZetaProfile.constant(0.0, g)


def test_spline_profile_accuracy():
    g = Grid(8, 4)
    T, nt = 2.0, 64
    t = np.arange(nt) * T / nt
    exact = lambda tt: 1.0 + 0.5 * np.sin(2 * np.pi * tt / T) * np.cos(np.pi * g.xc)  # noqa: E731
    z = ZetaProfile.from_samples(np.array([exact(tk) for tk in t]), g, T)
    for tt in (0.013, 0.77, 1.5, 1.99, 2.3):
        assert np.abs(z.raw(tt) - exact(tt)).max() < 1e-5
    dex = np.pi / T * np.cos(2 * np.pi * 0.77 / T) * np.cos(np.pi * g.xc)
    assert np.abs(z.rate(0.77) - dex).max() < 1e-3
    assert z.tau_star == pytest.approx(1.0 + 0.5 * np.cos(np.pi * g.xc).max(), rel=1e-6)
    tt, vals = z.samples(nt)
    assert np.allclose(vals[5], exact(tt[5]))


def test_sup_inf():
    lo, hi = sup_inf(lambda t: np.array([np.sin(2 * np.pi * t + 0.3), 0.5 * np.cos(2 * np.pi * t)]), 1.0, n=16)
    assert lo == pytest.approx(-1.0, abs=1e-12) and hi == pytest.approx(1.0, abs=1e-12)


def test_neumann_compatibility():
    g = Grid(16, 4)
    ok = ZetaProfile.from_function(lambda t, x: 1 + 0.2 * np.cos(np.pi * x) * np.cos(2 * np.pi * t),
                                   lambda t, x: -0.4 * np.pi * np.cos(np.pi * x) * np.sin(2 * np.pi * t), g, 1.0)
    check_neumann_compatible(ok, g.Lx)
    bad = ZetaProfile.from_function(lambda t, x: 1 + 0.5 * x + 0 * t, lambda t, x: 0 * x, g, 1.0)
    with pytest.raises(CompatibilityError):
        check_neumann_compatible(bad, g.Lx)


def test_dirichlet_both_tau_star_and_offset():
    g = Grid(4, 8)
    var = variant("dirichlet_both", g, 0.3, 0.9)
    assert var.tau_star == 0.9
    off = var.offset(0.0, g)
    assert np.allclose(off[:, 0], 0.3 + 0.6 * g.zc[0]) and np.allclose(np.diff(off[0]), 0.6 * g.dz)
    assert np.all(variant("robin_bottom", g).offset(0.0, g) == 0.0)
    with pytest.raises(ValueError):
        BoundaryVariant("dirichlet_both", ZetaProfile.constant(1.0, g))
    with pytest.raises(ValueError):
        BoundaryVariant("neumann", ZetaProfile.constant(1.0, g))


def test_z_source():
    g = Grid(16, 3)
    p = PhysParams(rho0=2.0, cp=1.5, eta=0.5)
    z = ZetaProfile.from_function(lambda t, x: 1 + 0.2 * np.cos(np.pi * x) * np.cos(2 * np.pi * t),
                                  lambda t, x: -0.4 * np.pi * np.cos(np.pi * x) * np.sin(2 * np.pi * t), g, 1.0)
    S = z_source(z, p, 0.2, g)
    row = -3.0 * z.rate(0.2) + 0.5 * horizontal_laplacian(z.raw(0.2), g.dx)
    assert S.shape == g.shape and np.allclose(S, row[:, None])


# --- the step ------------------------------------------------------------------

def column_oracle(tau0, c, p, dt, nsteps, d):
    """Backward Euler on a single column with tau = c at z = 0 (ghost
    reflection) and an insulated top, written as a banded solve."""
    n = tau0.size
    dz = d / n
    r = p.eta * dt / (p.rho0 * p.cp * dz ** 2)
    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[2, :-1] = -r
    ab[1, :] = 1 + 2 * r
    ab[1, 0] = 1 + 3 * r
    ab[1, -1] = 1 + r
    tau = tau0.copy()
    for _ in range(nsteps):
        rhs = tau.copy()
        rhs[0] += 2 * r * c
        tau = solve_banded((1, 1), ab, rhs)
    return tau


def test_column_against_banded_oracle():
    g = Grid(3, 20, 1.0, 1.0)
    p = PhysParams(eta=0.8, cp=1.2)
    c = 0.4
    var = variant("dirichlet_bottom", g, c)
    tau0 = 0.4 - 0.3 * np.sin(np.pi * g.zc)
    tt = np.repeat(tau0[None, :], g.nx, axis=0) - c
    U = VectorField.zeros(g)
    dt = 0.01
    for k in range(30):
        tt = step_temperature(tt, U, var, p, k * dt, dt, g)
    ref = column_oracle(tau0, c, p, dt, 30, g.d)
    assert np.allclose(tt + c, ref[None, :], atol=1e-13)


def test_column_decay_rate():
    # slowest Dirichlet/insulated mode decays like exp(-eta (pi/2d)^2 t / (rho cp))
    g = Grid(2, 64, 1.0, 1.0)
    p = PhysParams(eta=0.5)
    var = variant("dirichlet_bottom", g, 0.5)
    tt = -0.3 * np.sin(np.pi * g.zc / 2)[None, :].repeat(2, axis=0)
    dt, n = 1e-3, 400
    U = VectorField.zeros(g)
    for k in range(n):
        tt = step_temperature(tt, U, var, p, k * dt, dt, g)
    rate = -math.log(tt[0, -1] / (-0.3 * math.sin(math.pi * g.zc[-1] / 2))) / (n * dt)
    assert rate == pytest.approx(0.5 * (math.pi / 2) ** 2, rel=2e-3)


@pytest.mark.parametrize("kind", VARIANTS)
def test_max_principle_random_flows(kind):
    g = Grid(24, 24)
    rng = np.random.default_rng(7)
    p = PhysParams(eta=0.05)
    var = variant(kind, g, 0.7, 0.1)
    # start from the extremes of the admissible range
    tau = np.where(rng.random(g.shape) < 0.5, 0.0, var.tau_star)
    tt = tau - var.offset(0.0, g)
    worst_lo, worst_hi = 0.0, 0.0
    for k in range(40):
        U = random_div_free(g, rng, 2.0)
        dt = 0.99 / scalar_inflow_rate(U.u, U.w, g.dx, g.dz)
        tt = step_temperature(tt, U, var, p, 0.0, dt, g)
        rep = check_max_principle(tt, var.offset(0.0, g), var.tau_star)
        worst_lo, worst_hi = min(worst_lo, rep.min), max(worst_hi, rep.max)
        assert rep.ok
    assert worst_lo >= -1e-12 and worst_hi <= var.tau_star * (1 + 1e-12)


def test_robin_steady_state():
    # no flow: tau relaxes to the Robin data zeta from any start
    g = Grid(2, 16)
    p = PhysParams(eta=1.0)
    var = variant("robin_bottom", g, 0.8)
    tt = np.full(g.shape, 0.1)
    for k in range(400):
        tt = step_temperature(tt, VectorField.zeros(g), var, p, 0.0, 0.05, g)
    assert np.allclose(tt, 0.8, atol=1e-8)


def test_cfl_violation_raises():
    g = Grid(8, 8)
    U = VectorField.zeros(g)
    U.u[1:-1] = 1.0
    with pytest.raises(CFLError):
        step_temperature(g.zeros(), U, variant("dirichlet_bottom", g), PhysParams(), 0.0, 10 * g.dx, g)


def test_out_of_range_state_detected():
    g = Grid(8, 8)
    var = variant("dirichlet_bottom", g, 0.5)
    with pytest.raises(MaxPrincipleError):
        step_temperature(np.full(g.shape, 5.0), VectorField.zeros(g), var, PhysParams(), 0.0, 1e-4, g)
    assert not check_max_principle(np.full(g.shape, -1e-3), 0.0, 1.0).ok
    assert check_max_principle(np.full(g.shape, -1e-12), 0.0, 1.0).ok

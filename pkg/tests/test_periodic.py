import math

import numpy as np
import pytest

from ferroperiod.constitutive import LangevinLaw, PhysParams
from ferroperiod.errors import CFLError, CompatibilityError
from ferroperiod.grid import Grid, VectorField, norms
from ferroperiod.hydro import KelvinForceSpec
from ferroperiod.periodic import (Forcing, PeriodicOptions, State, energy, evolve, evolve_period, find_periodic,
                                  gamma_constant, periodicity_defect, poincare_constant)
from ferroperiod.thermal import BoundaryVariant, ZetaProfile, check_max_principle, construct_admissible_zeta
from ferroperiod.validation import random_div_free


def rest_setup(n=16, c=0.7):
    g = Grid(n, n)
    var = BoundaryVariant("dirichlet_bottom", ZetaProfile.constant(c, g))
    return g, Forcing(1.0, var), PhysParams(tau_star=c)


def smoke_setup(n=16, scale=0.01):
    g = Grid(n, n)
    params = PhysParams(alpha=1.0)
    T, nt = 1.0, 32
    t = np.arange(nt) * T / nt
    f = scale * np.cos(2 * np.pi * t)[:, None] * np.cos(np.pi * g.xc)[None, :]
    zeta = construct_admissible_zeta(f, params, g, T)
    X, Z = g.centers()
    shape = np.cos(np.pi * X) * np.cos(np.pi * Z)
    forcing = Forcing(T, BoundaryVariant("dirichlet_bottom", zeta),
                      F=lambda s: scale * np.cos(2 * np.pi * s) * shape, g=lambda s: 1.0)
    return g, forcing, params


# --- constants and energy ------------------------------------------------------------

def test_gamma_examples():
    assert gamma_constant(PhysParams(), 1.0) == 0.25
    assert gamma_constant(PhysParams(mu=4.0), 1.0) == 1.0


def test_gamma_branchwise_scaling():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = PhysParams(rho0=rng.uniform(0.5, 2), mu=rng.uniform(0.1, 3), eta=rng.uniform(0.1, 3), cp=rng.uniform(0.5, 2))
        Cp = rng.uniform(0.2, 2)
        g1 = gamma_constant(p, Cp)
        p2 = PhysParams(rho0=p.rho0, mu=2 * p.mu, eta=2 * p.eta, cp=p.cp)
        assert gamma_constant(p2, Cp) == pytest.approx(2 * g1, rel=1e-15)


def test_poincare_default():
    assert poincare_constant(Grid(4, 4, 2.0, 1.0)) == pytest.approx(2.0 / math.pi)


def test_energy_definition():
    g = Grid(8, 8)
    p = PhysParams(rho0=1.7, cp=2.5)
    assert energy(State.rest(g), p, g)[0] == 0.0
    U = VectorField.zeros(g)
    U.u[1:-1] = 1.0
    scale = math.sqrt(2.0 / norms(U, g)[0] ** 2)
    x = State(U * scale, g.zeros(), g.zeros())
    assert energy(x, p, g)[0] == pytest.approx(2 * 1.7)
    rng = np.random.default_rng(1)
    x = State(random_div_free(g, rng), rng.random(g.shape), g.zeros())
    E, parts = energy(x, p, g)
    assert E == pytest.approx(parts["kinetic"] + parts["thermal"])
    assert parts["kinetic"] == pytest.approx(1.7 * norms(x.U, g)[0] ** 2)
    assert parts["thermal"] == pytest.approx(1.7 * 2.5 * norms(x.tau_tilde, g)[0] ** 2)


# --- the period map -------------------------------------------------------------------

def test_rest_orbit_is_exact():
    g, forcing, params = rest_setup()
    y = evolve_period(State.rest(g), g, forcing, params, LangevinLaw(), nsteps=20)
    assert y.U.max_abs() <= 1e-13 and np.abs(y.tau_tilde).max() <= 1e-13 and y.t == 0.0


def test_forcing_validation():
    g, forcing, _ = rest_setup()
    with pytest.raises(CompatibilityError):
        Forcing(1.0, forcing.variant, F=lambda t: t * np.ones(g.shape))
    with pytest.raises(ValueError):
        Forcing(2.0, forcing.variant)
    with pytest.raises(ValueError):
        PeriodicOptions(damping=0.0)
    with pytest.raises(ValueError):
        PeriodicOptions(nsteps=0)


def test_determinism():
    g, forcing, params = smoke_setup(16, 0.05)
    x0 = State(random_div_free(g, np.random.default_rng(2), 0.01), g.zeros(), g.zeros())
    a = evolve_period(x0, g, forcing, params, LangevinLaw(), nsteps=20)
    b = evolve_period(x0, g, forcing, params, LangevinLaw(), nsteps=20)
    assert np.array_equal(a.U.u, b.U.u) and np.array_equal(a.U.w, b.U.w)
    assert np.array_equal(a.tau_tilde, b.tau_tilde)


def test_flow_property():
    g, forcing, params = smoke_setup(16, 0.05)
    law = LangevinLaw()
    x0 = State.rest(g)
    half = evolve(x0, g, forcing, params, law, t0=0.0, t1=0.5, nsteps=10)
    two = evolve(half, g, forcing, params, law, t0=0.5, t1=1.0, nsteps=10)
    full = evolve(x0, g, forcing, params, law, t0=0.0, t1=1.0, nsteps=20)
    assert (two.U - full.U).max_abs() <= 1e-12 * max(full.U.max_abs(), 1e-300) + 1e-15
    assert np.abs(two.tau_tilde - full.tau_tilde).max() <= 1e-12


def test_invariants_along_trajectory():
    g, forcing, params = smoke_setup(16, 0.05)
    x0 = State(random_div_free(g, np.random.default_rng(3), 0.05), g.zeros(), g.zeros())
    seen = []

    def cb(x, info):
        tau = x.tau_tilde + forcing.variant.offset(info.t, g)
        seen.append((info.div_max, x.U.boundary_max_abs(), tau.min(), tau.max(), abs(x.phi.mean())))

    evolve_period(x0, g, forcing, params, LangevinLaw(), nsteps=20, callback=cb)
    ts = forcing.variant.tau_star
    assert len(seen) == 20
    for div, bnd, lo, hi, pm in seen:
        assert div <= 1e-10 and bnd == 0.0 and pm < 1e-12
        assert lo >= -1e-10 * ts and hi <= ts * (1 + 1e-10)


def test_cfl_substepping():
    g, forcing, params = rest_setup(8)
    # a fast initial flow needs halved steps; one level is enough here
    x0 = State(random_div_free(g, np.random.default_rng(4), 1.0), g.zeros(), g.zeros())
    dts = []
    evolve(x0, g, forcing, params, LangevinLaw(), t0=0.0, t1=0.25, nsteps=1, callback=lambda x, i: dts.append(i.dt))
    assert min(dts) < 0.25 and sum(dts) == pytest.approx(0.25)
    x1 = State(random_div_free(g, np.random.default_rng(4), 1e3), g.zeros(), g.zeros())
    with pytest.raises(CFLError):
        evolve(x1, g, forcing, params, LangevinLaw(), t0=0.0, t1=1.0, nsteps=1)


def test_unforced_energy_decay():
    g, forcing, params = rest_setup(16, 0.7)
    rng = np.random.default_rng(5)
    tt = rng.uniform(-0.7, 0.0, g.shape)
    x = State(random_div_free(g, rng, 0.05), tt, g.zeros())
    E = [energy(x, params, g)[0]]
    evolve(x, g, forcing, params, LangevinLaw(), nsteps=50, callback=lambda s, i: E.append(energy(s, params, g)[0]))
    E = np.array(E)
    assert np.all(np.diff(E) < 0)
    rate = -np.polyfit(np.linspace(0, 1, E.size), np.log(E), 1)[0]
    assert rate > 0


# --- fixed point search ------------------------------------------------------------------

def test_rest_fixed_point_one_iteration():
    g, forcing, params = rest_setup()
    rep = find_periodic(State.rest(g), g, forcing, params, LangevinLaw(), opts=PeriodicOptions(nsteps=20))
    assert rep.converged and rep.iterations == 1 and rep.defect_history[0] <= 1e-12


@pytest.mark.parametrize("depth", [0, 3])
def test_small_forcing_converges(depth):
    g, forcing, params = smoke_setup(16, 0.01)
    law = LangevinLaw()
    opts = PeriodicOptions(nsteps=40, anderson_depth=depth, tol_period=1e-8)
    rep = find_periodic(State.rest(g), g, forcing, params, law, opts=opts)
    assert rep.converged and rep.iterations <= 50
    d = np.array(rep.defect_history)
    assert np.all(d[1:] / d[:-1] < 1)
    assert rep.defect_history[-1] <= 1e-8 * max(1.0, math.sqrt(rep.energy_history[-1]))
    cert = periodicity_defect(rep.final_state, g, forcing, params, law, nsteps=40)
    assert cert <= 10 * opts.tol_period
    x = rep.final_state
    assert check_max_principle(x.tau_tilde, forcing.variant.offset(0.0, g), forcing.variant.tau_star).ok


def test_non_convergence_is_reported():
    g, forcing, params = smoke_setup(16, 0.05)
    rep = find_periodic(State.rest(g), g, forcing, params, LangevinLaw(),
                        opts=PeriodicOptions(nsteps=20, max_outer=0))
    assert not rep.converged and rep.iterations == 1 and len(rep.defect_history) == 1
    assert rep.relative_defect > 1e-8


def test_regularized_and_conservative_runs():
    g, forcing, params = smoke_setup(16, 0.05)
    for spec in (KelvinForceSpec(regularized=True, epsilon=2.5 * g.dx), KelvinForceSpec(form="conservative")):
        y = evolve_period(State.rest(g), g, forcing, params, LangevinLaw(), spec, nsteps=10)
        assert np.isfinite(y.tau_tilde).all()


def test_gamma_estimate_from_decay():
    # a linear contraction with known rate: Picard defects shrink by the period map's factor
    g, forcing, params = smoke_setup(12, 0.02)
    rep = find_periodic(State.rest(g), g, forcing, params, LangevinLaw(),
                        opts=PeriodicOptions(nsteps=20, anderson_depth=0, tol_period=1e-10))
    d = np.array(rep.defect_history)
    if d.size >= 3:
        assert rep.gamma_estimate == pytest.approx(-np.log(np.median(d[1:] / d[:-1])))
    assert rep.gamma_estimate > 0 or math.isnan(rep.gamma_estimate)


def test_variants_run():
    g = Grid(12, 12)
    zm = ZetaProfile.constant(0.6, g)
    for kind in ("dirichlet_both", "robin_bottom"):
        zp = ZetaProfile.constant(0.2, g) if kind == "dirichlet_both" else None
        forcing = Forcing(1.0, BoundaryVariant(kind, zm, zp), g=lambda t: 1.0)
        p = PhysParams(alpha=1.0)
        y = evolve_period(State.rest(g), g, forcing, p, LangevinLaw(), nsteps=10)
        tau = y.tau_tilde + forcing.variant.offset(0.0, g)
        assert tau.min() >= -1e-10 and tau.max() <= 0.6 * (1 + 1e-10)

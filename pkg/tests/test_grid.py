import numpy as np
import pytest

from ferroperiod.grid import (BC_TAGS, Grid, VectorField, divergence_fc, gradient_cc, inner_cells,
                              inner_faces, laplacian_cc, laplacian_matrix, lp_norm, norms,
                              velocity_laplacians, zero_mean_project)


@pytest.fixture
def grid():
    return Grid(7, 5, 1.4, 0.9)


def test_geometry(grid):
    assert grid.dx == pytest.approx(0.2)
    assert grid.dz == pytest.approx(0.18)
    assert grid.xc[0] == pytest.approx(0.1) and grid.zc[-1] == pytest.approx(0.9 - 0.09)
    X, Z = grid.centers()
    assert X.shape == grid.shape == Z.shape
    assert grid.u_faces()[0].shape == (8, 5)
    assert grid.w_faces()[1].shape == (7, 6)


def test_bad_grid():
    with pytest.raises(ValueError):
        Grid(1, 4)
    with pytest.raises(ValueError):
        Grid(4, 4, Lx=-1.0)


def test_boundary_tags_unique(grid):
    tags = {}
    for i in range(grid.nx + 1):
        for j in range(grid.nz):
            tags[("u", i, j)] = grid.boundary_of_face("u", i, j)
    for i in range(grid.nx):
        for j in range(grid.nz + 1):
            tags[("w", i, j)] = grid.boundary_of_face("w", i, j)
    n_boundary = sum(t is not None for t in tags.values())
    assert n_boundary == 2 * grid.nz + 2 * grid.nx
    assert tags[("w", 3, 0)] == "bottom" and tags[("w", 3, grid.nz)] == "top"
    with pytest.raises(ValueError):
        grid.boundary_of_face("q", 0, 0)


def test_constant_has_zero_gradient(grid):
    g = gradient_cc(np.full(grid.shape, 3.0), grid)
    assert g.max_abs() == 0.0


def test_linear_field_exact_gradient():
    g = Grid(10, 8)
    X, Z = g.centers()
    phi = 2.0 * X - 3.0 * Z
    G = gradient_cc(phi, g)
    assert np.allclose(G.u[1:-1], 2.0) and np.allclose(G.w[:, 1:-1], -3.0)
    # Neumann boundary faces are zero
    assert G.boundary_max_abs() == 0.0


def test_discrete_integration_by_parts(grid):
    # sum grad(phi) . v = -sum phi div(v) when v . nu = 0 on dD
    rng = np.random.default_rng(1)
    phi = rng.standard_normal(grid.shape)
    v = VectorField(rng.standard_normal((grid.nx + 1, grid.nz)), rng.standard_normal((grid.nx, grid.nz + 1)))
    v.u[[0, -1]] = 0.0
    v.w[:, [0, -1]] = 0.0
    lhs = inner_faces(gradient_cc(phi, grid), v, grid)
    rhs = -inner_cells(phi, divergence_fc(v, grid), grid)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("bc", BC_TAGS)
def test_matrix_matches_stencil(grid, bc):
    rng = np.random.default_rng(2)
    phi = rng.standard_normal(grid.shape)
    kw = {"robin_eta": 0.3} if bc == "robin_bottom" else {}
    L = laplacian_matrix(grid, bc, **kw)
    a = (L @ phi.ravel()).reshape(grid.shape)
    b = laplacian_cc(phi, grid, bc, **kw)
    assert np.allclose(a, b, atol=1e-10)


def test_laplacian_second_order():
    # lap(cos(pi x) cos(pi z)) = -2 pi^2 cos cos, Neumann-compatible
    errs = []
    for n in (16, 32, 64):
        g = Grid(n, n)
        X, Z = g.centers()
        f = np.cos(np.pi * X) * np.cos(np.pi * Z)
        lap = laplacian_cc(f, g)
        errs.append(np.abs(lap + 2 * np.pi ** 2 * f).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert rates.min() > 1.8


def test_dirichlet_data_enters_gradient():
    g = Grid(4, 4)
    phi = np.zeros(g.shape)
    G = gradient_cc(phi, g, "dirichlet_both", bottom=1.0, top=2.0)
    assert np.allclose(G.w[:, 0], -2.0 / g.dz)
    assert np.allclose(G.w[:, -1], 4.0 / g.dz)


def test_robin_gradient_interpolates():
    # eta -> 0 recovers Dirichlet
    g = Grid(4, 4)
    phi = np.ones(g.shape)
    Gr = gradient_cc(phi, g, "robin_bottom", bottom=0.0, robin_eta=1e-14)
    Gd = gradient_cc(phi, g, "dirichlet_bottom", bottom=0.0)
    assert np.allclose(Gr.w[:, 0], Gd.w[:, 0])
    with pytest.raises(ValueError):
        gradient_cc(phi, g, "robin_bottom")
    with pytest.raises(ValueError):
        gradient_cc(phi, g, "periodic")


def test_zero_mean_project():
    rng = np.random.default_rng(3)
    f = rng.standard_normal((9, 7)) + 1e8
    assert abs(zero_mean_project(f).mean()) < 1e-8


def test_norms_against_quadrature():
    g = Grid(40, 20, 2.0, 1.0)
    f = np.full(g.shape, 3.0)
    l2, h1, mx = norms(f, g)
    assert l2 == pytest.approx(3.0 * np.sqrt(2.0))
    assert h1 == 0.0 and mx == 3.0
    U = VectorField.zeros(g)
    U.u[1:-1] = 1.0
    l2u, h1u, mxu = norms(U, g)
    assert mxu == 1.0 and h1u > 0
    assert l2u ** 2 == pytest.approx(inner_faces(U, U, g))


def test_lp_norm_constant_field():
    g = Grid(8, 8)
    U = VectorField(np.full((9, 8), 3.0), np.full((8, 9), 4.0))
    assert lp_norm(U, g, 3.0) == pytest.approx(5.0)


def test_velocity_laplacian_against_loops():
    g = Grid(5, 4, 1.0, 0.8)
    rng = np.random.default_rng(4)
    u = np.zeros((g.nx + 1, g.nz))
    u[1:-1] = rng.standard_normal((g.nx - 1, g.nz))
    lu, _ = velocity_laplacians(g)
    got = (lu @ u[1:-1].ravel()).reshape(g.nx - 1, g.nz)
    ref = np.zeros_like(got)
    for i in range(1, g.nx):
        for j in range(g.nz):
            # no-slip ghost: u_ghost = -u at top and bottom walls
            down = u[i, j - 1] if j > 0 else -u[i, j]
            up = u[i, j + 1] if j < g.nz - 1 else -u[i, j]
            ref[i - 1, j] = ((u[i + 1, j] - 2 * u[i, j] + u[i - 1, j]) / g.dx ** 2
                             + (up - 2 * u[i, j] + down) / g.dz ** 2)
    assert np.allclose(got, ref)


def test_vector_field_algebra(grid):
    a = VectorField.zeros(grid)
    a.u += 1.0
    b = 2.0 * a
    assert (b - a).max_abs() == 1.0 and (a + b).max_abs() == 3.0
    c = a.copy()
    c.u[0, 0] = 7.0
    assert a.u[0, 0] == 1.0
    assert a.flat_interior().size == (grid.nx - 1) * grid.nz + grid.nx * (grid.nz - 1)

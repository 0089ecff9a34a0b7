import numpy as np
import pytest
import sympy as sy

from rtlab.errors import IncompatibleDivergence
from rtlab.grid import MacGrid
from rtlab.stokes import StokesProblem, solve_stokes, stokes_estimate_check

x, z = sy.symbols("x z")


def _fields(grid, exprs):
    fns = [sy.lambdify((x, z), e, "numpy") for e in exprs]
    X, Z = np.meshgrid(grid.xn, grid.zc, indexing="ij")
    X2, Z2 = np.meshgrid(grid.xc, grid.zn, indexing="ij")
    Xc, Zc = np.meshgrid(grid.xc, grid.zc, indexing="ij")
    bc = lambda v, shape: np.broadcast_to(v, shape).astype(float)  # noqa: E731
    return fns, (X, Z), (X2, Z2), (Xc, Zc), bc


def manufactured(n, mu=0.7, L=1.0, h=1.0):
    psi = (x * (L - x) * z * (h - z)) ** 2
    u, w = sy.diff(psi, z), -sy.diff(psi, x)
    q = sy.cos(2 * sy.pi * x / L) * (z - sy.Rational(1, 2) * h)
    fu = sy.diff(q, x) - mu * (sy.diff(u, x, 2) + sy.diff(u, z, 2))
    fw = sy.diff(q, z) - mu * (sy.diff(w, x, 2) + sy.diff(w, z, 2))
    grid = MacGrid(n, n, L, h)
    fns, U, W, C, bc = _fields(grid, (u, w, q, fu, fw))
    f = grid.pack(bc(fns[3](*U), grid.u_shape), bc(fns[4](*W), grid.w_shape))
    sol = solve_stokes(StokesProblem(grid, f, np.zeros(grid.n_cells), mu))
    ue = grid.pack(bc(fns[0](*U), grid.u_shape), bc(fns[1](*W), grid.w_shape))
    qe = bc(fns[2](*C), (grid.nx, grid.nz)).ravel()
    qe = qe - qe.mean()
    a = grid.cell_area
    return np.sqrt(a * np.sum((sol.u - ue) ** 2)), np.sqrt(a * np.sum((sol.q - qe) ** 2)), sol


def stokes_orders():
    eu, eq = [], []
    for n in (16, 32, 64):
        a, b, _ = manufactured(n)
        eu.append(a)
        eq.append(b)
    return np.log2(eu[0] / eu[1]), np.log2(eu[1] / eu[2]), np.log2(eq[1] / eq[2])


def test_zero_data_gives_zero():
    g = MacGrid(8, 8)
    sol = solve_stokes(StokesProblem(g, np.zeros(g.n_faces), np.zeros(g.n_cells)))
    assert not np.any(sol.u) and not np.any(sol.q)


def test_manufactured_second_order():
    o1, o2, oq = stokes_orders()
    assert o1 > 1.9 and o2 > 1.9 and oq > 1.9


def test_residuals_and_mean_zero_pressure():
    _, _, sol = manufactured(16)
    assert sol.residual_momentum < 1e-8 and sol.residual_div < 1e-8
    assert abs(sol.q.mean()) < 1e-12


def test_prescribed_divergence():
    # v = curl-free smooth field vanishing on the walls, g = div v
    g = MacGrid(24, 20, 1.0, 1.0)
    bump = (x * (1 - x) * z * (1 - z)) ** 2
    vx, vz = sy.diff(bump, x), sy.diff(bump, z)
    div = sy.diff(vx, x) + sy.diff(vz, z)
    f = sy.lambdify((x, z), div, "numpy")
    Xc, Zc = np.meshgrid(g.xc, g.zc, indexing="ij")
    gdiv = f(Xc, Zc).ravel()
    gdiv -= gdiv.mean()
    sol = solve_stokes(StokesProblem(g, np.zeros(g.n_faces), gdiv, 1.0))
    assert np.max(np.abs(g.D @ sol.u - gdiv)) < 1e-8 * max(1, np.abs(gdiv).max())


def test_incompatible_divergence():
    g = MacGrid(8, 8)
    with pytest.raises(IncompatibleDivergence):
        solve_stokes(StokesProblem(g, np.zeros(g.n_faces), np.ones(g.n_cells)))


@pytest.mark.parametrize("periodic", [False, True])
def test_linearity_and_determinism(periodic, rng):
    g = MacGrid(10, 12, 1.3, 1.0, periodic)
    def prob():
        gd = rng.standard_normal(g.n_cells)
        return rng.standard_normal(g.n_faces), gd - gd.mean()
    (f1, g1), (f2, g2) = prob(), prob()
    a, b = 0.37, -1.9
    s1 = solve_stokes(StokesProblem(g, f1, g1, 0.5))
    s2 = solve_stokes(StokesProblem(g, f2, g2, 0.5))
    s3 = solve_stokes(StokesProblem(g, a * f1 + b * f2, a * g1 + b * g2, 0.5))
    np.testing.assert_allclose(s3.u, a * s1.u + b * s2.u, atol=1e-10)
    np.testing.assert_allclose(s3.q, a * s1.q + b * s2.q, atol=1e-10)
    again = solve_stokes(StokesProblem(g, f1, g1, 0.5))
    assert np.array_equal(again.u, s1.u) and np.array_equal(again.q, s1.q)


def test_velocity_operator_symmetric_on_solenoidal_fields(rng):
    g = MacGrid(7, 9)
    A = g.A.toarray()
    v1 = g.C @ rng.standard_normal(g.n_corners)
    v2 = g.C @ rng.standard_normal(g.n_corners)
    assert abs(v1 @ A @ v2 - v2 @ A @ v1) < 1e-9 * abs(v1 @ A @ v2)
    assert v1 @ A @ v1 > 0


def test_estimate_ratio():
    g = MacGrid(12, 12)
    zero = StokesProblem(g, np.zeros(g.n_faces), np.zeros(g.n_cells))
    assert stokes_estimate_check(zero, solve_stokes(zero)) == 0.0
    rng = np.random.default_rng(3)
    f = rng.standard_normal(g.n_faces)
    ratios = []
    for c in (1e-3, 1.0, 1e3):
        p = StokesProblem(g, c * f, np.zeros(g.n_cells))
        ratios.append(stokes_estimate_check(p, solve_stokes(p)))
    assert max(ratios) / min(ratios) - 1 < 1e-10

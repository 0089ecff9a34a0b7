"""Compatible initial data: linear eigen-data plus a second-order corrector.

The raw data ``delta * (rho~, u~, q~)`` does not satisfy the compatibility
condition of the nonlinear problem at ``t = 0``: the initial acceleration
has a nonzero divergence of size ``delta**2``.  The corrector ``(u_r, q_r)``
removes it exactly.  First an auxiliary Stokes field ``Upsilon`` is built
whose divergence cancels the density-induced part, then ``(u_r, q_r)`` is
the fixed point of

    w -> Stokes_mu[ rho_f (Upsilon - adv(delta u~ + delta^2 w)) / delta^2 ]

with ``rho_f`` the total density at faces.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .discrete import Discretization, advection
from .errors import DensityUnderflow, NotContracting
from .normal_modes.fields import EigenTriple
from .stokes import StokesProblem, solve_stokes

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50


@dataclass
class InitialDataBundle:
    delta: float
    eigen: EigenTriple
    u_r: np.ndarray
    q_r: np.ndarray
    rho0: np.ndarray
    u0: np.ndarray
    q0: np.ndarray
    upsilon: np.ndarray | None = None
    q_aux: np.ndarray | None = None
    N0: np.ndarray | None = None
    iterations: int = 0
    iterates_log: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    corrected: bool = True


def _l2(grid, v: np.ndarray) -> float:
    return float(np.sqrt(grid.cell_area * float(v @ v)))


def face_density(disc: Discretization, rho: np.ndarray) -> np.ndarray:
    return disc.rho_faces + disc.grid.P @ rho


def _check_positive(disc: Discretization, rho0: np.ndarray) -> np.ndarray:
    total = disc.rho_cells + rho0
    floor = 0.5 * float(disc.rho_cells.min())
    if float(total.min()) < floor:
        raise DensityUnderflow(f"rho + perturbation drops to {total.min():.3e} (< half the background minimum)")
    return face_density(disc, rho0)


def solve_auxiliary_upsilon(delta: float, eigen: EigenTriple, disc: Discretization):
    """Unit-viscosity Stokes field with ``div Upsilon = -delta Lambda div(P rho0 u~ / rho_f)``."""
    rho0 = delta * eigen.rho
    rf = _check_positive(disc, rho0)
    grid = disc.grid
    flux = (grid.P @ rho0) * eigen.u / rf
    gdiv = -delta * eigen.rate * (grid.D @ flux)
    sol = solve_stokes(StokesProblem(grid, np.zeros(grid.n_faces), gdiv, 1.0))
    return sol.u, sol.q


def corrector_iteration(delta: float, eigen: EigenTriple, upsilon: np.ndarray, disc: Discretization,
                        tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Fixed-point iteration for ``(u_r, q_r)``.

    Returns ``(u_r, q_r, log)`` where each log entry records the iteration
    index, the successive-difference norm and the decay ratio.
    """
    grid = disc.grid
    rf = _check_positive(disc, delta * eigen.rho)
    mu = disc.params.mu
    base = delta * eigen.u
    w = np.zeros(grid.n_faces)
    q = np.zeros(grid.n_cells)
    history = []
    prev = None
    growing = 0
    for it in range(1, max_iter + 1):
        src = rf * (upsilon - advection(grid, base + delta * delta * w)) / (delta * delta)
        sol = solve_stokes(StokesProblem(grid, src, np.zeros(grid.n_cells), mu))
        diff = _l2(grid, sol.u - w) + _l2(grid, sol.q - q)
        ratio = diff / prev if prev else float("nan")
        history.append({"iteration": it, "difference": diff, "ratio": ratio})
        w, q = sol.u, sol.q
        if prev is not None and diff > prev:
            growing += 1
            if growing >= 3:
                raise NotContracting(f"corrector diverges at delta={delta:g}", delta=delta)
        else:
            growing = 0
        if diff <= tol:
            return w, q, history
        prev = diff
    raise NotContracting(f"corrector did not reach tol {tol:g} in {max_iter} iterations", delta=delta)


def _ld(M) -> sp.csr_matrix:
    return sp.csr_matrix(M, dtype=np.longdouble)


def initial_acceleration(disc: Discretization, rho0: np.ndarray, u0: np.ndarray, q0: np.ndarray,
                         lorentz: np.ndarray | None = None) -> np.ndarray:
    """``u_t`` at ``t = 0`` implied by the nonlinear momentum equation (long double)."""
    grid = disc.grid
    L = np.longdouble
    rho0, u0, q0 = (np.asarray(a, dtype=L) for a in (rho0, u0, q0))
    rf = disc.rho_faces.astype(L) + _ld(grid.P) @ rho0
    force = (_ld(grid.G) @ q0 + L(disc.params.mu) * (_ld(grid.A) @ u0)
             + L(disc.params.g) * (_ld(grid.Pz) @ rho0))
    if lorentz is not None:
        force = force - np.asarray(lorentz, dtype=L)
    adv = advection(grid, np.asarray(u0, dtype=float)).astype(L)
    return -adv - force / rf


def _wall_cells(grid) -> np.ndarray:
    ii, jj = np.meshgrid(np.arange(grid.nx), np.arange(grid.nz), indexing="ij")
    m = (jj == 0) | (jj == grid.nz - 1)
    if not grid.periodic:
        m |= (ii == 0) | (ii == grid.nx - 1)
    return m.ravel()


def _wall_trace(disc: Discretization, rho0, u0, q0) -> float:
    """Extrapolated wall value of the normal force balance (a diagnostic)."""
    grid = disc.grid
    rho0, u0, q0 = (np.asarray(a, dtype=float) for a in (rho0, u0, q0))
    force = grid.G @ q0 + disc.params.mu * (grid.A @ u0) + disc.params.g * (grid.Pz @ rho0)
    _, fw = grid.unpack(force)
    # linear extrapolation of the vertical force from the first two interior rows
    bottom = 2.0 * fw[:, 1] - fw[:, 2]
    top = 2.0 * fw[:, -2] - fw[:, -3]
    vals = np.concatenate([bottom, top])
    return float(np.sqrt(grid.dx * float(vals @ vals)))


def check_compatibility(bundle: InitialDataBundle, disc: Discretization, lorentz: np.ndarray | None = None) -> dict:
    """Divergence of the initial acceleration, away from and next to the walls."""
    grid = disc.grid
    ut = initial_acceleration(disc, bundle.rho0, bundle.u0, bundle.q0, lorentz)
    div = _ld(grid.D) @ ut
    wall = _wall_cells(grid)
    a = grid.cell_area
    interior = float(np.sqrt(a * np.sum(div[~wall] ** 2)))
    boundary = float(np.sqrt(a * np.sum(div[wall] ** 2)))
    d2 = bundle.delta ** 2
    out = {
        "interior_residual": interior,
        "boundary_residual": boundary,
        "interior_relative": interior / d2,
        "boundary_relative": boundary / d2,
        "wall_trace": _wall_trace(disc, bundle.rho0, bundle.u0, bundle.q0),
        "divergence_u0": float(np.max(np.abs(grid.D @ np.asarray(bundle.u0, dtype=float)))),
        "min_total_density": float(np.min(disc.rho_cells + np.asarray(bundle.rho0, dtype=float))),
    }
    return out


def build_initial_data(delta: float, eigen: EigenTriple, disc: Discretization, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, correct: bool = True) -> InitialDataBundle:
    """Assemble ``delta * eigen + delta^2 * (0, u_r, q_r)`` with its residual report."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    grid = disc.grid
    rho0 = delta * eigen.rho
    _check_positive(disc, rho0)
    if correct:
        ups, qa = solve_auxiliary_upsilon(delta, eigen, disc)
        u_r, q_r, hist = corrector_iteration(delta, eigen, ups, disc, tol, max_iter)
    else:
        ups = qa = None
        u_r, q_r, hist = np.zeros(grid.n_faces), np.zeros(grid.n_cells), []
    # the data are kept in long double so the residual check sees the construction,
    # not the float64 rounding of delta-sized terms
    L = np.longdouble
    d, d2 = L(delta), L(delta) * L(delta)
    q_t = eigen.q_ext if eigen.q_ext is not None else eigen.q.astype(L)
    b = InitialDataBundle(delta=delta, eigen=eigen, u_r=u_r, q_r=q_r, rho0=d * eigen.rho.astype(L),
                          u0=d * eigen.u.astype(L) + d2 * u_r, q0=d * q_t + d2 * q_r,
                          upsilon=ups, q_aux=qa, iterations=len(hist), iterates_log=hist, corrected=correct)
    b.residuals = check_compatibility(b, disc)
    return b


def mhd_initial_data_stub(delta: float, eigen: EigenTriple, disc: Discretization, M3: float) -> InitialDataBundle:
    """Raw MHD data ``delta * (rho~, u~, q~, N~)`` with residuals reported but not corrected."""
    grid = disc.grid
    b = build_initial_data(delta, eigen, disc, correct=False)
    if eigen.N is not None:
        b.N0 = delta * eigen.N
    else:
        b.N0 = delta * M3 * (grid.Z @ eigen.u) / eigen.rate if M3 else np.zeros(grid.n_N)
    lorentz = disc.params.lam * M3 * (grid.Zp @ b.N0) if M3 else None
    b.residuals = check_compatibility(b, disc, lorentz)
    b.residuals["div_N0"] = float(np.max(np.abs(grid.N_divergence(b.N0)))) if b.N0.size else 0.0
    # wall values of the induction tendency M3 d_z u: nonzero for a generic mode
    Nt = M3 * (grid.Z @ np.asarray(b.u0, dtype=float))
    N1, _ = grid.unpack_N(Nt)
    b.residuals["magnetic_wall_residual"] = float(np.sqrt(grid.dx * (np.sum(N1[:, 0] ** 2) + np.sum(N1[:, -1] ** 2))))
    return b

"""Grid-consistent eigenmode fields on the staggered simulation grid.

The spectral mode gives a very good starting vector; the discrete
linearized operator is then solved near that rate so that the fields are an
exact (to solver precision) eigenvector of the time stepper's spatial
operator.  This is what makes eigen-initialized runs grow cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigs, splu

from ..discrete import Discretization
from ..errors import DegenerateMode
from ..grid import MacGrid
from ..profiles import DensityProfile, PhysicalParams
from ..stokes import WeightedPoisson
from .box import box_streamfunction
from .layer import ModeResult


@dataclass
class EigenTriple:
    rho: np.ndarray  # cells
    u: np.ndarray  # packed interior faces
    q: np.ndarray  # cells, zero mean
    rate: float  # grid-consistent growth rate
    spectral_rate: float
    N: np.ndarray | None = None
    momentum_residual: float = 0.0
    q_ext: np.ndarray | None = field(default=None, repr=False)  # long-double pressure

    @property
    def Lambda(self) -> float:
        return self.rate


def spectral_streamfunction(mode: ModeResult, grid: MacGrid) -> np.ndarray:
    """Streamfunction of ``mode`` at the grid's interior corners."""
    if mode.backend == "box":
        psi = box_streamfunction(mode, grid.xn, grid.zn)
    else:
        k = mode.k
        phi = mode.basis.eval(grid.zn) @ mode.coeffs
        # w = phi cos(kx), u = -(phi'/k) sin(kx)
        psi = -np.outer(np.sin(k * grid.xn), phi) / k
    return grid.corners_interior(psi)


def _polish(J, E, x, lam, iters=3):
    # a few steps of Rayleigh-shifted inverse iteration on the real pencil
    for _ in range(iters):
        lu = splu((J - lam * E).tocsc())
        y = lu.solve(E @ x)
        x = y / np.linalg.norm(y)
        Ex = E @ x
        lam = float(x @ (J @ x)) / float(x @ Ex) if abs(x @ Ex) > 0 else lam
    return x, lam


def _ld(M) -> sp.csr_matrix:
    return sp.csr_matrix(M, dtype=np.longdouble)


def recover_pressure(disc: Discretization, u: np.ndarray, rho: np.ndarray, rate: float,
                     lorentz: np.ndarray | None = None, refine: int = 3):
    """Zero-mean pressure balancing ``rate R u = -G q - mu A u - g Pz rho (+ lorentz)``.

    The float64 solve is refined in long double so that the weighted
    divergence of the balance vanishes well below float64 backward error.
    Returns ``(q, q_ext, relative momentum residual)``.
    """
    g = disc.grid
    L = np.longdouble
    D, G, A, Pz = _ld(g.D), _ld(g.G), _ld(g.A), _ld(g.Pz)
    R = disc.rho_faces.astype(L)
    rest = L(disc.params.mu) * (A @ u.astype(L)) + L(disc.params.g) * (Pz @ rho.astype(L))
    if lorentz is not None:
        rest = rest - lorentz.astype(L)
    rhs = -(D @ (rest / R)) - L(rate) * (D @ u.astype(L))
    rhs = rhs - rhs.mean()
    solver = WeightedPoisson(g, disc.rho_faces)
    q = solver.solve(np.asarray(rhs, dtype=float)).astype(L)
    for _ in range(refine):
        r = rhs - D @ ((G @ q) / R)
        q = q + solver.solve(np.asarray(r, dtype=float)).astype(L)
        q = q - q.mean()
    res = L(rate) * R * u.astype(L) + G @ q + rest
    scale = max(float(np.linalg.norm(rate * disc.rho_faces * u)), 1e-300)
    return np.asarray(q, dtype=float), q, float(np.linalg.norm(np.asarray(res, dtype=float))) / scale


def eigenfunction_fields(mode: ModeResult, prof: DensityProfile, params: PhysicalParams, grid: MacGrid,
                         M3: float = 0.0, polish: bool = True) -> EigenTriple:
    """Eigen-triple ``(rho, u, q)`` on ``grid`` with ``rho = -T u / Lambda``.

    The amplitude is normalized so that the background-density weighted
    kinetic norm ``sum R u^2 dA`` equals one and the largest vertical velocity
    component is positive.
    """
    if not mode.rate > 0:
        raise DegenerateMode("eigenfunction fields need a positive growth rate")
    disc = Discretization(grid, prof, params)
    psi0 = spectral_streamfunction(mode, grid)
    u0 = grid.C @ psi0
    rate = mode.rate
    if polish:
        J, E = disc.linear_blocks(M3)
        parts = [-(disc.T @ u0) / rate, psi0]
        if M3:
            parts.append(M3 * (grid.Z @ u0) / rate)
        v0 = np.concatenate(parts)
        v0 = v0 / np.linalg.norm(v0)
        sigma = rate * 1.02 + 1e-3
        vals, vecs = eigs(J, k=1, M=E, sigma=sigma, v0=v0, which="LM", tol=1e-13)
        lam = float(vals[0].real)
        x = vecs[:, 0]
        # fix the complex phase: align with the spectral guess
        x = (x * np.exp(-1j * np.angle(np.vdot(v0, x)))).real
        x, lam = _polish(J, E, x / np.linalg.norm(x), lam)
        nc = grid.n_cells
        psi = x[nc:nc + grid.n_corners]
        rate = lam
    else:
        psi = psi0
    u = grid.C @ psi
    if u @ v_sign(grid, u) < 0:
        u = -u
    nrm = np.sqrt(grid.cell_area * float(u @ (disc.rho_faces * u)))
    if not nrm > 0:
        raise DegenerateMode("eigen velocity vanished")
    u = u / nrm
    rho = -(disc.T @ u) / rate
    N = None
    lorentz = None
    if M3:
        N = M3 * (grid.Z @ u) / rate
        lorentz = params.lam * M3 * (grid.Zp @ N)
    q, q_ext, res = recover_pressure(disc, u, rho, rate, lorentz)
    w = u[grid.n_u:]
    if not np.any(w):
        raise DegenerateMode("vertical velocity of the eigenmode is identically zero")
    return EigenTriple(rho=rho, u=u, q=q, rate=float(rate), spectral_rate=float(mode.rate), N=N,
                       momentum_residual=res, q_ext=q_ext)


def v_sign(grid: MacGrid, u: np.ndarray) -> np.ndarray:
    """Selector whose sign fixes the eigenvector orientation (largest vertical velocity)."""
    s = np.zeros_like(u)
    i = grid.n_u + int(np.argmax(np.abs(u[grid.n_u:])))
    s[i] = 1.0
    return s

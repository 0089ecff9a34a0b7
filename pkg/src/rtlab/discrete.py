"""Profile-dependent discrete operators shared by the eigen solver and the steppers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .grid import MacGrid
from .profiles import DensityProfile, PhysicalParams


@dataclass(frozen=True)
class Discretization:
    """A grid paired with a background state and physical constants.

    ``R`` is the background density at faces, ``T`` maps face velocity to the
    linear density tendency so that ``rho_t = -T u``.
    """

    grid: MacGrid
    prof: DensityProfile
    params: PhysicalParams

    @cached_property
    def rho_cells(self) -> np.ndarray:
        z = np.broadcast_to(self.grid.zc, (self.grid.nx, self.grid.nz))
        return self.prof.rho(z).ravel().astype(float)

    @cached_property
    def rho_faces(self) -> np.ndarray:
        return np.asarray(self.prof.rho(self.grid.face_z()), dtype=float)

    @cached_property
    def drho_faces(self) -> np.ndarray:
        beta = np.asarray(self.prof.drho(self.grid.face_z()), dtype=float) * np.ones(self.grid.n_faces)
        beta[: self.grid.n_u] = 0.0
        return beta

    @cached_property
    def R(self) -> sp.dia_matrix:
        return sp.diags(self.rho_faces)

    @cached_property
    def T(self) -> sp.csr_matrix:
        return self.grid.T(self.drho_faces)

    @property
    def face_weight(self) -> float:
        return self.grid.cell_area

    def linear_blocks(self, M3: float = 0.0):
        """Sparse ``(J, E)`` of the linearized system in ``(rho, psi[, N])`` variables.

        The semi-discrete dynamics is ``E x_t = J x`` with ``u = C psi``; the
        pressure drops out because ``C^T G = 0``.
        """
        g = self.grid
        C = g.C
        Ct = C.T.tocsr()
        mu, grav, lam = self.params.mu, self.params.g, self.params.lam
        nc = g.n_cells
        mass = (Ct @ self.R @ C).tocsc()
        J11 = (-mu * (Ct @ g.A @ C)).tocsc()
        J10 = (-grav * (Ct @ g.Pz)).tocsc()
        J01 = (-(self.T @ C)).tocsc()
        if not M3:
            J = sp.bmat([[None, J01], [J10, J11]], format="csc")
            E = sp.block_diag([sp.identity(nc), mass], format="csc")
            return J, E
        J12 = (lam * M3 * (Ct @ g.Zp)).tocsc()
        J21 = (M3 * (g.Z @ C)).tocsc()
        nN = g.n_N
        J = sp.bmat([[sp.csc_matrix((nc, nc)), J01, None], [J10, J11, J12], [None, J21, sp.csc_matrix((nN, nN))]],
                    format="csc")
        E = sp.block_diag([sp.identity(nc), mass, sp.identity(nN)], format="csc")
        return J, E


def advection(grid: MacGrid, u: np.ndarray) -> np.ndarray:
    """Packed ``(v . grad) v`` for a packed face velocity."""
    uf, wf = grid.unpack(u)
    au, aw = kernels.advect_velocity(uf, wf, grid.dx, grid.dz, grid.periodic)
    return grid.pack(au, aw)


def flux_divergence(grid: MacGrid, rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Cell-wise divergence of the limited upwind flux ``v * rho``."""
    uf, wf = grid.unpack(u)
    r = rho.reshape(grid.nx, grid.nz)
    fu, fw = kernels.muscl_fluxes(r, uf, wf, grid.periodic)
    if grid.periodic:
        dfx = (np.roll(fu, -1, axis=0) - fu) / grid.dx
    else:
        dfx = (fu[1:] - fu[:-1]) / grid.dx
    dfz = (fw[:, 1:] - fw[:, :-1]) / grid.dz
    return (dfx + dfz).ravel()

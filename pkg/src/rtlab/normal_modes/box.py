"""Growth rate of the clamped 2D box ``[0, L] x [0, h]``.

The velocity is the curl of a streamfunction, ``u = (d_z psi, -d_x psi)``,
expanded in tensor products of clamped Legendre modes so that
``psi = d_n psi = 0`` on all four walls.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..geometry import BOX, Geometry
from ..profiles import DensityProfile, PhysicalParams
from .basis import ClampedBasis
from .layer import ModeResult, bisect_rate, rate_upper_bound, top_eig, MAX_ITER, ROOT_TOL


@lru_cache(maxsize=8)
def _box_matrices(prof: DensityProfile, params: PhysicalParams, length: float, nx: int, nz: int):
    bx = ClampedBasis(nx, length)
    bz = ClampedBasis(nz, prof.height)
    X0, X1, X2 = bx.W0, bx.W1, bx.W2
    Z0, Z1, Z2 = bz.W0, bz.W1, bz.W2
    mass = np.kron(X1, bz.form(0, 0, prof.rho)) + np.kron(X0, bz.form(1, 1, prof.rho))
    drive = params.g * np.kron(X1, bz.form(0, 0, prof.drho))
    visc = params.mu * (np.kron(X2, Z0) + 2.0 * np.kron(X1, Z1) + np.kron(X0, Z2))
    return bx, bz, mass, drive, visc


def box_alpha(s: float, prof: DensityProfile, params: PhysicalParams, geom: Geometry):
    _, _, mass, drive, visc = _box_matrices(prof, params, geom.length, geom.nx, geom.nz)
    return top_eig(drive - s * visc, mass)


def box_growth_rate(prof: DensityProfile, params: PhysicalParams, geom: Geometry,
                    tol: float = ROOT_TOL, max_iter: int = MAX_ITER) -> ModeResult:
    if geom.kind != BOX:
        raise ValueError("box_growth_rate needs a box-clamped geometry")
    bx, bz, mass, drive, visc = _box_matrices(prof, params, geom.length, geom.nx, geom.nz)

    def afn(s):
        return top_eig(drive - s * visc, mass)

    rate, c, it, trace, a0 = bisect_rate(afn, rate_upper_bound(prof, params), tol, max_iter)
    c = c / np.sqrt(float(c @ mass @ c))
    C = c.reshape(geom.nx, geom.nz)
    x = np.linspace(0.0, geom.length, 2 * geom.nx + 1)
    z = np.linspace(0.0, geom.height, 2 * geom.nz + 1)
    psi = bx.eval(x) @ C @ bz.eval(z).T
    i = np.unravel_index(np.argmax(np.abs(psi)), psi.shape)
    if psi[i] < 0:
        C, psi = -C, -psi
    return ModeResult(k=None, rate=float(rate), phi=psi, z=z, alpha_trace=trace, converged=True,
                      iterations=it, alpha0=a0, coeffs=C, backend="box", basis=(bx, bz))


def box_streamfunction(mode: ModeResult, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Evaluate a box mode's streamfunction on the tensor grid ``x`` by ``z``."""
    bx, bz = mode.basis
    return bx.eval(x) @ mode.coeffs @ bz.eval(z).T

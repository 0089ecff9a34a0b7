"""Vectorized numpy versions of the stepper kernels."""

import numpy as np


def _pad_x(a, periodic, ghost_sign):
    if periodic:
        return np.concatenate([a[-1:], a, a[:1]], axis=0)
    return np.concatenate([ghost_sign * a[:1], a, ghost_sign * a[-1:]], axis=0)


def advect_velocity(u, w, dx, dz, periodic):
    """Advective term ``(v . grad) v`` on the staggered grid.

    ``u`` holds all x-faces, ``w`` all z-faces.  Returns arrays of the same
    shapes; wall faces get zero.
    """
    au = np.zeros_like(u)
    aw = np.zeros_like(w)

    # x-faces
    if periodic:
        uc = u
        ul = np.roll(u, 1, axis=0)
        ur = np.roll(u, -1, axis=0)
        wl = np.roll(w, 1, axis=0)  # cell i-1
        wr = w  # cell i
    else:
        uc = u[1:-1]
        ul = u[:-2]
        ur = u[2:]
        wl = w[:-1]
        wr = w[1:]
    ug = np.concatenate([-uc[:, :1], uc, -uc[:, -1:]], axis=1)
    dudz = (ug[:, 2:] - ug[:, :-2]) / (2 * dz)
    dudx = (ur - ul) / (2 * dx)
    wbar = 0.25 * (wl[:, :-1] + wr[:, :-1] + wl[:, 1:] + wr[:, 1:])
    adv = uc * dudx + wbar * dudz
    if periodic:
        au[:] = adv
    else:
        au[1:-1] = adv

    # z-faces (interior rows j = 1..nz-1)
    wc = w[:, 1:-1]
    dwdz = (w[:, 2:] - w[:, :-2]) / (2 * dz)
    wg = _pad_x(wc, periodic, -1.0)
    dwdx = (wg[2:] - wg[:-2]) / (2 * dx)
    if periodic:
        ua = u
        ub = np.roll(u, -1, axis=0)
    else:
        ua = u[:-1]
        ub = u[1:]
    ubar = 0.25 * (ua[:, :-1] + ub[:, :-1] + ua[:, 1:] + ub[:, 1:])
    aw[:, 1:-1] = ubar * dwdx + wc * dwdz
    return au, aw


def _minmod(a, b):
    return np.where(a * b > 0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def muscl_fluxes(rho, u, w, periodic):
    """Upwind MUSCL/minmod face fluxes ``v * rho_face``.

    ``rho`` is a cell field; returns fluxes on all x-faces and z-faces (wall
    faces carry zero flux since the normal velocity vanishes there).
    """
    # slopes in x
    if periodic:
        dp = np.roll(rho, -1, axis=0) - rho
        dm = rho - np.roll(rho, 1, axis=0)
        sx = _minmod(dp, dm)
    else:
        sx = np.zeros_like(rho)
        sx[1:-1] = _minmod(rho[2:] - rho[1:-1], rho[1:-1] - rho[:-2])
    sz = np.zeros_like(rho)
    sz[:, 1:-1] = _minmod(rho[:, 2:] - rho[:, 1:-1], rho[:, 1:-1] - rho[:, :-2])

    fu = np.zeros_like(u)
    if periodic:
        left = np.roll(rho + 0.5 * sx, 1, axis=0)  # right edge of cell i-1
        right = rho - 0.5 * sx  # left edge of cell i
        vel = u
        fu[:] = np.where(vel > 0, vel * left, vel * right)
    else:
        left = (rho + 0.5 * sx)[:-1]
        right = (rho - 0.5 * sx)[1:]
        vel = u[1:-1]
        fu[1:-1] = np.where(vel > 0, vel * left, vel * right)

    fw = np.zeros_like(w)
    below = (rho + 0.5 * sz)[:, :-1]
    above = (rho - 0.5 * sz)[:, 1:]
    vel = w[:, 1:-1]
    fw[:, 1:-1] = np.where(vel > 0, vel * below, vel * above)
    return fu, fw

"""numba-compiled versions of the stepper kernels (same semantics as numpy_impl)."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _advect(u, w, dx, dz, periodic):
    nx = w.shape[0]
    nz = w.shape[1] - 1
    au = np.zeros_like(u)
    aw = np.zeros_like(w)
    i_lo = 0 if periodic else 1
    for i in range(i_lo, nx):
        im = (i - 1) % nx if periodic else i - 1
        ip = (i + 1) % nx if periodic else i + 1
        # cells on either side of x-face i
        cl = (i - 1) % nx if periodic else i - 1
        cr = i
        for j in range(nz):
            uc = u[i, j]
            dn = u[i, j - 1] if j > 0 else -uc
            up = u[i, j + 1] if j < nz - 1 else -uc
            dudz = (up - dn) / (2.0 * dz)
            dudx = (u[ip, j] - u[im, j]) / (2.0 * dx)
            wbar = 0.25 * (w[cl, j] + w[cr, j] + w[cl, j + 1] + w[cr, j + 1])
            au[i, j] = uc * dudx + wbar * dudz
    for i in range(nx):
        fa = i
        fb = (i + 1) % nx if periodic else i + 1
        for j in range(1, nz):
            wc = w[i, j]
            dwdz = (w[i, j + 1] - w[i, j - 1]) / (2.0 * dz)
            if periodic:
                wl = w[(i - 1) % nx, j]
                wr = w[(i + 1) % nx, j]
            else:
                wl = w[i - 1, j] if i > 0 else -wc
                wr = w[i + 1, j] if i < nx - 1 else -wc
            dwdx = (wr - wl) / (2.0 * dx)
            ubar = 0.25 * (u[fa, j - 1] + u[fb, j - 1] + u[fa, j] + u[fb, j])
            aw[i, j] = ubar * dwdx + wc * dwdz
    return au, aw


def advect_velocity(u, w, dx, dz, periodic):
    return _advect(np.ascontiguousarray(u, dtype=np.float64), np.ascontiguousarray(w, dtype=np.float64),
                   float(dx), float(dz), bool(periodic))


@njit(cache=True, inline="always")
def _minmod(a, b):
    if a * b <= 0.0:
        return 0.0
    return a if abs(a) < abs(b) else b


@njit(cache=True, nogil=True)
def _muscl(rho, u, w, periodic):
    nx, nz = rho.shape
    sx = np.zeros_like(rho)
    sz = np.zeros_like(rho)
    for i in range(nx):
        for j in range(nz):
            if periodic:
                sx[i, j] = _minmod(rho[(i + 1) % nx, j] - rho[i, j], rho[i, j] - rho[(i - 1) % nx, j])
            elif 0 < i < nx - 1:
                sx[i, j] = _minmod(rho[i + 1, j] - rho[i, j], rho[i, j] - rho[i - 1, j])
            if 0 < j < nz - 1:
                sz[i, j] = _minmod(rho[i, j + 1] - rho[i, j], rho[i, j] - rho[i, j - 1])
    fu = np.zeros_like(u)
    fw = np.zeros_like(w)
    i_lo = 0 if periodic else 1
    for i in range(i_lo, nx):
        cl = (i - 1) % nx if periodic else i - 1
        for j in range(nz):
            v = u[i, j]
            if v > 0:
                fu[i, j] = v * (rho[cl, j] + 0.5 * sx[cl, j])
            else:
                fu[i, j] = v * (rho[i, j] - 0.5 * sx[i, j])
    for i in range(nx):
        for j in range(1, nz):
            v = w[i, j]
            if v > 0:
                fw[i, j] = v * (rho[i, j - 1] + 0.5 * sz[i, j - 1])
            else:
                fw[i, j] = v * (rho[i, j] - 0.5 * sz[i, j])
    return fu, fw


def muscl_fluxes(rho, u, w, periodic):
    return _muscl(np.ascontiguousarray(rho, dtype=np.float64), np.ascontiguousarray(u, dtype=np.float64),
                  np.ascontiguousarray(w, dtype=np.float64), bool(periodic))

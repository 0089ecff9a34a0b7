"""Staggered (MAC) grid on ``[0, L] x [0, h]`` and its sparse operators.

Layout, with ``i`` the horizontal and ``j`` the vertical index (row-major
``(i, j)`` arrays):

* cell centers ``(nx, nz)``: density perturbation, pressure
* x-faces ``(nx+1, nz)`` for a box, ``(nx, nz)`` when periodic in x
* z-faces ``(nx, nz+1)``
* corners ``(nx+1, nz+1)`` (box) / ``(nx, nz+1)`` (periodic): streamfunction

Walls are no-slip.  Normal velocity on a wall face is zero and not an
unknown; tangential no-slip uses the mirror ghost ``u_ghost = -u``.
Operators act on the packed vector of interior face unknowns
``[u_interior.ravel(), w_interior.ravel()]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import BadSpec


@dataclass(frozen=True)
class MacGrid:
    nx: int
    nz: int
    length: float = 1.0
    height: float = 1.0
    periodic: bool = False

    def __post_init__(self):
        if self.nx < 2 or self.nz < 2:
            raise BadSpec("grid needs at least 2 cells per direction")
        if not (self.length > 0 and self.height > 0):
            raise BadSpec("grid lengths must be positive")

    # geometry -----------------------------------------------------------
    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def dz(self) -> float:
        return self.height / self.nz

    @property
    def cell_area(self) -> float:
        return self.dx * self.dz

    @property
    def area(self) -> float:
        return self.length * self.height

    @property
    def u_shape(self) -> tuple[int, int]:
        return (self.nx if self.periodic else self.nx + 1, self.nz)

    @property
    def w_shape(self) -> tuple[int, int]:
        return (self.nx, self.nz + 1)

    @property
    def n_cells(self) -> int:
        return self.nx * self.nz

    @property
    def n_u(self) -> int:
        return (self.nx if self.periodic else self.nx - 1) * self.nz

    @property
    def n_w(self) -> int:
        return self.nx * (self.nz - 1)

    @property
    def n_faces(self) -> int:
        return self.n_u + self.n_w

    @cached_property
    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @cached_property
    def zc(self) -> np.ndarray:
        return (np.arange(self.nz) + 0.5) * self.dz

    @cached_property
    def xn(self) -> np.ndarray:
        """x positions of x-faces / corners (full set)."""
        return np.arange(self.u_shape[0]) * self.dx

    @cached_property
    def zn(self) -> np.ndarray:
        """z positions of z-faces / corners (full set)."""
        return np.arange(self.nz + 1) * self.dz

    # packing --------------------------------------------------------------
    @property
    def _i0(self) -> int:
        return 0 if self.periodic else 1

    def pack(self, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        ui = u if self.periodic else u[1:-1]
        return np.concatenate([ui.ravel(), w[:, 1:-1].ravel()])

    def unpack(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = np.zeros(self.u_shape)
        w = np.zeros(self.w_shape)
        nu = self.n_u
        if self.periodic:
            u[:] = v[:nu].reshape(self.nx, self.nz)
        else:
            u[1:-1] = v[:nu].reshape(self.nx - 1, self.nz)
        w[:, 1:-1] = v[nu:].reshape(self.nx, self.nz - 1)
        return u, w

    def cell_index(self, i, j):
        return np.asarray(i) * self.nz + np.asarray(j)

    def u_index(self, i, j):
        """Packed index of x-face (i, j); -1 for wall faces."""
        i = np.asarray(i)
        j = np.asarray(j)
        if self.periodic:
            return (i % self.nx) * self.nz + j
        out = (i - 1) * self.nz + j
        return np.where((i <= 0) | (i >= self.nx), -1, out)

    def w_index(self, i, j):
        i = np.asarray(i)
        j = np.asarray(j)
        if self.periodic:
            i = i % self.nx
        out = self.n_u + i * (self.nz - 1) + (j - 1)
        return np.where((j <= 0) | (j >= self.nz), -1, out)

    def _u_faces(self):
        ii, jj = np.meshgrid(np.arange(self._i0, self._i0 + self.n_u // self.nz), np.arange(self.nz),
                             indexing="ij")
        return ii.ravel(), jj.ravel()

    def _w_faces(self):
        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(1, self.nz), indexing="ij")
        return ii.ravel(), jj.ravel()

    # sparse operators -------------------------------------------------------
    @cached_property
    def D(self) -> sp.csr_matrix:
        """Divergence, interior faces to cells."""
        rows, cols, vals = [], [], []
        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(self.nz), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        c = self.cell_index(ii, jj)
        for idx, sgn, h in (
            (self.u_index(ii + 1, jj), 1.0, self.dx),
            (self.u_index(ii, jj), -1.0, self.dx),
            (self.w_index(ii, jj + 1), 1.0, self.dz),
            (self.w_index(ii, jj), -1.0, self.dz),
        ):
            m = idx >= 0
            rows.append(c[m])
            cols.append(idx[m])
            vals.append(np.full(m.sum(), sgn / h))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_cells, self.n_faces))

    @cached_property
    def G(self) -> sp.csr_matrix:
        """Gradient, cells to interior faces (the negative adjoint of D)."""
        return (-self.D.T).tocsr()

    @cached_property
    def A(self) -> sp.csr_matrix:
        """Minus the vector Laplacian with no-slip walls (symmetric positive definite)."""
        rows, cols, vals = [], [], []
        dx2, dz2 = 1.0 / self.dx**2, 1.0 / self.dz**2

        def add(r, c, v):
            m = c >= 0
            rows.append(r[m])
            cols.append(c[m])
            vals.append(np.broadcast_to(v, r.shape)[m])

        # x-faces: neighbors in x are faces (wall faces vanish), in z mirror ghosts
        ii, jj = self._u_faces()
        r = self.u_index(ii, jj)
        diag = np.full(r.shape, 2 * dx2 + 2 * dz2)
        diag = diag + dz2 * ((jj == 0).astype(float) + (jj == self.nz - 1).astype(float))
        add(r, r, diag)
        add(r, self.u_index(ii - 1, jj), -dx2)
        add(r, self.u_index(ii + 1, jj), -dx2)
        add(r, np.where(jj > 0, self.u_index(ii, np.maximum(jj - 1, 0)), -1), -dz2)
        add(r, np.where(jj < self.nz - 1, self.u_index(ii, np.minimum(jj + 1, self.nz - 1)), -1), -dz2)

        # z-faces: neighbors in z are faces (wall faces vanish), in x mirror ghosts (box)
        ii, jj = self._w_faces()
        r = self.w_index(ii, jj)
        diag = np.full(r.shape, 2 * dx2 + 2 * dz2)
        if not self.periodic:
            diag = diag + dx2 * ((ii == 0).astype(float) + (ii == self.nx - 1).astype(float))
            left = np.where(ii > 0, self.w_index(np.maximum(ii - 1, 0), jj), -1)
            right = np.where(ii < self.nx - 1, self.w_index(np.minimum(ii + 1, self.nx - 1), jj), -1)
        else:
            left = self.w_index(ii - 1, jj)
            right = self.w_index(ii + 1, jj)
        add(r, r, diag)
        add(r, left, -dx2)
        add(r, right, -dx2)
        add(r, self.w_index(ii, jj - 1), -dz2)
        add(r, self.w_index(ii, jj + 1), -dz2)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_faces, self.n_faces))

    @cached_property
    def Az(self) -> sp.csr_matrix:
        """Minus the vertical second difference (the z-part of ``A``)."""
        return (-(self.Zp @ self.Z)).tocsr()

    @cached_property
    def P(self) -> sp.csr_matrix:
        """Cell-to-face averaging for all interior faces."""
        rows, cols, vals = [], [], []
        ii, jj = self._u_faces()
        r = self.u_index(ii, jj)
        for ci in (ii - 1, ii):
            rows.append(r)
            cols.append(self.cell_index(ci % self.nx, jj))
            vals.append(np.full(r.shape, 0.5))
        ii, jj = self._w_faces()
        r = self.w_index(ii, jj)
        for cj in (jj - 1, jj):
            rows.append(r)
            cols.append(self.cell_index(ii, cj))
            vals.append(np.full(r.shape, 0.5))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_faces, self.n_cells))

    @cached_property
    def Pz(self) -> sp.csr_matrix:
        """Cell-to-z-face averaging (x-face rows are zero): carries buoyancy."""
        mask = np.zeros(self.n_faces)
        mask[self.n_u:] = 1.0
        return (sp.diags(mask) @ self.P).tocsr()

    def T(self, beta_w: np.ndarray) -> sp.csr_matrix:
        """Face-to-cell operator ``(T v)_c = mean over the cell's z-faces of beta * w``.

        ``beta_w`` holds a weight per packed face (only z-faces matter).
        """
        return (self.Pz.T @ sp.diags(beta_w)).tocsr()

    @cached_property
    def C(self) -> sp.csr_matrix:
        """Discrete curl from interior corners to faces; ``D @ C == 0``."""
        ncx = self.nx if self.periodic else self.nx - 1
        ncz = self.nz - 1

        def corner(i, j):
            i = np.asarray(i)
            j = np.asarray(j)
            if self.periodic:
                i = i % self.nx
                bad = (j <= 0) | (j >= self.nz)
                return np.where(bad, -1, i * ncz + (j - 1))
            bad = (i <= 0) | (i >= self.nx) | (j <= 0) | (j >= self.nz)
            return np.where(bad, -1, (i - 1) * ncz + (j - 1))

        rows, cols, vals = [], [], []

        def add(r, c, v):
            m = c >= 0
            rows.append(r[m])
            cols.append(c[m])
            vals.append(np.full(m.sum(), v))

        ii, jj = self._u_faces()
        r = self.u_index(ii, jj)
        add(r, corner(ii, jj + 1), 1.0 / self.dz)
        add(r, corner(ii, jj), -1.0 / self.dz)
        ii, jj = self._w_faces()
        r = self.w_index(ii, jj)
        add(r, corner(ii + 1, jj), -1.0 / self.dx)
        add(r, corner(ii, jj), 1.0 / self.dx)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_faces, ncx * ncz))

    @property
    def n_corners(self) -> int:
        return self.C.shape[1]

    def corners_full(self, psi_int: np.ndarray) -> np.ndarray:
        """Embed interior-corner values into the full corner array (walls zero)."""
        out = np.zeros((self.u_shape[0], self.nz + 1))
        ncz = self.nz - 1
        if self.periodic:
            out[:, 1:-1] = psi_int.reshape(self.nx, ncz)
        else:
            out[1:-1, 1:-1] = psi_int.reshape(self.nx - 1, ncz)
        return out

    def corners_interior(self, psi_full: np.ndarray) -> np.ndarray:
        if self.periodic:
            return psi_full[:, 1:-1].ravel()
        return psi_full[1:-1, 1:-1].ravel()

    # magnetic-field operators ------------------------------------------------
    @property
    def n_N1(self) -> int:
        return (self.n_u // self.nz) * (self.nz + 1)

    @property
    def n_N(self) -> int:
        return self.n_N1 + self.n_cells

    @cached_property
    def Z(self) -> sp.csr_matrix:
        """Vertical derivative of the face velocity.

        Horizontal component goes to (x-face, z-node) points including the
        walls, vertical component to cell centers.
        """
        ncol = self.n_u // self.nz
        rows, cols, vals = [], [], []
        ii, jj = np.meshgrid(np.arange(ncol), np.arange(self.nz + 1), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        r = ii * (self.nz + 1) + jj
        fi = ii + self._i0
        up = np.where(jj < self.nz, self.u_index(fi, np.minimum(jj, self.nz - 1)), -1)
        dn = np.where(jj > 0, self.u_index(fi, np.maximum(jj - 1, 0)), -1)
        # mirror ghost at the walls doubles the one-sided value
        wu = np.where(jj == 0, 2.0, 1.0) / self.dz
        wd = np.where(jj == self.nz, 2.0, 1.0) / self.dz
        for c, v in ((up, wu), (dn, -wd)):
            m = c >= 0
            rows.append(r[m])
            cols.append(c[m])
            vals.append(v[m])
        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(self.nz), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        r = self.n_N1 + self.cell_index(ii, jj)
        for c, v in ((self.w_index(ii, jj + 1), 1.0 / self.dz), (self.w_index(ii, jj), -1.0 / self.dz)):
            m = c >= 0
            rows.append(r[m])
            cols.append(c[m])
            vals.append(np.full(m.sum(), v))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_N, self.n_faces))

    @cached_property
    def Zp(self) -> sp.csr_matrix:
        """Vertical derivative from magnetic-field points back to faces."""
        rows, cols, vals = [], [], []
        ii, jj = self._u_faces()
        r = self.u_index(ii, jj)
        n = (ii - self._i0) * (self.nz + 1) + jj
        rows += [r, r]
        cols += [n + 1, n]
        vals += [np.full(r.shape, 1.0 / self.dz), np.full(r.shape, -1.0 / self.dz)]
        ii, jj = self._w_faces()
        r = self.w_index(ii, jj)
        rows += [r, r]
        cols += [self.n_N1 + self.cell_index(ii, jj), self.n_N1 + self.cell_index(ii, jj - 1)]
        vals += [np.full(r.shape, 1.0 / self.dz), np.full(r.shape, -1.0 / self.dz)]
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_faces, self.n_N))

    def unpack_N(self, n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ncol = self.n_u // self.nz
        return n[: self.n_N1].reshape(ncol, self.nz + 1), n[self.n_N1:].reshape(self.nx, self.nz)

    @cached_property
    def N_weights(self) -> np.ndarray:
        """Quadrature weights for magnetic-field points (trapezoid on z-nodes)."""
        ncol = self.n_u // self.nz
        w1 = np.full((ncol, self.nz + 1), self.cell_area)
        w1[:, 0] *= 0.5
        w1[:, -1] *= 0.5
        return np.concatenate([w1.ravel(), np.full(self.n_cells, self.cell_area)])

    def N_divergence(self, n: np.ndarray) -> np.ndarray:
        """Divergence of the magnetic perturbation at interior z-faces."""
        N1, N3 = self.unpack_N(n)
        if self.periodic:
            d1 = (np.roll(N1, -1, axis=0) - N1) / self.dx
        else:
            full = np.zeros((self.nx + 1, self.nz + 1))
            full[1:-1] = N1
            d1 = (full[1:] - full[:-1]) / self.dx
        d3 = (N3[:, 1:] - N3[:, :-1]) / self.dz
        return d1[:, 1:-1] + d3

    # profile-dependent diagonals ---------------------------------------------------
    def face_z(self) -> np.ndarray:
        """Vertical coordinate of every packed face."""
        ii, jj = self._u_faces()
        zu = (jj + 0.5) * self.dz
        ii, jj = self._w_faces()
        zw = jj * self.dz
        return np.concatenate([zu, zw])

    def face_x(self) -> np.ndarray:
        ii, jj = self._u_faces()
        xu = ii * self.dx
        ii, jj = self._w_faces()
        xw = (ii + 0.5) * self.dx
        return np.concatenate([xu, xw])

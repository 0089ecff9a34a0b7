"""Steady Stokes solver and the weighted pressure Poisson problem on the MAC grid.

Both are bordered saddle-point systems solved by a cached sparse LU.  The
pressure is pinned to zero mean with a Lagrange multiplier row.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import IncompatibleDivergence, SolverFailure
from .grid import MacGrid

COMPAT_TOL = 1e-10
RESID_TOL = 1e-8

_lock = threading.Lock()
_stokes_cache: dict = {}


@dataclass
class StokesProblem:
    """``G q + c A u = f``, ``D u = g_div`` with ``u = 0`` on walls.

    ``f`` is packed over interior faces, ``g_div`` is a cell field
    (flattened row-major).
    """

    grid: MacGrid
    f: np.ndarray
    g_div: np.ndarray
    coef: float = 1.0

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float).ravel()
        self.g_div = np.asarray(self.g_div, dtype=float).ravel()
        if self.f.shape != (self.grid.n_faces,) or self.g_div.shape != (self.grid.n_cells,):
            raise ValueError("Stokes data has the wrong shape for this grid")
        if not self.coef > 0:
            raise ValueError("momentum coefficient must be positive")


@dataclass
class StokesSolution:
    u: np.ndarray
    q: np.ndarray
    residual_momentum: float = 0.0
    residual_div: float = 0.0
    info: dict = field(default_factory=dict)


def _stokes_lu(grid: MacGrid, coef: float):
    key = (grid, float(coef))
    with _lock:
        lu = _stokes_cache.get(key)
        if lu is None:
            e = sp.csc_matrix(np.full((grid.n_cells, 1), grid.cell_area))
            K = sp.bmat(
                [[coef * grid.A, grid.G, None], [grid.G.T, None, e], [None, e.T, None]],
                format="csc",
            )
            lu = splu(K, permc_spec="COLAMD")
            _stokes_cache[key] = lu
    return lu


def clear_cache() -> None:
    with _lock:
        _stokes_cache.clear()


def solve_stokes(prob: StokesProblem) -> StokesSolution:
    grid = prob.grid
    g = prob.g_div
    scale = max(1.0, float(np.max(np.abs(g))) if g.size else 1.0)
    mean = float(np.mean(g))
    if abs(mean) > COMPAT_TOL * scale:
        raise IncompatibleDivergence(f"divergence data has nonzero mean {mean:.3e}")
    g = g - mean
    lu = _stokes_lu(grid, prob.coef)
    nf, nc = grid.n_faces, grid.n_cells
    rhs = np.concatenate([prob.f, -g, [0.0]])
    x = lu.solve(rhs)
    # one step of iterative refinement keeps residuals near round-off
    K_apply = _apply_stokes(grid, prob.coef)
    r = rhs - K_apply(x)
    x = x + lu.solve(r)
    u, q = x[:nf], x[nf:nf + nc]
    rm = grid.G @ q + prob.coef * (grid.A @ u) - prob.f
    rd = grid.D @ u - g
    fs = max(float(np.linalg.norm(prob.f)), float(np.linalg.norm(prob.coef * (grid.A @ u))), 1e-300)
    gs = max(float(np.linalg.norm(g)), float(np.linalg.norm(grid.D @ u, ord=np.inf)), 1e-300)
    res_m = float(np.linalg.norm(rm)) / fs if np.any(prob.f) or np.any(u) else 0.0
    res_d = float(np.linalg.norm(rd)) / gs if np.any(g) else float(np.linalg.norm(rd))
    if not (np.isfinite(res_m) and np.isfinite(res_d)) or res_m > RESID_TOL or res_d > RESID_TOL:
        raise SolverFailure(f"Stokes residuals too large: momentum {res_m:.2e}, divergence {res_d:.2e}")
    return StokesSolution(u=u, q=q, residual_momentum=res_m, residual_div=res_d)


def _apply_stokes(grid: MacGrid, coef: float):
    A, G = grid.A, grid.G
    a = grid.cell_area
    nf, nc = grid.n_faces, grid.n_cells

    def apply(x):
        u, q, lm = x[:nf], x[nf:nf + nc], x[-1]
        return np.concatenate([coef * (A @ u) + G @ q, G.T @ u + a * lm, [a * q.sum()]])

    return apply


def stokes_norms(grid: MacGrid, u: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    """Discrete H1 norm of ``u`` and L2 norm of ``q``."""
    a = grid.cell_area
    h1 = float(np.sqrt(a * (u @ u + u @ (grid.A @ u))))
    l2 = float(np.sqrt(a * (q @ q)))
    return h1, l2


def stokes_estimate_check(prob: StokesProblem, sol: StokesSolution) -> float:
    """Ratio of the solution size to the data size (H1 x L2 over H^-1-ish x L2 proxies)."""
    a = prob.grid.cell_area
    h1, l2 = stokes_norms(prob.grid, sol.u, sol.q)
    data = float(np.sqrt(a * (prob.f @ prob.f))) + float(np.sqrt(a * (prob.g_div @ prob.g_div)))
    if data == 0.0:
        return 0.0
    return (h1 + l2) / data


class WeightedPoisson:
    """Solves ``D (G p / rho) = b`` with zero-mean ``p``.

    ``rho`` is a positive face density.  Factorizations are keyed by the
    density used to build them; callers can reuse a nearby factorization and
    refine iteratively (see :meth:`solve`).
    """

    def __init__(self, grid: MacGrid, rho_faces: np.ndarray):
        self.grid = grid
        self.rho = np.asarray(rho_faces, dtype=float).copy()
        nc = grid.n_cells
        self.K = self._matrix(self.rho)
        self._lu = splu(self.K, permc_spec="COLAMD")
        self._e = np.full(nc, grid.cell_area)

    def _matrix(self, rho):
        g = self.grid
        L = (g.D @ sp.diags(1.0 / rho) @ g.G).tocsc()
        e = sp.csc_matrix(np.full((g.n_cells, 1), g.cell_area))
        return sp.bmat([[L, e], [e.T, None]], format="csc")

    def _apply(self, rho, p):
        g = self.grid
        return g.D @ ((g.G @ p) / rho)

    def solve(self, b: np.ndarray, rho: np.ndarray | None = None, tol: float = 1e-14,
              max_refine: int = 60) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        b = b - b.mean()
        if rho is None:
            x = self._lu.solve(np.concatenate([b, [0.0]]))
            r = np.concatenate([b - self.K[:-1, :-1] @ x[:-1] - self._e * x[-1], [-self._e @ x[:-1]]])
            x = x + self._lu.solve(r)
            return x[:-1]
        # iterative refinement with the cached factorization as preconditioner
        p = np.zeros(self.grid.n_cells)
        bn = max(float(np.linalg.norm(b)), 1e-300)
        for _ in range(max_refine):
            r = b - self._apply(rho, p)
            r = r - r.mean()
            if np.linalg.norm(r) <= tol * bn:
                return p - p.mean()
            dp = self._lu.solve(np.concatenate([r, [0.0]]))[:-1]
            p = p + dp
        raise SolverFailure("pressure refinement did not converge; refactor with the current density")

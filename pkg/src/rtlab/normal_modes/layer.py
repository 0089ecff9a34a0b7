"""Growth rates of the periodic layer, one horizontal wavenumber at a time.

For a divergence-free field ``w = ((i/k) phi', phi) exp(i k x)`` with
``phi = phi' = 0`` on both walls the variational growth rate reduces to a
1D generalized eigenproblem in ``phi``:

    alpha(s, k) = max  [g int rho' phi^2 - lam M3^2 int(phi''^2/k^2 + phi'^2)
                        - s mu int(phi''^2/k^2 + 2 phi'^2 + k^2 phi^2)]
                       / int rho (phi^2 + phi'^2/k^2)

and the growth rate is the root of ``s^2 = alpha(s)``.  All forms are
multiplied through by ``k^2`` before solving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, eigh

from ..errors import NoConvergence, SingularForms
from ..geometry import LAYER, Geometry
from ..profiles import DensityProfile, PhysicalParams
from .basis import ClampedBasis

ROOT_TOL = 1e-9
MAX_ITER = 200


@dataclass
class ModeResult:
    k: float | None
    rate: float
    phi: np.ndarray
    z: np.ndarray
    alpha_trace: list = field(default_factory=list)
    converged: bool = True
    iterations: int = 0
    alpha0: float = 0.0
    coeffs: np.ndarray | None = None
    M3: float = 0.0
    backend: str = "layer"
    basis: object = field(default=None, repr=False)

    @property
    def Lambda(self) -> float:
        return self.rate

    def residual(self, alpha_fn: Callable[[float], float]) -> float:
        return abs(self.rate**2 - alpha_fn(self.rate))


@lru_cache(maxsize=32)
def _forms(prof: DensityProfile, nz: int):
    b = ClampedBasis(nz, prof.height)
    return b, {
        "W0": b.W0,
        "W1": b.W1,
        "W2": b.W2,
        "W0r": b.form(0, 0, prof.rho),
        "W1r": b.form(1, 1, prof.rho),
        "W0d": b.form(0, 0, prof.drho),
    }


def _layer_matrices(k: float, prof: DensityProfile, params: PhysicalParams, geom: Geometry, M3: float):
    b, F = _forms(prof, geom.nz)
    k2 = k * k
    mass = k2 * F["W0r"] + F["W1r"]
    drive = params.g * k2 * F["W0d"]
    if M3:
        drive = drive - params.lam * M3 * M3 * (F["W2"] + k2 * F["W1"])
    visc = params.mu * (F["W2"] + 2 * k2 * F["W1"] + k2 * k2 * F["W0"])
    return b, mass, drive, visc


def top_eig(A: np.ndarray, M: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenpair of the symmetric pencil ``(A, M)``."""
    n = A.shape[0]
    try:
        w, v = eigh(A, M, subset_by_index=[n - 1, n - 1])
    except LinAlgError as exc:
        raise SingularForms("mass form is not positive definite") from exc
    return float(w[0]), v[:, 0]


def alpha(s: float, k: float, prof: DensityProfile, params: PhysicalParams, geom: Geometry,
          M3: float = 0.0) -> tuple[float, np.ndarray]:
    """Largest value of the reduced Rayleigh quotient at trial rate ``s``.

    Returns ``(alpha, coefficients of the maximizing phi)``.
    """
    if geom.kind != LAYER:
        raise ValueError("alpha is defined for the layer geometry")
    _, mass, drive, visc = _layer_matrices(k, prof, params, geom, M3)
    return top_eig(drive - s * visc, mass)


def bisect_rate(alpha_fn: Callable[[float], tuple[float, np.ndarray]], s_hi: float,
                tol: float = ROOT_TOL, max_iter: int = MAX_ITER):
    """Root of ``F(s) = s^2 - alpha(s)`` on ``[0, s_hi]``.

    ``F`` is strictly increasing, so plain bisection is safe even where
    ``alpha`` has kinks.  The final value is the secant point of the last
    bracket.  Returns ``(rate, vector, iterations, trace, alpha0)``.
    """
    a0, v0 = alpha_fn(0.0)
    trace = [(0.0, a0)]
    if a0 <= 0.0:
        return 0.0, v0, 0, trace, a0
    lo, hi = 0.0, float(s_hi)
    f_lo = -a0
    a_hi, _ = alpha_fn(hi)
    trace.append((hi, a_hi))
    f_hi = hi * hi - a_hi
    while f_hi <= 0.0:
        # the bound should make this unreachable; widen defensively
        lo, f_lo = hi, f_hi
        hi *= 2.0
        a_hi, _ = alpha_fn(hi)
        trace.append((hi, a_hi))
        f_hi = hi * hi - a_hi
    it = 0
    while hi - lo > tol:
        it += 1
        if it > max_iter:
            raise NoConvergence(f"bisection exceeded {max_iter} iterations")
        mid = 0.5 * (lo + hi)
        am, _ = alpha_fn(mid)
        trace.append((mid, am))
        fm = mid * mid - am
        if fm > 0.0:
            hi, f_hi = mid, fm
        else:
            lo, f_lo = mid, fm
    s = lo - f_lo * (hi - lo) / (f_hi - f_lo)
    s = min(max(s, lo), hi)
    a_s, v = alpha_fn(s)
    trace.append((s, a_s))
    return s, v, it, trace, a0


def rate_upper_bound(prof: DensityProfile, params: PhysicalParams) -> float:
    return math.sqrt(max(params.g * prof.max_buoyancy_ratio(), 0.0)) + 1.0


def _normalize(b: ClampedBasis, c: np.ndarray, mass: np.ndarray, k: float, nz_out: int):
    # unit rho-weighted norm: int rho (phi^2 + phi'^2/k^2) = 1 (mass is k^2-scaled)
    nrm = math.sqrt(float(c @ mass @ c) / (k * k))
    c = c / nrm
    z = np.linspace(0.0, b.length, nz_out)
    phi = b.eval(z) @ c
    i = int(np.argmax(np.abs(phi)))
    if phi[i] < 0:
        c, phi = -c, -phi
    return c, z, phi


def solve_growth_rate(k: float, prof: DensityProfile, params: PhysicalParams, geom: Geometry,
                      M3: float = 0.0, tol: float = ROOT_TOL, max_iter: int = MAX_ITER) -> ModeResult:
    """Growth rate of horizontal wavenumber ``k`` on the periodic layer."""
    if not (k > 0):
        raise ValueError("wavenumber must be positive")
    b, mass, drive, visc = _layer_matrices(k, prof, params, geom, M3)

    def afn(s):
        return top_eig(drive - s * visc, mass)

    rate, c, it, trace, a0 = bisect_rate(afn, rate_upper_bound(prof, params), tol, max_iter)
    c, z, phi = _normalize(b, c, mass, k, geom.nz + 1)
    return ModeResult(k=float(k), rate=float(rate), phi=phi, z=z, alpha_trace=trace,
                      converged=True, iterations=it, alpha0=a0, coeffs=c, M3=float(M3),
                      backend="layer" if not M3 else "layer-mhd", basis=b)


def mhd_growth_rate(k: float, M3: float, lam: float, prof: DensityProfile, params: PhysicalParams,
                    geom: Geometry, **kw) -> ModeResult:
    """Growth rate with a vertical background field ``M3``; magnetic tension only subtracts."""
    p = PhysicalParams(mu=params.mu, g=params.g, lam=lam, M3=M3)
    return solve_growth_rate(k, prof, p, geom, M3=M3, **kw)


def max_over_wavenumbers(k_grid: Sequence[float], prof: DensityProfile, params: PhysicalParams,
                         geom: Geometry, M3: float = 0.0) -> dict:
    ks = np.asarray(list(k_grid), dtype=float)
    if ks.size == 0 or np.any(ks <= 0) or np.any(np.diff(ks) < 0):
        raise ValueError("k_grid must be nonempty, positive and sorted")
    modes = [solve_growth_rate(k, prof, params, geom, M3=M3) for k in ks]
    rates = np.array([m.rate for m in modes])
    i = int(np.argmax(rates))
    return {
        "Lambda_star": float(rates[i]),
        "k_star": float(ks[i]),
        "table": [
            {"k": float(k), "Lambda": m.rate, "alpha_at_0": m.alpha0, "iterations": m.iterations,
             "converged": m.converged}
            for k, m in zip(ks, modes)
        ],
        "modes": modes,
    }


@dataclass
class MhdStabilityReport:
    m_star: float
    k_star: float | None
    per_k: list
    threshold_field: float
    table: list = field(default_factory=list)


def critical_ratio(k: float, prof: DensityProfile, params: PhysicalParams, geom: Geometry) -> float:
    """max g int rho' phi^2 / int(phi''^2/k^2 + phi'^2) over clamped phi."""
    _, F = _forms(prof, geom.nz)
    k2 = k * k
    num = params.g * k2 * F["W0d"]
    den = F["W2"] + k2 * F["W1"]
    val, _ = top_eig(num, den)
    return max(val, 0.0)


def critical_field(prof: DensityProfile, lam: float, k_grid: Sequence[float], geom: Geometry,
                   params: PhysicalParams, M3_grid: Sequence[float] | None = None) -> MhdStabilityReport:
    """Critical field: the mode at ``k`` is unstable iff ``M3^2 < m_star(k)``."""
    if not (lam > 0):
        raise ValueError("lambda must be positive")
    ks = np.asarray(list(k_grid), dtype=float)
    per_k = [{"k": float(k), "m_star": critical_ratio(k, prof, params, geom) / lam} for k in ks]
    i = int(np.argmax([r["m_star"] for r in per_k]))
    m_star = per_k[i]["m_star"]
    table = []
    if M3_grid is not None:
        for M3 in M3_grid:
            row = {"M3": float(M3)}
            for k in ks:
                row[f"Lambda_k{k:g}"] = mhd_growth_rate(k, M3, lam, prof, params, geom).rate
            table.append(row)
    return MhdStabilityReport(m_star=m_star, k_star=per_k[i]["k"] if m_star > 0 else None,
                              per_k=per_k, threshold_field=math.sqrt(m_star), table=table)

"""Time integration of the perturbation equations on the staggered grid.

Three modes share one first-order semi-implicit scheme:

* ``nonlinear``: density advected by ``T u`` plus a limited upwind flux of the
  perturbation, momentum with the total density ``R + P rho``;
* ``linear``: the same scheme with the advective terms removed and the
  density coefficient frozen at the background;
* ``linear-mhd``: ``linear`` plus a vertical-field magnetic perturbation.

Each step: explicit density update, implicit viscous predictor with the
lagged pressure, then an incremental variable-coefficient projection.  As
the perturbation tends to zero the nonlinear step reduces exactly to the
linear one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .discrete import Discretization, advection, flux_divergence
from .errors import CflViolation, DensityUnderflow, SolverFailure

log = logging.getLogger(__name__)

MODES = ("nonlinear", "linear", "linear-mhd")
REFACTOR_THRESHOLD = 0.05
SOLVE_TOL = 1e-14
DIV_TOL = 1e-10


@dataclass
class FieldState:
    t: float
    rho: np.ndarray
    u: np.ndarray
    q: np.ndarray
    N: np.ndarray | None = None

    def copy(self) -> "FieldState":
        return FieldState(self.t, self.rho.copy(), self.u.copy(), self.q.copy(),
                          None if self.N is None else self.N.copy())

    @classmethod
    def zeros(cls, disc: Discretization, mhd: bool = False) -> "FieldState":
        g = disc.grid
        return cls(0.0, np.zeros(g.n_cells), np.zeros(g.n_faces), np.zeros(g.n_cells),
                   np.zeros(g.n_N) if mhd else None)

    @classmethod
    def from_bundle(cls, bundle) -> "FieldState":
        f = lambda a: np.asarray(a, dtype=float).copy()  # noqa: E731
        return cls(0.0, f(bundle.rho0), f(bundle.u0), f(bundle.q0),
                   None if bundle.N0 is None else f(bundle.N0))


@dataclass
class EnergyReport:
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def append(self, row: dict) -> None:
        if not self.columns:
            self.columns = list(row)
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return self.column("t")


# ---------------------------------------------------------------------------
# norms


def norms(disc: Discretization, s: FieldState, ref: FieldState | None = None) -> dict:
    """L1 and L2 norms of the perturbation, optionally of its difference to ``ref``."""
    g = disc.grid
    a = g.cell_area
    nu = g.n_u
    rho, u = s.rho, s.u
    out = {
        "rho_L1": a * float(np.abs(rho).sum()),
        "uh_L1": a * float(np.abs(u[:nu]).sum()),
        "u3_L1": a * float(np.abs(u[nu:]).sum()),
        "rho_L2": float(np.sqrt(a * rho @ rho)),
        "u_L2": float(np.sqrt(a * u @ u)),
    }
    out["L2"] = float(np.hypot(out["rho_L2"], out["u_L2"]))
    if s.N is not None:
        w = g.N_weights
        n1 = g.n_N1
        out["Nh_L1"] = float(w[:n1] @ np.abs(s.N[:n1]))
        out["N3_L1"] = float(w[n1:] @ np.abs(s.N[n1:]))
    if ref is not None:
        dr, du = rho - ref.rho, u - ref.u
        out["diff_L1"] = a * float(np.abs(dr).sum() + np.abs(du).sum())
        out["diff_L2"] = float(np.sqrt(a * (dr @ dr + du @ du)))
    return out


def _diagnostics(disc: Discretization, s: FieldState, rho_t, u_t, div_max: float) -> dict:
    g = disc.grid
    a = g.cell_area
    p = disc.params
    rec = {"t": s.t}
    rec.update(norms(disc, s))
    u, rho = s.u, s.rho
    Au = g.A @ u
    uAu = float(u @ Au)
    grad_rho = g.G @ rho
    rf = disc.rho_faces + g.P @ rho
    rec["H1_u"] = float(np.sqrt(a * (u @ u + uAu)))
    rec["H2_u"] = float(np.sqrt(a * (u @ u + uAu + Au @ Au)))
    rec["kinetic"] = 0.5 * a * float(rf @ (u * u))
    rec["kinetic_linear"] = 0.5 * a * float(disc.rho_faces @ (u * u))
    rec["dissipation"] = p.mu * a * uAu
    rec["buoyancy_flux"] = -p.g * a * float(rho @ (g.Pz.T @ u))
    ut_h1 = float(u_t @ u_t + u_t @ (g.A @ u_t))
    rec["E_proxy"] = a * float(rho @ rho + grad_rho @ grad_rho + u @ u + uAu + Au @ Au + rho_t @ rho_t + u_t @ u_t)
    rec["D_proxy"] = a * float(uAu + Au @ Au + ut_h1)
    rec["div_max"] = div_max
    rec["mass"] = a * float(rho.sum())
    if s.N is not None:
        rec["magnetic"] = 0.5 * p.lam * float(g.N_weights @ (s.N * s.N))
    return rec


# ---------------------------------------------------------------------------
# stepper


class Stepper:
    """Fixed-step integrator for one discretization, time step and mode."""

    def __init__(self, disc: Discretization, dt: float, mode: str = "nonlinear", M3: float = 0.0,
                 cfl: float = 1.0):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.disc = disc
        self.grid = disc.grid
        self.dt = float(dt)
        self.mode = mode
        self.M3 = float(M3) if mode == "linear-mhd" else 0.0
        self.cfl = float(cfl)
        g = self.grid
        self._A = g.A.tocsc()
        self._ref_rho = disc.rho_faces.copy()
        self._factor(self._ref_rho)
        self.refactorizations = 0

    def _factor(self, rho_f: np.ndarray) -> None:
        from .stokes import WeightedPoisson

        g = self.grid
        M = (sp.diags(rho_f / self.dt) + self.disc.params.mu * self._A).tocsc()
        self._mom_lu = splu(M, permc_spec="COLAMD")
        self._poisson = WeightedPoisson(g, rho_f)
        self._ref_rho = rho_f.copy()

    # linear algebra with a possibly stale factorization ---------------------
    def _momentum_solve(self, rho_f: np.ndarray | None, b: np.ndarray) -> np.ndarray:
        x = self._mom_lu.solve(b)
        mu = self.disc.params.mu
        dt = self.dt
        rf = self._ref_rho if rho_f is None else rho_f
        bn = max(float(np.linalg.norm(b)), 1e-300)
        for _ in range(60):
            r = b - (rf / dt) * x - mu * (self._A @ x)
            if np.linalg.norm(r) <= SOLVE_TOL * bn:
                return x
            x = x + self._mom_lu.solve(r)
        raise SolverFailure("momentum solve did not converge")

    def check_cfl(self, s: FieldState) -> None:
        g = self.grid
        h = min(g.dx, g.dz)
        rho_min = float(np.min(self.disc.rho_cells + (s.rho if self.mode == "nonlinear" else 0.0)))
        if rho_min <= 0.0:
            raise DensityUnderflow(f"total density nonpositive at t={s.t:g}", time=s.t)
        limit = h * h * rho_min / self.disc.params.mu
        if self.mode == "nonlinear":
            umax = float(np.max(np.abs(s.u))) if s.u.size else 0.0
            if umax > 0:
                limit = min(limit, h / umax)
        if self.dt > self.cfl * limit * (1 + 1e-12):
            raise CflViolation(f"dt={self.dt:g} exceeds the stability limit {self.cfl * limit:.4g} at t={s.t:g}")

    def step(self, s: FieldState) -> tuple[FieldState, float]:
        """Advance one step; returns ``(new state, max |div u|)``."""
        self.check_cfl(s)
        g, disc, dt = self.grid, self.disc, self.dt
        p = disc.params
        nonlinear = self.mode == "nonlinear"

        rho = s.rho - dt * (disc.T @ s.u)
        if nonlinear:
            rho = rho - dt * flux_divergence(g, s.rho, s.u)
            total = disc.rho_cells + rho
            if float(total.min()) <= 0.0:
                raise DensityUnderflow(f"total density nonpositive at t={s.t + dt:g}", time=s.t + dt)
            rho_f = disc.rho_faces + g.P @ rho
        else:
            rho_f = None
        rf = disc.rho_faces if rho_f is None else rho_f

        b = rf * s.u / dt - g.G @ s.q - p.g * (g.Pz @ rho)
        if nonlinear:
            b = b - rf * advection(g, s.u)
        N = None
        if self.mode == "linear-mhd":
            N = s.N + dt * self.M3 * (g.Z @ s.u)
            b = b + p.lam * self.M3 * (g.Zp @ N)
        elif s.N is not None:
            N = s.N.copy()

        if rho_f is not None and float(np.max(np.abs(rho_f / self._ref_rho - 1.0))) > REFACTOR_THRESHOLD:
            self._factor(rho_f)
            self.refactorizations += 1
        ustar = self._momentum_solve(rho_f, b)
        rhs = g.D @ ustar / dt
        if rho_f is None:
            phi = self._poisson.solve(rhs)
        else:
            phi = self._poisson.solve(rhs, rho=rho_f, tol=SOLVE_TOL)
        u = ustar - dt * (g.G @ phi) / rf
        div = float(np.max(np.abs(g.D @ u))) if u.size else 0.0
        return FieldState(s.t + dt, rho, u, s.q + phi, N), div


def step_nonlinear(disc: Discretization, s: FieldState, dt: float) -> FieldState:
    return Stepper(disc, dt, "nonlinear").step(s)[0]


def step_linear(disc: Discretization, s: FieldState, dt: float) -> FieldState:
    return Stepper(disc, dt, "linear").step(s)[0]


def step_linear_mhd(disc: Discretization, s: FieldState, dt: float, M3: float) -> FieldState:
    if s.N is None:
        s = s.copy()
        s.N = np.zeros(disc.grid.n_N)
    return Stepper(disc, dt, "linear-mhd", M3=M3).step(s)[0]


Observer = Callable[[FieldState, dict], None]


def run(disc: Discretization, init: FieldState, T_end: float, dt: float, mode: str = "nonlinear",
        every: int = 1, observers: Iterable[Observer] = (), M3: float = 0.0, cfl: float = 1.0,
        stop: Callable[[dict], bool] | None = None, stepper: Stepper | None = None
        ) -> tuple[FieldState, EnergyReport]:
    """Integrate from ``init`` to ``T_end`` with a fixed step.

    The number of steps is ``round(T_end / dt)``.  A diagnostics row is taken
    every ``every`` steps (time derivatives by one-sided differences) and
    passed to each observer.  ``stop`` may end the run early after any
    sampled row.
    """
    report = EnergyReport()
    if T_end <= 0:
        return init, report
    nsteps = int(round(T_end / dt))
    if nsteps < 1:
        raise ValueError("T_end is shorter than one time step")
    if mode == "linear-mhd" and init.N is None:
        init = init.copy()
        init.N = np.zeros(disc.grid.n_N)
    st = stepper or Stepper(disc, dt, mode, M3=M3, cfl=cfl)
    observers = list(observers)
    s = init
    div_max = float(np.max(np.abs(disc.grid.D @ s.u)))
    for n in range(nsteps):
        try:
            new, div = st.step(s)
        except (DensityUnderflow, CflViolation, SolverFailure) as exc:
            exc.args = (f"{exc.args[0]} (run failed at t={s.t:g})",) + exc.args[1:]
            raise
        if n % every == 0:
            rec = _diagnostics(disc, s, (new.rho - s.rho) / dt, (new.u - s.u) / dt, div_max)
            report.append(rec)
            for ob in observers:
                ob(s, rec)
            if stop is not None and stop(rec):
                return s, report
        prev, s, div_max = s, new, div
    if nsteps % every == 0:
        rec = _diagnostics(disc, s, (s.rho - prev.rho) / dt, (s.u - prev.u) / dt, div_max)
        report.append(rec)
        for ob in observers:
            ob(s, rec)
    return s, report

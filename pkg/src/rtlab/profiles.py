"""Equilibrium density profiles and physical parameters.

A profile is a function of the vertical coordinate only, defined on
``[0, h]``.  Four families are supported: ``affine``, ``exponential``,
``tanh-step`` and ``tabulated`` (monotone cubic interpolation of CSV data).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import BadSpec, NonPositiveDensity

FAMILIES = ("affine", "exponential", "tanh-step", "tabulated")

# dense sample used for the positivity and RT checks
N_SAMPLE = 10_000

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DensityProfile:
    kind: str
    params: tuple
    height: float
    rho: Evaluator = field(repr=False, compare=False)
    drho: Evaluator = field(repr=False, compare=False)
    d2rho: Evaluator = field(repr=False, compare=False)
    # exact integral of rho from 0 to z, when available
    antideriv: Evaluator | None = field(default=None, repr=False, compare=False)
    exact_min: float | None = field(default=None, repr=False, compare=False)

    def sample(self, n: int = N_SAMPLE) -> np.ndarray:
        return np.linspace(0.0, self.height, n)

    def min_density(self) -> float:
        z = self.sample()
        m = float(np.min(self.rho(z)))
        if self.exact_min is not None:
            m = min(m, self.exact_min)
        return m

    def max_buoyancy_ratio(self) -> float:
        """max over [0, h] of rho'/rho, the pointwise bound on Lambda^2 / g."""
        z = self.sample()
        return float(np.max(self.drho(z) / self.rho(z)))


@dataclass(frozen=True)
class PhysicalParams:
    mu: float
    g: float
    lam: float = 0.0
    M3: float = 0.0

    def __post_init__(self):
        if not (self.mu > 0):
            raise BadSpec(f"viscosity must be positive, got {self.mu}")
        if not (self.g > 0):
            raise BadSpec(f"gravity must be positive, got {self.g}")
        if self.lam < 0:
            raise BadSpec(f"lambda must be nonnegative, got {self.lam}")
        if self.M3 != 0 and not (self.lam > 0):
            raise BadSpec("lambda must be positive when the background field is nonzero")

    @property
    def M_bar(self) -> tuple[float, float, float]:
        return (0.0, 0.0, float(self.M3))


def _const(c: float) -> Evaluator:
    return lambda z: np.full_like(np.asarray(z, dtype=float), c)


def _affine(params, h):
    if len(params) != 2:
        raise BadSpec("affine profile needs params [a, b] for rho = a + b*z")
    a, b = params
    return (
        lambda z: a + b * np.asarray(z, dtype=float),
        _const(b),
        _const(0.0),
        lambda z: a * np.asarray(z, dtype=float) + 0.5 * b * np.asarray(z, dtype=float) ** 2,
        min(a, a + b * h),
    )


def _exponential(params, h):
    if len(params) == 1:
        a, b = 1.0, params[0]
    elif len(params) == 2:
        a, b = params
    else:
        raise BadSpec("exponential profile needs params [b] or [a, b] for rho = a*exp(b*z)")

    def anti(z):
        z = np.asarray(z, dtype=float)
        if b == 0:
            return a * z
        return a * np.expm1(b * z) / b

    return (
        lambda z: a * np.exp(b * np.asarray(z, dtype=float)),
        lambda z: a * b * np.exp(b * np.asarray(z, dtype=float)),
        lambda z: a * b * b * np.exp(b * np.asarray(z, dtype=float)),
        anti,
        min(a, a * np.exp(b * h)),
    )


def _tanh_step(params, h):
    # rho = lo + (hi - lo)/2 * (1 + tanh((z - c)/w)); hi above c when hi > lo
    if len(params) != 4:
        raise BadSpec("tanh-step profile needs params [rho_below, rho_above, center, width]")
    lo, hi, c, w = params
    if not (w > 0):
        raise BadSpec("tanh-step width must be positive")
    jump = 0.5 * (hi - lo)

    def rho(z):
        return lo + jump * (1.0 + np.tanh((np.asarray(z, dtype=float) - c) / w))

    def drho(z):
        t = np.tanh((np.asarray(z, dtype=float) - c) / w)
        return jump * (1.0 - t * t) / w

    def d2rho(z):
        t = np.tanh((np.asarray(z, dtype=float) - c) / w)
        return -2.0 * jump * t * (1.0 - t * t) / (w * w)

    def anti(z):
        z = np.asarray(z, dtype=float)
        # integral of tanh((s - c)/w) = w*log(cosh((s - c)/w))
        lc = lambda x: np.logaddexp(x, -x) - np.log(2.0)
        return (lo + jump) * z + jump * w * (lc((z - c) / w) - lc(-c / w))

    return rho, drho, d2rho, anti, min(lo, hi)


def _tabulated(params, h):
    if len(params) != 2:
        raise BadSpec("tabulated profile needs params (z_values, rho_values)")
    z = np.asarray(params[0], dtype=float)
    r = np.asarray(params[1], dtype=float)
    if z.ndim != 1 or z.shape != r.shape or z.size < 2:
        raise BadSpec("tabulated data must be two equal-length 1D arrays")
    if np.any(np.diff(z) <= 0):
        raise BadSpec("tabulated heights must be strictly increasing")
    if not np.all(np.isfinite(r)):
        raise BadSpec("tabulated densities must be finite")
    if z[0] > 0 or z[-1] < h:
        raise BadSpec("tabulated data must cover [0, h]")
    if np.any(r <= 0):
        raise NonPositiveDensity("tabulated density has nonpositive entries")
    interp = PchipInterpolator(z, r, extrapolate=False)
    d1 = interp.derivative(1)
    d2 = interp.derivative(2)
    anti = interp.antiderivative()
    a0 = float(anti(0.0))
    # pchip preserves monotonicity, so the data minimum is the exact minimum
    return (
        lambda s: interp(np.asarray(s, dtype=float)),
        lambda s: d1(np.asarray(s, dtype=float)),
        lambda s: d2(np.asarray(s, dtype=float)),
        lambda s: anti(np.asarray(s, dtype=float)) - a0,
        float(np.min(r[(z >= 0) & (z <= h)])) if np.any((z >= 0) & (z <= h)) else None,
    )


_BUILDERS = {
    "affine": _affine,
    "exponential": _exponential,
    "tanh-step": _tanh_step,
    "tabulated": _tabulated,
}


def make_profile(family: str, params: Sequence, height: float = 1.0) -> DensityProfile:
    """Build and validate a density profile.

    Raises ``BadSpec`` for malformed input and ``NonPositiveDensity`` when the
    density is not bounded away from zero on ``[0, height]``.
    """
    if family not in _BUILDERS:
        raise BadSpec(f"unknown profile family {family!r}; expected one of {FAMILIES}")
    try:
        height = float(height)
    except (TypeError, ValueError) as exc:
        raise BadSpec(f"bad height {height!r}") from exc
    if not (height > 0) or not np.isfinite(height):
        raise BadSpec(f"height must be positive, got {height}")
    if family != "tabulated":
        try:
            params = tuple(float(p) for p in params)
        except (TypeError, ValueError) as exc:
            raise BadSpec(f"params must be real numbers, got {params!r}") from exc
        if not all(np.isfinite(params)):
            raise BadSpec("params must be finite")
    rho, drho, d2rho, anti, exact_min = _BUILDERS[family](params, height)
    key = params if family != "tabulated" else (tuple(params[0]), tuple(params[1]))
    prof = DensityProfile(family, key, height, rho, drho, d2rho, anti, exact_min)

    rmin = prof.min_density()
    if not (rmin > 0):
        raise NonPositiveDensity(f"density reaches {rmin:.6g} <= 0 on [0, {height}]")
    if family != "tabulated":
        _check_derivative(prof)
    return prof


def _check_derivative(p: DensityProfile, n: int = 2001) -> None:
    z = np.linspace(0.0, p.height, n)
    dz = z[1] - z[0]
    r = p.rho(z)
    fd = (r[2:] - r[:-2]) / (2 * dz)
    exact = p.drho(z[1:-1])
    # central-difference truncation error is dz^2 * |third derivative| / 6
    d3 = np.gradient(p.d2rho(z), dz)
    tol = 10.0 * dz**2 * float(np.max(np.abs(d3))) / 6.0 + 1e-9 * max(1.0, float(np.max(np.abs(exact))))
    if np.max(np.abs(fd - exact)) > tol:
        raise BadSpec("profile derivative evaluator is inconsistent with the density")


def load_tabulated_csv(path: str | Path, height: float | None = None) -> DensityProfile:
    """Read a two-column (z, rho) CSV file; a header row is allowed."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except (ValueError, IndexError):
                if rows:
                    raise BadSpec(f"malformed CSV row {rec!r}")
    if not rows:
        raise BadSpec(f"no data in {path}")
    data = np.array(rows)
    h = float(data[-1, 0]) if height is None else height
    return make_profile("tabulated", (data[:, 0], data[:, 1]), h)


def profile_from_config(section: dict, base_dir: str | Path | None = None) -> DensityProfile:
    """Build a profile from the ``profile`` section of a run config."""
    try:
        family = section["family"]
        height = section.get("height", 1.0)
    except (KeyError, AttributeError) as exc:
        raise BadSpec("profile section needs a 'family' key") from exc
    if family == "tabulated":
        if "csv" in section:
            path = Path(section["csv"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return load_tabulated_csv(path, height)
        params = section.get("params")
        if params is None or len(params) != 2:
            raise BadSpec("tabulated profile needs 'csv' or params [[z...], [rho...]]")
        return make_profile("tabulated", params, height)
    return make_profile(family, section.get("params", []), height)


def check_rt_condition(p: DensityProfile) -> dict:
    """Is rho' > 0 somewhere?  The witness is the sampled maximizer of rho'."""
    z = p.sample()
    d = p.drho(z)
    i = int(np.argmax(d))
    ok = bool(d[i] > 0)
    return {"satisfied": ok, "witness": float(z[i]) if ok else None, "max_drho": float(d[i])}


def equilibrium_pressure(p: DensityProfile, g: float) -> Callable[[np.ndarray], np.ndarray]:
    """Hydrostatic pressure with p(0) = 0, i.e. -g * int_0^z rho."""
    if p.antideriv is not None:
        anti = p.antideriv
        return lambda z: -g * anti(np.asarray(z, dtype=float))

    from scipy.integrate import quad

    def pbar(z):
        z = np.asarray(z, dtype=float)
        out = np.array([quad(p.rho, 0.0, zz, epsabs=1e-13, epsrel=1e-13)[0] for zz in z.ravel()])
        return -g * out.reshape(z.shape)

    return pbar

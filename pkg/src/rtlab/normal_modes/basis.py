"""Legendre-Galerkin basis with clamped ends (f = f' = 0 at both endpoints).

Uses Shen's combination ``L_n - 2(2n+5)/(2n+7) L_{n+2} + (2n+3)/(2n+7) L_{n+4}``
mapped to an interval ``[0, length]``.  Bilinear forms are assembled with
Gauss-Legendre quadrature.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
from numpy.polynomial import legendre as leg


def _shen_coefficients(n: int) -> np.ndarray:
    S = np.zeros((n + 4, n))
    for k in range(n):
        S[k, k] = 1.0
        S[k + 2, k] = -2.0 * (2 * k + 5) / (2 * k + 7)
        S[k + 4, k] = (2 * k + 3) / (2 * k + 7)
    return S


class ClampedBasis:
    """``n`` clamped Legendre modes on ``[0, length]``."""

    def __init__(self, n: int, length: float, extra_quad: int = 32):
        if n < 1:
            raise ValueError("need at least one basis function")
        self.n = int(n)
        self.length = float(length)
        self.coef = _shen_coefficients(self.n)
        xi, wq = leg.leggauss(self.n + 4 + extra_quad)
        self.x = 0.5 * (xi + 1.0) * self.length
        self.w = 0.5 * wq * self.length
        self._V = [self.eval(self.x, d) for d in range(3)]

    def eval(self, x, deriv: int = 0) -> np.ndarray:
        """Values of basis functions (columns) at points ``x`` (rows)."""
        xi = 2.0 * np.asarray(x, dtype=float) / self.length - 1.0
        c = leg.legder(self.coef, deriv, axis=0) if deriv else self.coef
        return leg.legvander(xi, c.shape[0] - 1) @ c * (2.0 / self.length) ** deriv

    def form(self, da: int, db: int, weight=None) -> np.ndarray:
        """Gram matrix ``int weight * B_i^(da) * B_j^(db)``."""
        w = self.w if weight is None else self.w * np.asarray(weight(self.x), dtype=float)
        A = self._V[da]
        B = self._V[db]
        out = (A * w[:, None]).T @ B
        if da == db:
            out = 0.5 * (out + out.T)
        return out

    @cached_property
    def W0(self):
        return self.form(0, 0)

    @cached_property
    def W1(self):
        return self.form(1, 1)

    @cached_property
    def W2(self):
        return self.form(2, 2)

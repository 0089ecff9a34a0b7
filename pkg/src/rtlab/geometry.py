from __future__ import annotations

from dataclasses import dataclass

from .errors import BadSpec

LAYER = "layer-periodic"
BOX = "box-clamped"


@dataclass(frozen=True)
class Geometry:
    """Spectral geometry for growth-rate computations.

    For ``layer-periodic`` the horizontal period is ``2*pi*length`` and the
    admissible wavenumbers are ``n/length``.  For ``box-clamped`` ``length``
    is the box width.  ``nz``/``nx`` are numbers of basis modes.
    """

    kind: str = LAYER
    length: float = 1.0
    height: float = 1.0
    nz: int = 128
    nx: int = 24

    def __post_init__(self):
        if self.kind not in (LAYER, BOX):
            raise BadSpec(f"unknown geometry kind {self.kind!r}")
        if not (self.length > 0 and self.height > 0):
            raise BadSpec("geometry lengths must be positive")
        if self.nz < 8 or (self.kind == BOX and self.nx < 8):
            raise BadSpec("resolutions must be at least 8")

    @property
    def period(self) -> float:
        return 2.0 * 3.141592653589793 * self.length

    def lattice(self, n_max: int) -> list[float]:
        return [n / self.length for n in range(1, n_max + 1)]

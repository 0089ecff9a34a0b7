from .basis import ClampedBasis
from .box import box_alpha, box_growth_rate, box_streamfunction
from .fields import EigenTriple, eigenfunction_fields, recover_pressure, spectral_streamfunction
from .layer import (
    ModeResult,
    MhdStabilityReport,
    alpha,
    critical_field,
    critical_ratio,
    max_over_wavenumbers,
    mhd_growth_rate,
    solve_growth_rate,
)

__all__ = [
    "ClampedBasis", "EigenTriple", "ModeResult", "MhdStabilityReport", "alpha", "box_alpha",
    "box_growth_rate", "box_streamfunction", "critical_field", "critical_ratio", "eigenfunction_fields",
    "max_over_wavenumbers", "mhd_growth_rate", "recover_pressure", "solve_growth_rate",
    "spectral_streamfunction",
]

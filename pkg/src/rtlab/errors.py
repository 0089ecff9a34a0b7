"""Exception hierarchy for rtlab."""


class RTLabError(Exception):
    """Base class for all rtlab errors."""


class BadSpec(RTLabError, ValueError):
    pass


class NonPositiveDensity(RTLabError, ValueError):
    pass


class SingularForms(RTLabError, ArithmeticError):
    """Mass form is not positive definite (a discretization bug)."""


class NoConvergence(RTLabError, RuntimeError):
    pass


class DegenerateMode(RTLabError, ArithmeticError):
    pass


class IncompatibleDivergence(RTLabError, ValueError):
    pass


class SolverFailure(RTLabError, RuntimeError):
    pass


class DensityUnderflow(RTLabError, ArithmeticError):
    def __init__(self, msg, time=None):
        super().__init__(msg)
        self.time = time


class NotContracting(RTLabError, RuntimeError):
    def __init__(self, msg, delta=None):
        super().__init__(msg)
        self.delta = delta


class CflViolation(RTLabError, ValueError):
    pass


class NeverEscapes(RTLabError, RuntimeError):
    pass


class RegimeViolation(RTLabError, RuntimeWarning):
    pass

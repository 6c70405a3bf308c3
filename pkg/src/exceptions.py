"""Error hierarchy shared by the services and the command line.

Input errors map to exit code 2, numerical diagnostics to exit code 3.
"""

from typing import Optional


class CarnotKitError(Exception):
    """Base class for every error raised by carnot-kit"""


class InputError(CarnotKitError):
    """Malformed or inconsistent input"""


class NotBracketGeneratingError(InputError):
    def __init__(self, stabilized_dim: int, dim: int):
        self.stabilized_dim = stabilized_dim
        self.dim = dim
        super().__init__(
            f"Generators do not Lie-generate the algebra: filtration stabilized at "
            f"dimension {stabilized_dim} < {dim}"
        )


class UnsupportedStepError(InputError):
    def __init__(self, step: int, max_order: int):
        self.step = step
        self.max_order = max_order
        super().__init__(f"Step {step} exceeds the supported BCH order {max_order}")


class GradingInconsistencyError(InputError):
    """Structure constant raising the grade; the adapted basis is broken"""


class UndefinedInvariantError(InputError):
    """Invariant undefined for the given region (e.g. zero projected volume)"""


class NumericalDiagnosticError(CarnotKitError):
    """A numerical procedure failed its own certificate"""


class OutOfChartRadiusError(NumericalDiagnosticError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Word factorization did not converge (residual {residual:.3e})")


class NoFeasiblePathError(NumericalDiagnosticError):
    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"No horizontal path reached the endpoint: best residual {residual:.3e} > {tolerance:.1e}"
        )


class NotSymplecticError(NumericalDiagnosticError):
    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(f"Loop residual {residual:.3e} exceeds {tolerance:.1e}; map is not symplectic")


class IntegrationError(NumericalDiagnosticError):
    def __init__(self, last_valid_time: float):
        self.last_valid_time = last_valid_time
        super().__init__(f"Flow integration blew up after t={last_valid_time:.6g}")


class NotLipschitzError(NumericalDiagnosticError):
    def __init__(self, exponent: float, quotient: Optional[float] = None):
        self.exponent = exponent
        self.quotient = quotient
        super().__init__(
            f"Difference quotients grow under refinement (scaling exponent {exponent:.3f})"
        )


class DegenerateFitError(NumericalDiagnosticError):
    """Too few usable points for a regression"""

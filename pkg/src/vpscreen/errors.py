"""Exception types raised across the package."""


class VPScreenError(Exception):
    """Base class for all package errors."""


class ParameterError(VPScreenError, ValueError):
    """A parameter lies outside its admissible domain."""


class QuadratureError(VPScreenError):
    """An integral did not converge or its tail bound is too large."""


class TableRangeError(VPScreenError):
    """A potential value fell below the tabulated range of g."""

    def __init__(self, value, r_min):
        super().__init__(
            f"argument {value:.6g} is below the g-table lower limit {r_min:.6g}; "
            "rebuild the table with a smaller r_min"
        )
        self.value = value
        self.r_min = r_min


class ConvergenceError(VPScreenError):
    """Fixed-point iteration failed to reach tolerance."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


class ConsistencyError(VPScreenError):
    """A computed identity failed beyond its tolerance."""

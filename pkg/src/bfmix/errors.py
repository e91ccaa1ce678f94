"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: validation/usage problems exit with 2,
capacity and convergence problems with 3, and failed verification suites
with 1.
"""


class BfmixError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(BfmixError, ValueError):
    """Bad input: out-of-range parameters, malformed files, schema violations."""


class CapacityError(BfmixError, RuntimeError):
    """A requested computation exceeds a configured hard cap."""


class ConvergenceError(BfmixError, RuntimeError):
    """An iterative solver failed to reach the requested tolerance.

    Carries the best available estimates so callers can inspect them.
    """

    def __init__(self, message: str, estimates=None):
        super().__init__(message)
        self.estimates = estimates


class ResonanceError(BfmixError, RuntimeError):
    """Zero-energy resonance: the scattering length is not defined."""


class DegeneracyError(BfmixError, RuntimeError):
    """A ground state is (numerically) degenerate where a unique one is needed."""

"""Exception hierarchy shared by all zeroscat modules."""

from __future__ import annotations


class ZeroScatError(Exception):
    """Base class for every error raised by the package."""


class DomainError(ZeroScatError, ValueError):
    """An argument lies outside the domain of the function."""


class DegenerateInputError(ZeroScatError, ValueError):
    """Inputs are formally valid but make the quantity undefined."""


class NotApplicableError(ZeroScatError, ValueError):
    """The operation does not apply to this configuration."""


class RegimeError(NotApplicableError):
    """The potential exponent lies outside the regime of a formula."""


class AmbiguityError(ZeroScatError):
    """A root search found more than one candidate.

    ``brackets`` holds every ``(lo, hi)`` interval containing a sign change.
    """

    def __init__(self, message: str, brackets):
        super().__init__(message)
        self.brackets = list(brackets)


class ConvergenceError(ZeroScatError, RuntimeError):
    """A numerical procedure failed to converge.

    ``diagnostics`` is a free-form dict (ladder values, error estimates, ...).
    """

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NearCollisionError(ConvergenceError):
    """An orbit fell into the interior region or the step size underflowed."""

    def __init__(self, message: str, closest_approach: float):
        super().__init__(message, {"closest_approach": closest_approach})
        self.closest_approach = closest_approach


class OutOfConeError(ZeroScatError, ValueError):
    """No outgoing orbit reaches the requested polar angle."""


class NoPeakError(ZeroScatError):
    """A kernel has no dominant singular peak."""

    def __init__(self, message: str, sharpness: float):
        super().__init__(message)
        self.sharpness = sharpness


class ConfigError(ZeroScatError, ValueError):
    """Configuration text failed validation.

    ``diagnostics`` is a list of ``(line, column, message)`` tuples.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = [f"line {ln}, col {col}: {msg}" for ln, col, msg in self.diagnostics]
        super().__init__("; ".join(lines) if lines else "invalid configuration")

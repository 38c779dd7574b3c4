"""Exception types.

The command line maps these onto exit codes: parse and usage problems
exit with 2, numerical failures with 3, and a clean negative verdict
(a certificate that honestly fails) with 1.
"""

from __future__ import annotations


class CharfolError(Exception):
    """Base class for library errors."""


class SceneParseError(CharfolError):
    """Scene or expression text rejected. Carries 1-based line and column."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            loc = f"line {line}" + (f", col {col}" if col is not None else "")
            message = f"{loc}: {message}"
        super().__init__(message)


class ChartMismatchError(CharfolError):
    """Objects built over different charts were combined."""


class DegenerateVolumeError(CharfolError):
    """A frame or top form fell below the volume floor; the point is not regular."""


class ContactConditionError(CharfolError):
    """The defining non-degeneracy of the one-form failed where it was required."""


class ProjectionError(CharfolError):
    """Newton projection back onto the hypersurface did not converge."""


class IntegrationError(CharfolError):
    """The integrator gave up. Carries the last accepted time and state."""

    def __init__(self, message: str, t: float | None = None, state=None):
        self.t = t
        self.state = state
        super().__init__(message)


class EscapeError(IntegrationError):
    """A trajectory left the declared chart domain."""


class PolarDomainError(CharfolError):
    """A polar-chart evaluation was requested too close to a coordinate axis."""


class NoOrbitError(CharfolError):
    """Periodic orbit refinement failed from the given seed."""


class ConstructiveFailure(CharfolError):
    """A constructive routine could not produce an object meeting its contract."""

"""Error and warning types for the htype-lab numerical core.

Every failure carries the exit code the command-line driver reports for it:
2 for invalid input or configuration, 3 for numerical-resolution problems and
4 for failed acceptance checks.
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOLUTION = 3
EXIT_ACCEPTANCE = 4


class HTypeLabError(Exception):
    """Base class for all domain errors."""

    exit_code = 1


class InputError(HTypeLabError, ValueError):
    """Invalid arguments, grids or configuration."""

    exit_code = EXIT_CONFIG


class NumericalResolutionError(HTypeLabError):
    """The discretisation cannot represent the requested computation."""

    exit_code = EXIT_RESOLUTION


# group_core
class DimensionConstraint(InputError):
    pass


class NoCliffordModule(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class NonpositiveScale(InputError):
    pass


class InvariantViolation(HTypeLabError):
    pass


class GridTooCoarse(NumericalResolutionError):
    pass


# laguerre_spherical
class NegativeArgument(InputError):
    pass


class ResolutionInsufficient(NumericalResolutionError):
    pass


class CutoffTooLarge(NumericalResolutionError):
    pass


class GridMismatch(InputError):
    pass


# spectral_calculus
class NonFiniteMultiplier(InputError):
    pass


class NegativeTime(InputError):
    pass


class BandOutOfRange(NumericalResolutionError):
    pass


class IncompatibleGrids(InputError):
    pass


# dispersive_lab
class AliasingWindowExceeded(NumericalResolutionError):
    pass


class ZeroTime(InputError):
    pass


class ZeroDenominator(InputError):
    pass


class SupportViolation(InputError):
    pass


# strichartz_lab
class OutOfRange(InputError):
    pass


class BothInfinite(InputError):
    pass


class InvalidAlpha(InputError):
    pass


class NoPair(InputError):
    pass


class ZeroData(InputError):
    pass


class NotAdmissible(InputError):
    pass


# nls_solver
class TimeOutOfRange(InputError):
    pass


class DivergenceDetected(NumericalResolutionError):
    pass


class ExponentRelationViolated(InputError):
    pass


# cli
class ConfigInvalid(InputError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class AcceptanceCheckFailed(HTypeLabError):
    exit_code = EXIT_ACCEPTANCE


class BandTruncationWarning(UserWarning):
    """Mass of a norm computation lies outside the representable dyadic bands."""


class AliasingWarning(UserWarning):
    """A non-polynomial nonlinearity was evaluated on a grid that cannot dealias it."""

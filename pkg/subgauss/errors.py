"""Exception hierarchy of the lab.

Every failure a user can see derives from ``LabError``; the CLI maps
``ConfigError`` subclasses to exit code 2 and all other lab errors to 1.
"""


class LabError(Exception):
    """Base class of every lab error."""


class ConfigError(LabError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


# distributions
class RejectsNonStandardized(LabError):
    pass


class RejectsInadmissibleC(LabError):
    def __init__(self, c, c_min, c_max):
        self.c, self.c_min, self.c_max = c, c_min, c_max
        super().__init__(
            f"c = {c!r} is inadmissible: the Gaussian-relative density goes negative "
            f"outside c_min = {c_min!r} <= c <= c_max = {c_max!r}"
        )


class GridDensityError(LabError):
    pass


class QuadratureOverflow(LabError):
    pass


class SeriesDivergence(LabError):
    pass


# tilt
class NonfiniteLaplace(LabError):
    pass


class OverflowAtTilt(LabError):
    pass


class OutOfRange(LabError):
    pass


class ZoneViolation(LabError):
    pass


# convolution
class LiftOverflow(LabError):
    pass


class GridTooCoarse(LabError):
    pass


class PhaseUnwrapFailure(LabError):
    """Internal: the cf crossed zero on the t-grid. Always caught by the caller."""


class MethodUnavailable(LabError):
    pass


# divergence
class DivergentIntegral(LabError):
    pass


class UncertifiedTail(LabError):
    pass


# diagnostics
class RangeTooSmall(LabError):
    pass


class AllZeroUpToJ(LabError):
    pass


class SeparationNotEstablished(LabError):
    pass


# local limit
class IllConditionedFit(LabError):
    pass

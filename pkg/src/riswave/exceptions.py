"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`RisWaveError`
so the CLI can map it to an exit code.
"""


class RisWaveError(Exception):
    """Base class for package errors."""

    exit_code = 2


class InvalidArgumentError(RisWaveError, ValueError):
    """An argument violates its documented precondition."""


class ConfigurationError(RisWaveError, ValueError):
    """A scenario or simulation setup is inconsistent (window too small, obstacle outside z range, ...)."""


class ScenarioFileError(ConfigurationError):
    """A scenario file failed schema validation.

    Carries the offending field path and, when known, the 1-based line number.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class MeasurementOutOfWindowError(RisWaveError):
    """A half-maximum crossing (or similar feature) lies outside the sampled window."""

    exit_code = 3


class InfeasibleTargetError(RisWaveError):
    """A requested focal size or resolution cannot be reached with the available aperture."""

    exit_code = 3


class ResolutionLimitError(InfeasibleTargetError):
    """A localization level needs a footprint larger than the RIS allows."""

    def __init__(self, message, max_level=None):
        self.max_level = max_level
        super().__init__(message)


class SearchFailureError(RisWaveError):
    """Hierarchical search could not place the UE inside the field of view."""

    exit_code = 3

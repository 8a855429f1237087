"""Exception and warning types shared across the package."""


class DplangError(Exception):
    """Base class for all package errors."""


class EnumerationExhausted(DplangError):
    """A predicate language hit its enumeration cap before finding enough members."""


class ScanLimitInconclusive(DplangError):
    """A witness scan reached its limit without settling every language.

    Attributes:
        partial: Largest witness found among the languages that were settled
            (1 when none were).
        unresolved: Zero-based positions of the languages left unsettled.
    """

    def __init__(self, partial, unresolved):
        self.partial = int(partial)
        self.unresolved = tuple(unresolved)
        super().__init__(
            f"witness scan inconclusive for languages {list(self.unresolved)}; "
            f"partial witness index {self.partial}"
        )


class EmptyCandidates(DplangError):
    """Selection was requested over an empty candidate set."""


class InvalidDelta(DplangError, ValueError):
    """A delta outside the open interval (0, 1) was supplied."""


class NotContained(DplangError):
    """A reference language has a member outside the distribution support."""


class ConfigError(DplangError, ValueError):
    """An experiment configuration field is invalid.

    Attributes:
        field: Name of the offending field.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class InstanceError(DplangError, KeyError):
    """An instance or distribution name could not be resolved."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown instance"


class CalibrationWarning(UserWarning):
    """Gaussian calibration used outside the epsilon range of the classical proof."""

"""Exception hierarchy.

The CLI maps ``ConfigError`` to exit code 2 and ``DataError`` to exit code 3.
"""


class DietSynthError(Exception):
    pass


class ConfigError(DietSynthError, ValueError):
    """Invalid profile, manifest, mapping or ranges document."""


class DataError(DietSynthError, ValueError):
    """Input data that cannot be processed (unknown item, empty input...)."""


class GenerationError(DataError):
    """Raised when a subject-week cannot be synthesised."""


class CapacityError(GenerationError):
    """Sampled counts do not fit the meal slots of a day."""

    def __init__(self, message, day=None):
        super().__init__(message)
        self.day = day

"""Exception hierarchy shared by all modules."""


class TwaError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(TwaError):
    pass


class DuplicateDriver(TwaError):
    pass


class UndrivenNet(TwaError):
    pass


class CombinationalLoop(TwaError):
    pass


class UnknownNet(TwaError):
    pass


class MissingDelay(TwaError):
    pass


class NoMatchingPath(TwaError):
    pass


class WidthMismatch(TwaError):
    pass


class InvalidFraction(TwaError):
    pass


class TraceTooShort(TwaError):
    pass


class DomainError(TwaError):
    pass


class MissingBeta(TwaError):
    pass


class Unreachable(TwaError):
    """Exhaustive search proved that no qualifying trace exists."""


class Timeout(TwaError):
    """A bounded search ran out of budget without a hit."""


class LengthMismatch(TwaError):
    pass


class FieldMapMismatch(TwaError):
    pass


class PipelineError(TwaError):
    """Wraps a module error with the pipeline stage that raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class IoError(TwaError):
    """Writing an output artifact failed."""

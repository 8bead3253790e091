"""Exception hierarchy shared by all conslaw modules."""


class ConslawError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ConslawError, ValueError):
    pass


class OrderUnsupported(ConslawError):
    pass


class FitDegenerate(ConslawError):
    pass


class TooLarge(ConslawError, ValueError):
    pass


class SeriesOverflow(ConslawError, OverflowError):
    pass


class Inconclusive(ConslawError):
    pass


class NonMonotone(ConslawError):
    pass


class OutOfRange(ConslawError, ValueError):
    pass


class ShockReached(ConslawError):
    pass


class StepTooSmall(ConslawError):
    pass


class EmptyOverlap(ConslawError, ValueError):
    pass


class NoAdmissibleDelta(ConslawError):
    pass


class ParseError(ConslawError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ValidationError(ConslawError):
    """Carries every problem found in a config, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))

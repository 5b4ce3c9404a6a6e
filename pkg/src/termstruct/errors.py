"""Exception hierarchy shared by all stages."""


class TermStructError(Exception):
    """Base class for every error raised by this package."""


class ParseError(TermStructError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicateRecordError(ParseError):
    pass


class AlignmentError(TermStructError):
    pass


class InsufficientDataError(TermStructError):
    pass


class DegenerateDistributionError(TermStructError):
    pass


class DomainError(TermStructError):
    pass


class InsufficientTailError(InsufficientDataError):
    pass


class DegenerateSampleError(DegenerateDistributionError):
    pass


class BootstrapFailureError(TermStructError):
    pass


class ConfigError(TermStructError):
    pass


class DependencyError(TermStructError):
    """A stage was run before the stages it reads from."""

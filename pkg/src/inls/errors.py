"""Exception hierarchy shared by all modules.

Each class carries the CLI exit status it maps to.
"""


class InlsError(Exception):
    exit_code = 1


class ParameterError(InlsError, ValueError):
    """Out-of-range model parameter or exponent; ``bound`` names the violated restriction."""

    exit_code = 3

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class ConfigError(InlsError, ValueError):
    exit_code = 3


class GridError(InlsError, ValueError):
    exit_code = 3


class NumericalBreakdown(InlsError, RuntimeError):
    """NaN/Inf appeared in the evolved state."""

    exit_code = 4

    def __init__(self, message, last_valid_record=None):
        super().__init__(message)
        self.last_valid_record = last_valid_record


class AnalysisError(InlsError, RuntimeError):
    """A post-processing precondition failed (too few records, bad tail, ...)."""

    exit_code = 5


class DescentFailure(AnalysisError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])

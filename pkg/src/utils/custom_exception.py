# base exception for every pipeline failure; exit_code is what the CLI returns
class HawkesCallsError(Exception):
    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code
        self.error = type(self).__name__


class IngestError(HawkesCallsError):
    """Raised when raw logs or survey files cannot be turned into records."""


class SchemaError(IngestError):
    """A required column is missing or the file has no header."""


class RowError(IngestError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class KernelDomainError(HawkesCallsError, ValueError):
    """Kernel evaluated outside its domain (negative lag, reversed interval)."""


class LikelihoodError(HawkesCallsError, ValueError):
    pass


class SimulationError(HawkesCallsError):
    pass


class FitError(HawkesCallsError):
    pass


class InsufficientEventsError(HawkesCallsError, ValueError):
    def __init__(self, window: str, required: int, found: int):
        super().__init__(
            f"window '{window}' needs at least {required} event(s), found {found}"
        )
        self.window = window
        self.required = required
        self.found = found


class FeatureError(HawkesCallsError, ValueError):
    pass


class FeatureExportError(HawkesCallsError):
    pass


class LearningError(HawkesCallsError, ValueError):
    pass

class UsageError(HawkesCallsError):
    """Flags that parse but do not make a valid command."""

    def __init__(self, message: str):
        super().__init__(message, exit_code=2)

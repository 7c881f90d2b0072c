class VTRError(Exception):
    """Base class for all errors raised by semvtr."""


class DegeneratePair(VTRError):
    pass


class FrameMismatch(VTRError):
    pass


class SchemaError(VTRError, ValueError):
    """Malformed map/world/config input. ``path`` names the offending field."""

    def __init__(self, path, message=None):
        self.path = path
        super().__init__(path if message is None else f"{path}: {message}")


class InsufficientLandmarks(VTRError):
    pass


class NoValidPair(VTRError):
    pass


class EmptyPath(VTRError):
    pass


class UnknownLabel(VTRError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class BootstrapFailed(VTRError):
    pass


class StepBudgetExceeded(VTRError):
    """Raised when a repeat run exhausts its step budget; carries the partial trace."""

    def __init__(self, trace):
        self.trace = trace
        super().__init__(f"step budget exhausted after {len(trace.rows)} trace rows")

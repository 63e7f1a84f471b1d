"""Exception hierarchy shared by all modules."""


class PadicCnnError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(PadicCnnError):
    """Invalid argument or mismatched tree parameters."""


class ValidationError(PadicCnnError):
    """A constructed object violates one of its invariants."""


class AccuracyError(PadicCnnError):
    """A series or quadrature could not reach the requested tolerance."""

    def __init__(self, message, tail_estimate=None):
        super().__init__(message)
        self.tail_estimate = tail_estimate


class DivergenceError(PadicCnnError):
    """A trajectory produced a non-finite state entry."""

    def __init__(self, message, blow_up_time=None):
        super().__init__(message)
        self.blow_up_time = blow_up_time


class EnumerationLimitError(PadicCnnError):
    """Stationary-state enumeration would exceed the hard cap."""

    def __init__(self, message, free_cells=None, state_count=None):
        super().__init__(message)
        self.free_cells = free_cells
        self.state_count = state_count


class ConfigError(PadicCnnError):
    """Malformed run configuration, preset name, or kernel spec."""

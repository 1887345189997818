"""Shared exception types."""


class ConfigurationError(ValueError):
    """Inconsistent shapes, dims, or parameter values."""


class UnsupportedParameterError(ConfigurationError):
    """Parameter value outside the supported family."""


class ProtocolError(RuntimeError):
    """An operation was called in a state its contract forbids."""


class GenerationError(RuntimeError):
    """Dataset generation exhausted its attempt budget."""


class SegmentOverrunError(RuntimeError):
    """A sampled training segment does not fit inside the episode."""


class TrainingError(RuntimeError):
    """Training diverged; carries a diagnostic payload."""


class AnalysisError(ValueError):
    """A trace or results table cannot be analyzed as requested."""

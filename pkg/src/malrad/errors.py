"""Exception hierarchy shared across the package."""


class MalradError(Exception):
    """Base class for all package errors."""


class ConfigError(MalradError):
    """Invalid configuration value or inconsistent hyperparameters."""


class ShapeError(MalradError):
    """Tensor shape incompatible with the operation; message names the
    offending component and dimension."""


class AudioError(MalradError):
    """Unreadable, malformed, or too-short audio data."""


class ManifestError(MalradError):
    """Malformed manifest row or record invariant violation."""


class StateError(MalradError):
    """backward() called without a matching saved forward state."""


class CheckpointError(MalradError):
    """Checkpoint version mismatch, corruption, or missing tensors."""


class DivergenceError(MalradError):
    """Training aborted on non-finite loss; message carries epoch/batch."""

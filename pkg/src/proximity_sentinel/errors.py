"""Exception hierarchy shared across the package.

``SentinelError`` is the root of all domain errors so the CLI can map
them to exit codes without enumerating every subclass. ``UsageError``
is reserved for configuration/argument problems (exit code 2); every
other ``SentinelError`` is a runtime/data failure (exit code 1).
"""


class SentinelError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(SentinelError):
    """Invalid configuration or command-line usage (CLI exit code 2)."""


class GeometryError(SentinelError):
    """Invalid geometric input."""


class InvalidBoxError(GeometryError):
    """Bounding box violates its invariants (x2 > x1, y2 > y1, finite)."""


class DimensionMismatchError(GeometryError):
    """Points of different dimension passed to a metric."""


class CalibrationError(GeometryError):
    """Non-positive or missing calibration quantities."""


class DecodeError(SentinelError):
    """An image file could not be decoded; message names the file."""


class StreamParseError(SentinelError):
    """A detection-stream line could not be parsed; message carries the line number."""


class StreamOrderError(SentinelError):
    """Frame indices in a stream are not strictly increasing."""


class EmptyCropError(SentinelError):
    """Requested crop lies fully outside the frame."""


class ClassifierError(SentinelError):
    """Invalid classifier input or malformed classification scores."""


class BackendError(ClassifierError):
    """Classifier backend failed to load or run."""


class BehindCameraError(GeometryError):
    """Agent has non-positive depth and cannot be projected."""


class AlignmentError(SentinelError):
    """Prediction and ground-truth streams do not cover the same frames/persons."""


class UndefinedRateError(SentinelError):
    """Too few samples (or zero elapsed time) to compute a frame rate."""

"""Shared exception types."""


class LumafuseError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(LumafuseError, ValueError):
    """Malformed on-disk data (PPM, weight file, embedding file).

    ``offset`` is the byte position at which parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class ParameterError(LumafuseError, ValueError):
    """A hyperparameter is outside its declared range."""


class ShapeError(LumafuseError, ValueError):
    """Array dimensions are inconsistent or unsupported."""

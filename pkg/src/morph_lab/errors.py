"""Custom exceptions for the Morph physical-layer lab."""

from __future__ import annotations


class MorphLabError(RuntimeError):
    """Base class for every error raised by morph_lab."""


class ParameterError(MorphLabError, ValueError):
    """An argument is outside its documented range."""


class ShapeError(MorphLabError, ValueError):
    """A buffer or tensor has the wrong length or shape."""


class TruncationError(ShapeError):
    """A stream ends before the declared payload does."""


class DatasetError(MorphLabError):
    """A dataset cannot be used for the requested operation."""


class ConfigurationError(MorphLabError):
    """Unknown scheme/decoder id or an inconsistent run configuration."""


class NoCrossingError(MorphLabError):
    """An SER curve does not cross the target SER inside its grid."""


class DatasetIOError(MorphLabError):
    """Reading or writing a dataset/checkpoint/report file failed."""

    def __init__(self, path: object, reason: object) -> None:
        super().__init__(f"{path}: {reason}")
        self.path = path

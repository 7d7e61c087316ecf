"""Exception types shared across the package."""


class InvalidEntityError(ValueError):
    """An entity mask is empty or otherwise unusable."""


class SceneSpecError(ValueError):
    """A synthetic scene description is inconsistent or out of bounds."""


class AnnotationError(ValueError):
    """An annotation document or RLE string failed to parse."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class CorpusFormatError(ValueError):
    """A corpus file is malformed or truncated."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedVersionError(CorpusFormatError):
    """A stored file declares a format version this build cannot read."""


class DegenerateBatchError(ValueError):
    """A training batch carries an all-zero loss mask in strict mode."""


class CheckpointLoadError(ValueError):
    """A checkpoint file is missing, incompatible, or corrupt."""

"""Exception types shared across the toolkit.

Every error the library raises deliberately derives from TaalgenError, so
callers (and the CLI exit-code mapping) can tell intentional, typed failures
apart from genuine bugs.
"""


class TaalgenError(Exception):
    """Base class for all errors raised on purpose by this package."""


class DimensionError(TaalgenError):
    """Operand shapes are incompatible with the requested operation."""


class ParameterError(TaalgenError):
    """An operation parameter is outside its allowed range."""


class ContractError(TaalgenError):
    """A call precondition was violated (empty input, non-scalar loss, ...)."""


class NumericError(TaalgenError):
    """Numeric domain violation: NaN/Inf where finite values are required,
    log of a non-positive quantity, invalid probability vectors, ..."""


class IndexRangeError(TaalgenError):
    """An integer index (e.g. an embedding id) is out of range."""


class OracleError(TaalgenError):
    """The gradient-check oracle detected it cannot trust its own result."""


class DataError(TaalgenError):
    """A dataset or corpus does not satisfy the requirements of a pipeline step."""


class VocabularyError(TaalgenError):
    """Unknown token or out-of-range id during encode/decode."""


class SpecError(TaalgenError):
    """A model spec names an unknown architecture or is internally inconsistent."""


class ParseError(TaalgenError):
    """A binary file (WAV, SMF, cache, checkpoint) is malformed.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CheckpointError(ParseError):
    """Checkpoint file is malformed, truncated, or of the wrong version."""

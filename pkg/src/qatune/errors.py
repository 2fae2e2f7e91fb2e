"""Exception types shared across the package."""


class QatuneError(Exception):
    """Base class for all package errors."""


class DimensionError(QatuneError, ValueError):
    """A state or vector length does not match the Hamiltonian."""


class DegenerateInputError(QatuneError, ValueError):
    """The input has no nonzero weight to work with."""


class GraphValidationError(QatuneError, ValueError):
    """A hardware-graph element lies outside the declared Chimera graph."""


class InfeasibleError(QatuneError):
    """A required hardware region is unavailable."""


class EmbeddingMismatchError(QatuneError, ValueError):
    """A logical edge has no hardware coupler between its chains."""


class ConfigError(QatuneError, ValueError):
    """An annealer, pipeline or experiment configuration is invalid."""


class GenerationFailure(QatuneError):
    """An instance generator ran out of its random-walk budget."""


class OverLimitError(QatuneError, ValueError):
    """Problem too large for exhaustive enumeration."""


class NoGapError(QatuneError, ValueError):
    """Every state has the same energy."""


class ParseError(QatuneError, ValueError):
    """A text file could not be parsed.

    Attributes:
        lineno: 1-based line number of the offending line, if known.
    """

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)

"""Exception hierarchy shared by every subsystem."""


class PvpError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(PvpError, ValueError):
    """A caller-supplied parameter violates its documented range."""


class ShapeError(PvpError, ValueError):
    """Operands have incompatible shapes or extents."""


class ContractError(PvpError, ValueError):
    """An internal contract was violated (non-scalar loss, empty label set, ...)."""


class InputError(PvpError, ValueError):
    """Malformed input data: bad token sequences, unreadable user files, ..."""


class FormatError(PvpError):
    """A binary file does not conform to its format; the message names the byte offset."""


class DigestMismatchError(PvpError):
    """A checkpoint was produced against different encoder weights or config."""


class TransportError(PvpError):
    """Retryable transport failure while talking to an LLM endpoint."""


class DictionaryError(PvpError, ValueError):
    """A synonym dictionary failed validation."""

"""Exception hierarchy shared by all modules."""


class NNBisimError(Exception):
    """Base class for every error raised by this package."""


class ContractError(NNBisimError, ValueError):
    """An argument violates an operation's stated contract (shape, layer, sign)."""


class PreconditionError(NNBisimError):
    """A semantic precondition failed, e.g. quotienting by a non-bisimulation.

    ``report`` carries the diagnostic (a ``BisimReport`` or ``DeltaReport``)
    when one is available.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DocumentError(NNBisimError, ValueError):
    """A serialized document could not be parsed."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(NNBisimError, ValueError):
    """Parsed data is structurally inconsistent; ``layer`` names the culprit if known."""

    def __init__(self, message, layer=None):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.layer = layer

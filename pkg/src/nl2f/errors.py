class Nl2fError(Exception):
    """Base class for all domain errors raised by this package."""


class CorpusFormatError(Nl2fError):
    """A corpus/task file violated the record format or a table invariant."""


class FormulaSyntaxError(Nl2fError):
    """Formula text failed to parse.

    The byte offset of the failure is available as `offset`.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownColumnError(Nl2fError):
    """A formula referenced a column header absent from its table."""


class GatewayError(Nl2fError):
    """Chat endpoint failure (transport, configuration, or scripting)."""


class TransportError(GatewayError):
    """All retry attempts against a live endpoint were exhausted."""

    def __init__(self, message, attempts):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class ValidatorError(Nl2fError):
    """A validator could not produce a verdict (distinct from rejection)."""


class RunnerError(Nl2fError):
    """The external program runner broke the wire protocol."""

from typing import Any


class CatQueueError(Exception):
    """Base error; `detail` is the human message, `context` goes into the JSON error report."""
    exit_code = 1

    def __init__(self, detail: str, **context: Any):
        super().__init__(detail)
        self.detail = detail
        self.context = context


class ConfigError(CatQueueError):
    exit_code = 2


class PreconditionError(CatQueueError, ValueError):
    exit_code = 3


class EnvelopeError(PreconditionError):
    pass


class CertificationError(PreconditionError):
    pass


class NumericalError(CatQueueError, ArithmeticError):
    exit_code = 4


class WitnessError(NumericalError):
    pass

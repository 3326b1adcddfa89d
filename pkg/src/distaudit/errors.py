"""Exception hierarchy shared by all modules."""


class DistAuditError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(DistAuditError, ValueError):
    pass


class InvalidKeyError(InvalidParameterError):
    pass


class InvalidInputError(InvalidParameterError):
    pass


class ReconciliationBoundExceeded(DistAuditError):
    """The symmetric difference is larger than the agreed bound m_bar."""


class NotSplittableError(DistAuditError):
    pass


class MalformedMultisetError(DistAuditError):
    pass


class HashCollisionError(DistAuditError):
    pass


class TooManyCyclesError(DistAuditError):
    pass


class AmbiguousIndexError(DistAuditError):
    pass


class InvalidChallengeError(DistAuditError, IndexError):
    pass


class LifecycleError(DistAuditError, RuntimeError):
    pass


class ProtocolError(DistAuditError):
    pass


class SingularFitError(DistAuditError, ArithmeticError):
    pass


class ConfigError(DistAuditError):
    """Invalid experiment configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)

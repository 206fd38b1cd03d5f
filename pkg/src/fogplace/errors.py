"""Exception hierarchy shared by every fogplace module."""


class FogplaceError(Exception):
    """Base class for all errors raised by fogplace."""


class DomainError(FogplaceError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class MalformedTree(FogplaceError, ValueError):
    pass


class UnknownVnf(FogplaceError, KeyError):
    pass


class InfeasibleShape(FogplaceError, ValueError):
    pass


class QuadratureError(FogplaceError, ArithmeticError):
    pass


class SchemaError(FogplaceError, ValueError):
    """A scenario/workload/config document failed validation.

    ``path`` is the dotted location of the offending field (``nodes.3.capacity``).
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class UnassignedVnf(FogplaceError, KeyError):
    pass


class NoMoveAvailable(FogplaceError):
    pass


class TooLarge(FogplaceError):
    pass


class IoError(FogplaceError, OSError):
    pass

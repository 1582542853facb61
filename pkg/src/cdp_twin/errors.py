"""Exception hierarchy. The CLI maps each family to a stable exit code."""


class CdpTwinError(Exception):
    exit_code = 1


class ParameterError(CdpTwinError, ValueError):
    """Invalid argument or configuration value."""

    exit_code = 2


class OutOfDomainError(ParameterError):
    """Coordinate or index outside the valid domain (e.g. template border)."""


class UsageError(CdpTwinError):
    """Operation called on the wrong kind of object, e.g. a direction mismatch."""

    exit_code = 2


class FormatError(CdpTwinError):
    """Malformed or truncated file. ``offset`` is the byte position of the fault."""

    exit_code = 3

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NumericalError(CdpTwinError, ArithmeticError):
    exit_code = 4

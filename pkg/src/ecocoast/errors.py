"""Exception hierarchy shared by every module."""


class EcoCoastError(Exception):
    """Base class for all package errors."""


class ZeroSpeed(EcoCoastError, ValueError):
    """The distance-domain model was evaluated at a non-positive speed."""


class StalledVehicle(EcoCoastError):
    """A control drove the vehicle below the minimum admissible speed.

    ``step`` is the index of the failing step when known.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InsufficientKineticEnergy(EcoCoastError):
    """The vehicle cannot supply the cranking energy for an engine restart."""


class ParseError(EcoCoastError, ValueError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(EcoCoastError, ValueError):
    pass


class IoError(EcoCoastError, OSError):
    pass


class Infeasible(EcoCoastError):
    """No admissible control sequence exists for the requested problem."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step

"""Exception hierarchy shared by every module."""


class ArithDynError(Exception):
    """Base class for all library errors."""


class AllZeroError(ArithDynError, ValueError):
    pass


class EmptySampleError(ArithDynError, ValueError):
    pass


class DimensionMismatch(ArithDynError, ValueError):
    pass


class NotRealizableError(ArithDynError, ValueError):
    pass


class NegativeEError(ArithDynError, ValueError):
    pass


class DomainMismatch(ArithDynError, TypeError):
    pass


class CompositionOverflow(ArithDynError):
    pass


class Unavailable(ArithDynError):
    """No certified Neron-Severi action (or delta) exists for the map."""


class OffCurve(ArithDynError, ValueError):
    pass


class DegenerateKernel(ArithDynError, ValueError):
    pass


class TooShort(ArithDynError, ValueError):
    pass


class NonGrowing(ArithDynError, ValueError):
    pass


class DeltaNotExpanding(ArithDynError, ValueError):
    pass


class NoDefectBound(ArithDynError):
    pass


class InsufficientPoints(ArithDynError, ValueError):
    pass


class NoQualifyingPoints(ArithDynError):
    pass


class BudgetExhausted(ArithDynError):
    pass


class PreconditionError(ArithDynError, ValueError):
    pass


class ConfigError(ArithDynError, ValueError):
    """Invalid experiment or map description.

    ``field`` is a dotted path into the offending document (``maps[1].map.A``)
    and ``line`` is set for JSON syntax errors.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(field)
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)

"""
Exceptions raised by the solver library.

Each exception subclasses the closest builtin so callers that only know about
``ValueError``/``KeyError``/``RuntimeError`` keep working.
"""


class NotSymmetricError(ValueError):
    pass


class NotPositiveDefiniteError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


class InvalidDomainError(ValueError):
    pass


class InvalidBoundarySpecError(ValueError):
    pass


class UnsupportedOrderError(ValueError):
    pass


class DegreeMismatchError(ValueError):
    pass


class MissingBoundaryDataError(ValueError):
    pass


class TimeNotOnSlabBoundaryError(ValueError):
    pass


class NonMonotoneHError(ValueError):
    pass


class UnknownEntityError(KeyError):
    pass


class UnknownCaseError(KeyError):
    pass


class IndexOutOfRangeError(IndexError):
    pass


class SingularBlockError(RuntimeError):
    def __init__(self, slab: int, message: str):
        self.slab = slab
        super().__init__(f"Slab {slab}: {message}")


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class PropertyFailure(AssertionError):
    def __init__(self, name: str, detail: str):
        self.name = name
        self.detail = detail
        super().__init__(f"{name}: {detail}")

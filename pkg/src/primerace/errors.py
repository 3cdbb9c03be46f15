"""Exception hierarchy shared by every module."""


class RaceError(Exception):
    """Base class for all library errors."""


class InvalidModulus(RaceError, ValueError):
    pass


class InvalidClass(RaceError, ValueError):
    pass


class InvalidPair(RaceError, ValueError):
    pass


class MustBePrimitive(RaceError, ValueError):
    pass


class UnsupportedConductor(RaceError, ValueError):
    pass


class PrecisionFailure(RaceError, ArithmeticError):
    pass


class IncompleteZeroData(RaceError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"no zero data for characters {self.missing}")


class ZeroFileError(RaceError):
    """Problem with an on-disk zero file."""


class ZeroParseError(ZeroFileError):
    def __init__(self, path, line, msg):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


class ZeroValidationError(ZeroFileError):
    def __init__(self, path, line, msg):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


class SingularMatrix(RaceError, ArithmeticError):
    pass


class InvalidCovariance(RaceError, ValueError):
    pass


class InvalidScale(RaceError, ValueError):
    pass


class QTooSmall(RaceError, ValueError):
    pass


class InvalidComparison(RaceError, ValueError):
    pass


class MemoryBudgetExceeded(RaceError, MemoryError):
    pass

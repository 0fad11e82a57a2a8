"""Exception hierarchy. Every error raised on purpose by the package derives from TetraError."""


class TetraError(Exception):
    pass


class InvalidInputError(TetraError, ValueError):
    pass


class NotAContractionError(TetraError, ValueError):
    pass


class InvalidParameterError(TetraError, ValueError):
    pass


class InvalidTripleError(TetraError, ValueError):
    """Matrices that were supposed to commute do not."""


class NumericalDegeneracyError(TetraError, ArithmeticError):
    pass


class PreconditionError(TetraError, ValueError):
    pass


class IncompatibleTripleError(TetraError, ValueError):
    """The defect equations for the fundamental operators have no solution."""


class InvalidSymbolError(TetraError, ValueError):
    pass


class ConstraintViolationError(TetraError, ValueError):
    pass


class InvariantViolationError(TetraError, AssertionError):
    pass


class InternalInconsistencyError(TetraError, RuntimeError):
    """Two independent methods that must agree did not."""

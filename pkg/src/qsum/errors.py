"""Exception and warning types raised across the package."""


class QSumError(Exception):
    """Base class for all errors raised by qsum."""


class PoleProximity(QSumError, ArithmeticError):
    """An Exp_q factor came within the pole guard of zero."""


class TruncationLoss(UserWarning):
    """A nonzero coefficient was pushed past the truncation order."""


class NonzeroConstantTerm(QSumError, ValueError):
    pass


class ShapeMismatch(QSumError, ValueError):
    """The Newton polygon does not have the single slope-one shape."""


class RootFindingFailure(QSumError, RuntimeError):
    pass


class DegenerateSector(QSumError, ValueError):
    pass


class ResonantIndex(QSumError, ValueError):
    def __init__(self, n, value=None):
        self.n = n
        self.value = value
        super().__init__(f"P1([{n}]_q; 0) vanishes (value={value!r}); formal solution not determined at index {n}")


class GrowthExceeded(QSumError, RuntimeError):
    pass


class AssumptionViolated(QSumError, ValueError):
    pass


class OrderViolation(QSumError, ValueError):
    pass


class NonconvergentTail(QSumError, RuntimeError):
    pass


class GridUnderflow(QSumError, IndexError):
    pass


class TaylorTrustExceeded(QSumError, ValueError):
    pass


class PivotTooSmall(QSumError, ZeroDivisionError):
    pass


class BoundUnfittable(QSumError, RuntimeError):
    pass


class TailNotConverged(QSumError, RuntimeError):
    pass


class QuadratureNonconvergence(QSumError, RuntimeError):
    pass


class HypothesisFailed(QSumError, RuntimeError):
    def __init__(self, which, detail=""):
        self.which = which
        super().__init__(f"hypothesis {which} failed: {detail}")


class ParseError(QSumError, ValueError):
    pass


class ValidationError(QSumError, ValueError):
    pass

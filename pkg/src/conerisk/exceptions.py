"""Exception hierarchy shared by all conerisk modules."""


class ConeriskError(Exception):
    """Base class for errors raised by conerisk."""


class InvalidInputError(ConeriskError, ValueError):
    """An argument violates a documented precondition."""


class SingularMatrixError(ConeriskError, ValueError):
    """A matrix expected to be full rank is (numerically) rank deficient."""


class NumericalError(ConeriskError, ArithmeticError):
    """An iterative kernel failed to converge or produced non-finite output."""


class SolverError(NumericalError):
    """The active-set NNLS solver exceeded its pivot budget."""

"""Exception and warning types raised by the engine."""


class LRError(Exception):
    """Base class for every domain error; the CLI maps these to exit code 1."""


class InvalidModel(LRError, ValueError):
    pass


class InvalidInput(LRError, ValueError):
    pass


class DomainError(LRError, ValueError):
    """A frequency argument left the analyticity strip of the exponent."""


class MomentExplosion(LRError, ValueError):
    """The exponential moment E[exp(k L(1))] required by a computation is infinite."""


class DegenerateSpec(LRError, ZeroDivisionError):
    """The two legs have (numerically) equal diffusion volatility."""


class InsufficientData(LRError, ValueError):
    pass


class MisalignedSeries(LRError, ValueError):
    pass


class EmptyIntersection(LRError, ValueError):
    pass


class ConfigError(LRError, ValueError):
    pass


class RangeError(LRError, ValueError):
    """Strike outside the truncated log-price support of the COS expansion."""


class QuadratureFailure(LRError, ArithmeticError):
    pass


class PricingConsistencyError(LRError, ArithmeticError):
    pass


class DegenerateStep(LRError, ZeroDivisionError):
    pass


class ZeroGrowthFactor(LRError, ZeroDivisionError):
    pass


class NoRoot(LRError, ArithmeticError):
    pass


class NonFiniteInput(LRError, ValueError):
    pass


class ParseError(LRError, ValueError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class EmptyChain(LRError, ValueError):
    pass


class IoError(LRError, OSError):
    pass


class ArbitrageWarning(UserWarning):
    """Risk-neutral lattice probability outside (0, 1)."""


class NonConvergence(UserWarning):
    """Shadow-rate iteration hit its cap before meeting the tolerance."""


class FiniteDifferenceWarning(UserWarning):
    """Finite-difference residual failed its step-scaling check."""


class StepTooSmall(FiniteDifferenceWarning):
    """Round-off dominates: the residual stopped shrinking as the step was reduced."""


class StepTooLarge(FiniteDifferenceWarning):
    """Truncation dominates: the residual is still far above the quadratic regime."""

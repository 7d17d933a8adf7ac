"""Exception types shared across the package."""


class NotPositiveDefinite(ValueError):
    """A matrix required to be SPD failed its Cholesky factorization."""


class SingularCovariance(NotPositiveDefinite):
    """A fitted covariance stayed singular even after diagonal regularization."""


class IndexOutOfRange(IndexError):
    """A row/column index set refers outside the matrix."""


class UnknownPattern(KeyError):
    """A missingness pattern has no entry in a coefficient table."""


class DimensionTooLarge(ValueError):
    """An operation building 2**d tables was asked for a d beyond its cap."""


class DegenerateTarget(ValueError):
    """R2 is undefined because the target vector is constant."""


class NonFiniteLoss(FloatingPointError):
    """Training loss became NaN/Inf, typically a divergent learning rate."""


class UnboundedSupport(ValueError):
    """A finite support bound was required but not supplied."""

"""Exception hierarchy.

``ValidationError`` subclasses describe bad input (CLI exit code 1);
everything else deriving from ``HeterogeneityError`` is a runtime failure
(CLI exit code 2).
"""


class HeterogeneityError(Exception):
    """Base class for all package errors."""


class ValidationError(HeterogeneityError, ValueError):
    """Input violates a documented precondition."""


class MissingColumn(ValidationError):
    def __init__(self, column, logical=None):
        self.column = column
        self.logical = logical
        what = f"{column!r}" if logical is None else f"{column!r} (for {logical})"
        super().__init__(f"column {what} not found in CSV header")


class MalformedCsv(ValidationError):
    pass


class EmptyPanel(ValidationError):
    pass


class EmptyCluster(ValidationError):
    pass


class RateNotFound(ValidationError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"no exchange-rate/deflator entry for {key}")


class InvalidRange(ValidationError):
    pass


class OutOfDomain(ValidationError):
    pass


class DegenerateVariance(ValidationError):
    pass


class ZeroDiagonal(ValidationError):
    pass


class SubsetCapExceeded(HeterogeneityError):
    def __init__(self, n_subsets, cap):
        self.n_subsets = n_subsets
        self.cap = cap
        super().__init__(
            f"exact volume needs {n_subsets} determinant subsets (cap {cap}); "
            "use sampled mode instead"
        )


class SingularJacobian(HeterogeneityError):
    def __init__(self, retries):
        self.retries = retries
        super().__init__(f"Newton Jacobian singular after {retries} damping retries")


class NotConverged(HeterogeneityError):
    """Raised by strict fits; ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)

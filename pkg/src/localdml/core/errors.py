"""Exception and warning types raised across the package."""


class LocalDMLError(Exception):
    """Base class for all package errors."""


class PartitionInfeasibleError(LocalDMLError, ValueError):
    pass


class IngestionError(LocalDMLError, ValueError):
    """Raised when a data file cannot be turned into a :class:`Dataset`."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyWindowError(LocalDMLError, ValueError):
    """No observation receives positive kernel mass."""

    def __init__(self, point, bandwidth, fold=None):
        where = "" if fold is None else f" (fold {fold})"
        super().__init__(
            f"empty local window at point={point!r}, bandwidth={bandwidth!r}{where}"
        )
        self.point = point
        self.bandwidth = bandwidth
        self.fold = fold


class DegenerateCovariateError(LocalDMLError, ValueError):
    pass


class UnsupportedFunctionalError(LocalDMLError, TypeError):
    pass


class OverlapViolationError(LocalDMLError, ValueError):
    pass


class TrainingDivergedError(LocalDMLError, FloatingPointError):
    pass


class UndefinedScaleError(LocalDMLError, ZeroDivisionError):
    pass


class FoldFitError(LocalDMLError, RuntimeError):
    """Wraps a nuisance-fitting failure with the index of the fold it came from."""

    def __init__(self, fold, cause):
        super().__init__(f"fold {fold}: {type(cause).__name__}: {cause}")
        self.fold = fold
        self.cause = cause


class NonConvergenceWarning(UserWarning):
    """Iteration cap reached; ``kkt_residual`` holds the final optimality gap."""

    def __init__(self, message, kkt_residual=float("nan")):
        super().__init__(message)
        self.kkt_residual = kkt_residual

"""Domain types, localization primitives and the doubly robust moment."""

from .data import ColumnRoles, Dataset
from .errors import (
    DegenerateCovariateError,
    EmptyWindowError,
    FoldFitError,
    IngestionError,
    LocalDMLError,
    NonConvergenceWarning,
    OverlapViolationError,
    PartitionInfeasibleError,
    TrainingDivergedError,
    UndefinedScaleError,
    UnsupportedFunctionalError,
)
from .folds import FoldPartition, partition_folds
from .functionals import (
    FunctionalSpec,
    FunctionPredictor,
    MomentValue,
    constant_predictor,
    eval_functional_m,
    moment_psi,
)
from .kernels import Kernel, LocalWeighting, bandwidth_heuristic, kernel_eval, local_weights

__all__ = [
    "ColumnRoles", "Dataset", "FoldPartition", "partition_folds", "Kernel", "LocalWeighting",
    "kernel_eval", "local_weights", "bandwidth_heuristic", "FunctionalSpec", "FunctionPredictor",
    "MomentValue", "constant_predictor", "eval_functional_m", "moment_psi",
    "LocalDMLError", "PartitionInfeasibleError", "IngestionError", "EmptyWindowError",
    "DegenerateCovariateError", "UnsupportedFunctionalError", "OverlapViolationError",
    "TrainingDivergedError", "UndefinedScaleError", "FoldFitError", "NonConvergenceWarning",
]

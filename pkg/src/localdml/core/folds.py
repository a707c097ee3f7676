from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PartitionInfeasibleError


@dataclass(frozen=True, eq=False)
class FoldPartition:
    """Assignment of row indices to ``n_folds`` disjoint folds (0-based fold labels)."""

    n_folds: int
    assignment: np.ndarray

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_index(self, fold: int) -> np.ndarray:
        # other folds concatenated in fold order, so the training matrix depends
        # only on fold contents and within-fold order, not on how folds interleave
        return np.concatenate([self.test_index(k) for k in range(self.n_folds) if k != fold])

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_folds)

    def __iter__(self):
        for k in range(self.n_folds):
            yield self.train_index(k), self.test_index(k)

    def __eq__(self, other):
        return (
            isinstance(other, FoldPartition)
            and self.n_folds == other.n_folds
            and np.array_equal(self.assignment, other.assignment)
        )


def partition_folds(n: int, n_folds: int, seed) -> FoldPartition:
    """Shuffle rows with ``seed`` and cut them into contiguous, balanced blocks.

    Block sizes are ``n // n_folds`` with the remainder going to the last folds.
    """
    n, n_folds = int(n), int(n_folds)
    if n_folds < 2:
        raise PartitionInfeasibleError(f"need at least 2 folds, got {n_folds}")
    if n < 2 * n_folds:
        raise PartitionInfeasibleError(f"n={n} rows cannot fill {n_folds} folds (need n >= {2 * n_folds})")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = rng.permutation(n)
    base, extra = divmod(n, n_folds)
    sizes = np.full(n_folds, base)
    if extra:
        sizes[n_folds - extra:] += 1
    labels = np.repeat(np.arange(n_folds), sizes)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = labels
    assignment.setflags(write=False)
    return FoldPartition(n_folds=n_folds, assignment=assignment)

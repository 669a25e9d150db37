"""Batch-means Monte Carlo error.

Each chain's retained samples are cut into consecutive batches; batch ``b``
of every temperature forms a sub-ladder on which the whole estimator is
recomputed.  The reported value is the mean over batches and the Monte
Carlo error is the standard deviation across batches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class BatchSpec:
    n_batches: int = 30
    batch_size: Optional[int] = None

    def __post_init__(self):
        if self.n_batches < 2:
            raise DomainError("batch means needs at least 2 batches")
        if self.batch_size is not None and self.batch_size < 2:
            raise DomainError("batches must hold at least 2 samples")

    def resolve(self, available: int) -> int:
        """Batch size for chains holding ``available`` retained samples."""
        size = self.batch_size if self.batch_size is not None else available // self.n_batches
        if size < 2 or size * self.n_batches > available:
            need = self.n_batches * max(2, self.batch_size or 2)
            raise DomainError(
                f"batch spec needs at least {need} retained samples per chain, got {available}"
            )
        return size


@dataclass
class EstimateWithError:
    value: float
    mce: float
    batch_values: np.ndarray = field(repr=False)
    n_batches: int = 0

    @property
    def standard_error(self) -> float:
        """Error of the batch-averaged value (``mce / sqrt(n_batches)``)."""
        return self.mce / np.sqrt(self.n_batches) if self.n_batches else float("nan")

    def to_dict(self) -> dict:
        return {"value": float(self.value), "mce": float(self.mce)}

    @classmethod
    def from_batches(cls, values) -> "EstimateWithError":
        values = np.asarray(values, dtype=float)
        if values.size < 2:
            raise DomainError("need at least two batch values")
        return cls(float(values.mean()), float(values.std(ddof=1)), values, int(values.size))


def batch_values(ladder, estimator: Callable, spec: BatchSpec = BatchSpec()) -> np.ndarray:
    """Evaluate ``estimator`` on every batch sub-ladder; stacks the results."""
    size = spec.resolve(ladder.min_length)
    vals = [estimator(ladder.sliced(slice(b * size, (b + 1) * size))) for b in range(spec.n_batches)]
    return np.asarray(vals, dtype=float)


def batch_means(ladder, estimator: Callable, spec: BatchSpec = BatchSpec()) -> EstimateWithError:
    return EstimateWithError.from_batches(batch_values(ladder, estimator, spec))


def chain_mean_se(values, n_batches: int = 30) -> float:
    """Batch-means standard error of the mean of a single chain's values."""
    values = np.asarray(values, dtype=float)
    size = values.size // n_batches
    if size < 2:
        return float(values.std(ddof=1) / np.sqrt(values.size))
    means = values[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))

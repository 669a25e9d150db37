"""Stepping-stone estimator of log(lambda) from the ladder used for TI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .batching import BatchSpec, EstimateWithError, batch_values
from .densities import GeometricPath
from .errors import DomainError
from .sampler import ChainOutput, LadderOutput


@dataclass
class SteppingStoneResult:
    log_lambda_hat: float
    step_log_ratios: np.ndarray
    ess_per_step: np.ndarray
    t_lo: np.ndarray
    t_hi: np.ndarray

    def steps(self) -> list:
        return [
            {"t_lo": float(a), "t_hi": float(b), "log_ratio": float(r), "ess": float(e)}
            for a, b, r, e in zip(self.t_lo, self.t_hi, self.step_log_ratios, self.ess_per_step)
        ]


def _log_increments(chain: ChainOutput, path, delta: float) -> np.ndarray:
    if path is None or isinstance(path, GeometricPath):
        return delta * np.asarray(chain.u_values)
    return np.asarray(path.log_ratio(chain.samples, chain.t, chain.t + delta))


def ss_step_log_ratio(chain: ChainOutput, path, delta: float) -> float:
    """log of the mean of ``q_{t+delta}/q_t`` over samples drawn at ``t``."""
    if len(chain) == 0:
        raise DomainError(f"chain at t={chain.t} is empty")
    if delta <= 0:
        raise DomainError("step width must be positive")
    inc = _log_increments(chain, path, delta)
    return float(logsumexp(inc) - np.log(inc.size))


def _ess(inc: np.ndarray) -> float:
    w = np.exp(inc - inc.max())
    w = w / w.mean()
    return float(inc.size / (1.0 + np.var(w)))


def stepping_stone(ladder: LadderOutput, path=None) -> SteppingStoneResult:
    """Telescoping product of per-panel importance ratios; the chain at t=1 is unused."""
    path = ladder.path if path is None else path
    ts = ladder.schedule.as_array()
    ratios = np.empty(len(ts) - 1)
    ess = np.empty(len(ts) - 1)
    for i, chain in enumerate(ladder.chains[:-1]):
        delta = ts[i + 1] - ts[i]
        inc = _log_increments(chain, path, delta)
        ratios[i] = logsumexp(inc) - np.log(inc.size)
        ess[i] = _ess(inc)
    return SteppingStoneResult(float(ratios.sum()), ratios, ess, ts[:-1], ts[1:])


def ss_estimate(ladder: LadderOutput, spec: BatchSpec = BatchSpec(), path=None) -> EstimateWithError:
    """Batch-means stepping-stone estimate of log(lambda)."""
    return EstimateWithError.from_batches(
        batch_values(ladder, lambda sub: stepping_stone(sub, path).log_lambda_hat, spec)
    )

import numpy as np
import pytest

from thermopath.densities import GeometricPath, normal_kernel
from thermopath.sampler import ChainOutput, LadderOutput
from thermopath.schedules import explicit_schedule


def synthetic_ladder(ts, u_by_t, path=None, dim=1):
    """Ladder whose chains carry the given U-values (samples are placeholders)."""
    chains = []
    for t, u in zip(ts, u_by_t):
        u = np.asarray(u, dtype=float)
        chains.append(ChainOutput(float(t), np.zeros((u.size, dim)), u, 1.0, 0))
    return LadderOutput(explicit_schedule(ts), chains, path)


@pytest.fixture
def unit_pair_path():
    """q0 = exp(-x^2/2), q1 = exp(-(x-1)^2/2)."""
    return GeometricPath(normal_kernel(0.0, 1.0), normal_kernel(1.0, 1.0))


@pytest.fixture
def degenerate_path():
    return GeometricPath(normal_kernel(0.0, 1.0), normal_kernel(0.0, 1.0))

"""Temperature schedules over [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

KINDS = ("uniform", "powered_fraction", "beta_quantile", "refined", "explicit")


@dataclass(frozen=True)
class TemperatureSchedule:
    """Strictly increasing temperatures with exact endpoints 0 and 1."""

    points: tuple
    kind: str = "explicit"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise DomainError("a schedule needs at least the two endpoints 0 and 1")
        if pts[0] != 0.0 or pts[-1] != 1.0:
            raise DomainError(f"schedule must start at 0 and end at 1, got {pts[0]} .. {pts[-1]}")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("schedule points must be strictly increasing")
        if self.kind not in KINDS:
            raise DomainError(f"unknown schedule kind {self.kind!r}")
        object.__setattr__(self, "points", tuple(float(p) for p in pts))

    @property
    def n(self) -> int:
        """Number of panels."""
        return len(self.points) - 1

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points)

    def spacings(self) -> np.ndarray:
        return np.diff(self.as_array())


def _grid(n: int) -> np.ndarray:
    if int(n) != n or n < 1:
        raise DomainError(f"schedule needs n >= 1 panels, got {n}")
    return np.arange(int(n) + 1) / int(n)


def uniform_schedule(n: int) -> TemperatureSchedule:
    return TemperatureSchedule(tuple(_grid(n)), "uniform")


def powered_fraction_schedule(n: int, c: float) -> TemperatureSchedule:
    """``t_i = (i/n)**c``; ``c > 1`` packs points towards t = 0."""
    if not c >= 1:
        raise DomainError(f"powered-fraction exponent must be >= 1, got {c}")
    return TemperatureSchedule(tuple(_grid(n) ** c), "powered_fraction")


def beta_quantile_schedule(n: int, a: float) -> TemperatureSchedule:
    """Beta(a, 1) quantiles of an even grid, i.e. ``(i/n)**(1/a)``."""
    if not 0 < a <= 1:
        raise DomainError(f"beta-quantile parameter must lie in (0, 1], got {a}")
    return TemperatureSchedule(tuple(_grid(n) ** (1.0 / a)), "beta_quantile")


def explicit_schedule(points) -> TemperatureSchedule:
    return TemperatureSchedule(tuple(points), "explicit")


def refine_interval(schedule: TemperatureSchedule, lo: float, hi: float, k: int) -> TemperatureSchedule:
    """Insert ``k - 1`` evenly spaced points strictly between adjacent points ``lo`` and ``hi``."""
    pts = list(schedule.points)
    if int(k) != k or k < 1:
        raise DomainError(f"refinement factor must be a positive integer, got {k}")
    try:
        i = pts.index(lo)
    except ValueError:
        raise DomainError(f"{lo} is not a schedule point") from None
    if i + 1 >= len(pts) or pts[i + 1] != hi:
        raise DomainError(f"({lo}, {hi}) are not adjacent schedule points")
    if k == 1:
        return schedule
    inner = [lo + (hi - lo) * j / k for j in range(1, int(k))]
    return TemperatureSchedule(tuple(pts[: i + 1] + inner + pts[i + 1 :]), "refined")


def insert_points(schedule: TemperatureSchedule, new_points) -> TemperatureSchedule:
    """Schedule with extra interior points merged in (duplicates ignored)."""
    merged = sorted(set(schedule.points) | {float(p) for p in new_points})
    kind = schedule.kind if len(merged) == len(schedule) else "refined"
    return TemperatureSchedule(tuple(merged), kind)


def from_spec(kind: str, n: int | None = None, c: float | None = None, a: float | None = None, points=None):
    """Build a schedule from the flat config keys ``schedule.*``."""
    if kind == "uniform":
        return uniform_schedule(n)
    if kind == "powered_fraction":
        return powered_fraction_schedule(n, c)
    if kind == "beta_quantile":
        return beta_quantile_schedule(n, a)
    if kind == "explicit":
        if points is None:
            raise DomainError("explicit schedule needs schedule.points")
        return explicit_schedule(points)
    raise DomainError(f"unknown schedule kind {kind!r}")

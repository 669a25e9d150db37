"""Unnormalized log-densities, geometric and quadrivial paths.

Everything is evaluated in log space.  Densities are vectorized: they accept
a single parameter vector of shape ``(d,)`` (returning a float) or a stack of
vectors of shape ``(m, d)`` (returning an array of shape ``(m,)``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, NumericError, SupportError

LOG_2PI = float(np.log(2.0 * np.pi))


def as_param_vector(values) -> np.ndarray:
    """Validate and return a finite 1-D float array."""
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"parameter vector must be 1-D and non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"parameter vector has non-finite entries: {arr}")
    return arr


def check_t(t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise DomainError(f"temperature must lie in [0, 1], got {t}")
    return t_arr


class LogDensity:
    """An unnormalized log-density ``theta -> log q(theta)``.

    ``fn`` must map an ``(m, d)`` array to an ``(m,)`` array when
    ``vectorized`` is true; otherwise it is called once per row.  Points
    rejected by ``support_check`` evaluate to ``-inf``.
    """

    def __init__(
        self,
        fn: Callable[[np.ndarray], np.ndarray],
        dim: int,
        label: str = "",
        support_check: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        vectorized: bool = True,
    ):
        if dim < 1:
            raise DomainError("density dimension must be positive")
        self._fn = fn
        self.dim = int(dim)
        self.label = label
        self.support_check = support_check
        self.vectorized = vectorized

    def _raw(self, theta: np.ndarray) -> np.ndarray:
        if self.vectorized:
            return np.asarray(self._fn(theta), dtype=float).reshape(theta.shape[0])
        return np.array([float(self._fn(row)) for row in theta])

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        single = theta.ndim == 1
        batch = np.atleast_2d(theta)
        if batch.shape[1] != self.dim:
            raise DomainError(
                f"density {self.label!r} expects dimension {self.dim}, got {batch.shape[1]}"
            )
        out = np.full(batch.shape[0], -np.inf)
        inside = np.ones(batch.shape[0], dtype=bool)
        if self.support_check is not None:
            inside = np.asarray(self.support_check(batch), dtype=bool).reshape(batch.shape[0])
        if inside.any():
            out[inside] = self._raw(batch[inside])
        bad = np.isnan(out) | (out == np.inf)
        if bad.any():
            raise NumericError(
                f"density {self.label!r} returned {out[bad][0]} at theta={batch[bad][0]}",
                theta=batch[bad][0],
            )
        return float(out[0]) if single else out

    def __repr__(self):
        return f"{type(self).__name__}(label={self.label!r}, dim={self.dim})"


class ShiftedDensity(LogDensity):
    """``c * q(theta)`` for a positive constant ``c`` (stored as ``log_c``)."""

    def __init__(self, base: LogDensity, log_c: float, label: str = ""):
        self.base = base
        self.log_c = float(log_c)
        super().__init__(
            lambda th: base(th) + self.log_c,
            base.dim,
            label or f"{base.label}+{self.log_c:g}",
        )


def normal_kernel(mean, var, scale: float = 1.0, label: str = "") -> LogDensity:
    """Unnormalized diagonal Gaussian kernel ``scale * exp(-0.5 * sum((x-m)^2/v))``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    var = np.broadcast_to(np.asarray(var, dtype=float), mean.shape).copy()
    if np.any(var <= 0) or scale <= 0:
        raise DomainError("normal kernel needs positive variances and scale")
    log_scale = float(np.log(scale))

    def fn(th):
        return log_scale - 0.5 * np.sum((th - mean) ** 2 / var, axis=1)

    return LogDensity(fn, mean.size, label or f"kernel N({mean.tolist()}, {var.tolist()})")


def mvn_log_density(mean, cov, label: str = "") -> LogDensity:
    """Normalized multivariate normal; ``cov`` is a variance vector (diagonal) or a matrix."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.asarray(cov, dtype=float)
    d = mean.size
    if cov.ndim <= 1:
        var = np.broadcast_to(cov, mean.shape).astype(float)
        if np.any(var <= 0):
            raise DomainError("normal variances must be positive")
        const = -0.5 * (d * LOG_2PI + np.sum(np.log(var)))

        def fn(th):
            return const - 0.5 * np.sum((th - mean) ** 2 / var, axis=1)

    else:
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise DomainError("covariance is not positive definite") from exc
        const = -0.5 * d * LOG_2PI - np.sum(np.log(np.diag(chol)))

        def fn(th):
            z = np.linalg.solve(chol, (th - mean).T)
            return const - 0.5 * np.sum(z**2, axis=0)

    return LogDensity(fn, d, label or f"N({mean.tolist()})")


def inverse_gamma_log_density(shape: float, rate: float, label: str = "") -> LogDensity:
    """Normalized inverse-gamma density on a single positive coordinate."""
    if shape <= 0 or rate <= 0:
        raise DomainError("inverse-gamma shape and rate must be positive")
    const = shape * np.log(rate) - gammaln(shape)

    def fn(th):
        x = th[:, 0]
        return const - (shape + 1.0) * np.log(x) - rate / x

    return LogDensity(
        fn, 1, label or f"IG({shape:g}, {rate:g})", support_check=lambda th: th[:, 0] > 0
    )


def product_density(parts: Sequence[tuple], label: str = "") -> LogDensity:
    """Independent product of densities acting on index blocks.

    ``parts`` is a sequence of ``(density, indices)`` pairs; the indices of
    all parts must tile ``0..d-1`` exactly once.
    """
    blocks = [(dens, np.atleast_1d(np.asarray(idx, dtype=int))) for dens, idx in parts]
    all_idx = np.sort(np.concatenate([b for _, b in blocks]))
    if not np.array_equal(all_idx, np.arange(all_idx.size)):
        raise DomainError("product density blocks must cover each coordinate exactly once")
    for dens, idx in blocks:
        if dens.dim != idx.size:
            raise DomainError(f"block {idx.tolist()} does not match density dimension {dens.dim}")

    def fn(th):
        total = np.zeros(th.shape[0])
        for dens, idx in blocks:
            total = total + dens(th[:, idx])
        return total

    return LogDensity(fn, int(all_idx.size), label or " x ".join(d.label for d, _ in blocks))


def _weighted_sum(weights, densities, theta):
    """Sum of ``w * log q`` dropping zero-weight terms, so ``0 * -inf`` never occurs."""
    total = None
    for w, dens in zip(weights, densities):
        w = np.asarray(w, dtype=float)
        if np.all(w == 0.0):
            continue
        val = dens(theta)
        with np.errstate(invalid="ignore"):
            term = np.where(w == 0.0, 0.0, w * val)
        total = term if total is None else total + term
    if total is None:
        return 0.0 if np.asarray(theta).ndim == 1 else np.zeros(np.atleast_2d(theta).shape[0])
    return total


def _require_finite(values, theta, labels):
    for name, val in zip(labels, values):
        if np.any(~np.isfinite(val)):
            where = np.atleast_2d(theta)[~np.isfinite(np.atleast_1d(val))][0]
            raise SupportError(
                f"endpoint {name} is outside its support at theta={where}", theta=where, which=name
            )


@dataclass(frozen=True)
class GeometricPath:
    """``q_t = q1^t * q0^(1-t)`` between two unnormalized densities."""

    q0: LogDensity
    q1: LogDensity

    def __post_init__(self):
        if self.q0.dim != self.q1.dim:
            raise DomainError("path endpoints must share a dimension")

    @property
    def dim(self) -> int:
        return self.q0.dim

    def log_q(self, theta, t):
        t = check_t(t)
        return _weighted_sum([t, 1.0 - t], [self.q1, self.q0], theta)

    def u(self, theta, t=None):
        """``log q1 - log q0``; ``t`` is accepted for interface symmetry and ignored."""
        l1 = self.q1(theta)
        l0 = self.q0(theta)
        _require_finite([l1, l0], theta, ["q1", "q0"])
        return l1 - l0

    def log_ratio(self, theta, t_from: float, t_to: float):
        """``log q_{t_to}(theta) - log q_{t_from}(theta)``."""
        return (t_to - t_from) * self.u(theta)

    def swapped(self) -> "GeometricPath":
        return GeometricPath(self.q1, self.q0)

    def kernel_at(self, t: float):
        """Closed-form tempered kernel when both endpoints support weighting, else None."""
        if hasattr(self.q0, "weighted") and hasattr(self.q1, "weighted"):
            try:
                return self.q1.weighted(t).combined(self.q0.weighted(1.0 - t))
            except TypeError:
                return None
        return None

    def densities(self):
        return (self.q0, self.q1)


@dataclass(frozen=True)
class QuadrivialPath:
    """Compound path: a geometric hyper-path between two nested geometric paths.

    ``q1_of_1``/``q0_of_1`` are the endpoints of the nested path attached to
    model 1 and ``q1_of_0``/``q0_of_0`` those of model 0.  At ``t = 1`` the
    path is ``q1_of_1`` and at ``t = 0`` it is ``q0_of_0``.
    """

    q1_of_1: LogDensity
    q0_of_1: LogDensity
    q1_of_0: LogDensity
    q0_of_0: LogDensity

    def __post_init__(self):
        dims = {d.dim for d in self.densities()}
        if len(dims) != 1:
            raise DomainError("all four quadrivial densities must share a dimension")

    @property
    def dim(self) -> int:
        return self.q1_of_1.dim

    def densities(self):
        return (self.q1_of_1, self.q0_of_1, self.q1_of_0, self.q0_of_0)

    @staticmethod
    def _weights(t):
        return [t * t, t * (1.0 - t), t * (1.0 - t), (1.0 - t) ** 2]

    @staticmethod
    def _u_coefficients(t):
        return [2.0 * t, 1.0 - 2.0 * t, 1.0 - 2.0 * t, -2.0 * (1.0 - t)]

    def log_q(self, theta, t):
        t = check_t(t)
        return _weighted_sum(self._weights(t), self.densities(), theta)

    def u(self, theta, t):
        """Derivative in ``t`` of ``log_q`` at fixed theta."""
        t = check_t(t)
        names = ("q1_of_1", "q0_of_1", "q1_of_0", "q0_of_0")
        used = [
            (c, d, name)
            for c, d, name in zip(self._u_coefficients(t), self.densities(), names)
            if not np.all(np.asarray(c) == 0)
        ]
        values = [d(theta) for _, d, _ in used]
        _require_finite(values, theta, [name for _, _, name in used])
        total = 0.0
        for (c, _, _), val in zip(used, values):
            total = total + c * val
        return total

    def log_ratio(self, theta, t_from: float, t_to: float):
        """Exact increment of ``log_q``: the quadratic in ``t`` makes the midpoint slope exact."""
        return (t_to - t_from) * self.u(theta, 0.5 * (t_from + t_to))

    def kernel_at(self, t: float):
        dens = self.densities()
        if all(hasattr(d, "weighted") for d in dens):
            out = None
            try:
                for w, d in zip(self._weights(float(t)), dens):
                    part = d.weighted(w)
                    out = part if out is None else out.combined(part)
            except TypeError:
                return None
            return out
        return None


@dataclass(frozen=True)
class TemperedTarget:
    """The unnormalized sampling target of a path at a fixed temperature."""

    path: object
    t: float

    def __post_init__(self):
        check_t(self.t)

    @property
    def dim(self) -> int:
        return self.path.dim

    def log_q(self, theta):
        return self.path.log_q(theta, self.t)

    def u(self, theta):
        return self.path.u(theta, self.t)


def geometric_log_q(path: GeometricPath, theta, t):
    return path.log_q(theta, t)


def u_statistic(path: GeometricPath, theta):
    return path.u(theta)


def quadrivial_log_q(path: QuadrivialPath, theta, t):
    return path.log_q(theta, t)


def quadrivial_u(path: QuadrivialPath, theta, t):
    return path.u(theta, t)

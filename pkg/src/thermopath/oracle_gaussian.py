"""Closed-form reference values for Gaussian endpoint pairs, and 1-D quadrature.

A :class:`GaussianPair` describes two kernels
``q_i(theta) = c_i * exp(-0.5 (theta - mu_i)' Sigma_i^{-1} (theta - mu_i))``,
so ``z_i = c_i * sqrt(det(2 pi Sigma_i))``.  Everything here is exact up to
floating point (``t*`` up to the golden-section tolerance) and serves as the
oracle for the sampling-based estimators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from .densities import GeometricPath, LogDensity, LOG_2PI
from .errors import DomainError


def _as_cov(cov, d):
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = np.full(d, float(cov))
    if cov.ndim == 1:
        cov = np.diag(cov)
    if cov.shape != (d, d) or not np.allclose(cov, cov.T):
        raise DomainError("covariance must be a symmetric d x d matrix")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise DomainError("covariance is not positive definite") from exc
    return cov


@dataclass(frozen=True)
class GaussianPair:
    mu0: np.ndarray
    mu1: np.ndarray
    sigma0: np.ndarray
    sigma1: np.ndarray
    c0: float = 1.0
    c1: float = 1.0

    def __init__(self, mu0, mu1, sigma0=1.0, sigma1=1.0, c0=1.0, c1=1.0):
        mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))
        mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
        if mu0.shape != mu1.shape or mu0.ndim != 1:
            raise DomainError("means must be vectors of equal length")
        if c0 <= 0 or c1 <= 0:
            raise DomainError("scale constants must be positive")
        d = mu0.size
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "sigma0", _as_cov(sigma0, d))
        object.__setattr__(self, "sigma1", _as_cov(sigma1, d))
        object.__setattr__(self, "c0", float(c0))
        object.__setattr__(self, "c1", float(c1))

    @property
    def dim(self) -> int:
        return self.mu0.size

    def _kernel(self, mu, sigma, c, label):
        prec = np.linalg.inv(sigma)
        log_c = np.log(c)

        def fn(th):
            r = th - mu
            return log_c - 0.5 * np.einsum("ij,jk,ik->i", r, prec, r)

        return LogDensity(fn, self.dim, label)

    def path(self) -> GeometricPath:
        """Geometric path between the two kernels."""
        return GeometricPath(
            self._kernel(self.mu0, self.sigma0, self.c0, "q0"),
            self._kernel(self.mu1, self.sigma1, self.c1, "q1"),
        )

    def tempered(self, t):
        """Mean and covariance of the normalized tempered density p_t."""
        lam0 = np.linalg.inv(self.sigma0)
        lam1 = np.linalg.inv(self.sigma1)
        lam_t = t * lam1 + (1.0 - t) * lam0
        try:
            np.linalg.cholesky(lam_t)
        except np.linalg.LinAlgError as exc:
            raise DomainError(f"tempered precision is not positive definite at t={t}") from exc
        cov_t = np.linalg.inv(lam_t)
        mean_t = cov_t @ (t * lam1 @ self.mu1 + (1.0 - t) * lam0 @ self.mu0)
        return mean_t, cov_t


def _logdet(a):
    sign, val = np.linalg.slogdet(a)
    return val


def exact_log_lambda(pair: GaussianPair) -> float:
    return float(np.log(pair.c1 / pair.c0) + 0.5 * (_logdet(pair.sigma1) - _logdet(pair.sigma0)))


def _u_linear_quadratic(pair):
    """U(theta) = a + b'theta - 0.5 theta' M theta."""
    lam0 = np.linalg.inv(pair.sigma0)
    lam1 = np.linalg.inv(pair.sigma1)
    m = lam1 - lam0
    b = lam1 @ pair.mu1 - lam0 @ pair.mu0
    a = np.log(pair.c1 / pair.c0) - 0.5 * pair.mu1 @ lam1 @ pair.mu1 + 0.5 * pair.mu0 @ lam0 @ pair.mu0
    return a, b, m


def exact_e_t(pair: GaussianPair, t: float) -> float:
    """E_{p_t}[U]."""
    mean_t, cov_t = pair.tempered(t)
    a, b, m = _u_linear_quadratic(pair)
    return float(a + b @ mean_t - 0.5 * (np.trace(m @ cov_t) + mean_t @ m @ mean_t))


def exact_v_t(pair: GaussianPair, t: float) -> float:
    """Var_{p_t}[U]."""
    mean_t, cov_t = pair.tempered(t)
    _, b, m = _u_linear_quadratic(pair)
    g = b - m @ mean_t
    return float(g @ cov_t @ g + 0.5 * np.trace(m @ cov_t @ m @ cov_t))


def _normalized_log_const(sigma):
    return -0.5 * (sigma.shape[0] * LOG_2PI + _logdet(sigma))


def log_chernoff_coefficient(pair: GaussianPair, t: float) -> float:
    """``log mu(t) = log int p1^t p0^(1-t)`` for the normalized endpoints."""
    if t in (0.0, 1.0):
        return 0.0
    lam0 = np.linalg.inv(pair.sigma0)
    lam1 = np.linalg.inv(pair.sigma1)
    lam_t = t * lam1 + (1.0 - t) * lam0
    h = t * lam1 @ pair.mu1 + (1.0 - t) * lam0 @ pair.mu0
    c = (
        t * (_normalized_log_const(pair.sigma1) - 0.5 * pair.mu1 @ lam1 @ pair.mu1)
        + (1.0 - t) * (_normalized_log_const(pair.sigma0) - 0.5 * pair.mu0 @ lam0 @ pair.mu0)
    )
    d = pair.dim
    return float(c + 0.5 * h @ np.linalg.solve(lam_t, h) + 0.5 * d * LOG_2PI - 0.5 * _logdet(lam_t))


def exact_chernoff_t(pair: GaussianPair, t: float) -> float:
    return -log_chernoff_coefficient(pair, t)


def _kl(mu_a, s_a, mu_b, s_b):
    """KL(N(mu_a, s_a) || N(mu_b, s_b))."""
    d = mu_a.size
    inv_b = np.linalg.inv(s_b)
    diff = mu_b - mu_a
    return float(0.5 * (np.trace(inv_b @ s_a) + diff @ inv_b @ diff - d + _logdet(s_b) - _logdet(s_a)))


def exact_t_star(pair: GaussianPair, tol: float = 1e-10) -> float:
    """Minimizer of log mu(t) by golden-section search."""
    if exact_chernoff_t(pair, 0.5) <= 1e-15:
        return 0.5
    res = optimize.minimize_scalar(
        lambda t: log_chernoff_coefficient(pair, t), bracket=(0.0, 0.5, 1.0), method="golden", tol=tol
    )
    return float(res.x)


def exact_divergences(pair: GaussianPair) -> dict:
    kl_1_0 = _kl(pair.mu1, pair.sigma1, pair.mu0, pair.sigma0)
    kl_0_1 = _kl(pair.mu0, pair.sigma0, pair.mu1, pair.sigma1)
    t_star = exact_t_star(pair)
    if np.array_equal(pair.mu0, pair.mu1) and np.array_equal(pair.sigma0, pair.sigma1):
        # identical normalized endpoints: avoid rounding noise under the square root
        c = bh = 0.0
    else:
        c = exact_chernoff_t(pair, t_star)
        bh = exact_chernoff_t(pair, 0.5)
    return {
        "log_lambda": exact_log_lambda(pair),
        "kl_1_0": kl_1_0,
        "kl_0_1": kl_0_1,
        "j": kl_1_0 + kl_0_1,
        "t_star": t_star,
        "chernoff_info": c,
        "bhattacharyya": bh,
        "hellinger": float(np.sqrt(max(0.0, -np.expm1(-bh)))),
        "renyi_at_t_star": c / (1.0 - t_star),
        "tsallis_at_t_star": float(-np.expm1(-c) / (1.0 - t_star)),
    }


def quadrature_log_z(density, lo: float, hi: float, step: float, margin: float = 30.0) -> float:
    """log of the trapezoid integral of ``exp(density)`` over ``[lo, hi]`` (1-D only).

    The grid must contain the mass: both boundary log-values have to sit at
    least ``margin`` log-units below the maximum.
    """
    if not hi > lo or step <= 0:
        raise DomainError("quadrature grid needs lo < hi and a positive step")
    n = int(round((hi - lo) / step)) + 1
    grid = np.linspace(lo, hi, n)
    vals = np.asarray(density(grid[:, None]), dtype=float)
    top = vals.max()
    if not np.isfinite(top):
        raise DomainError("density is -inf on the whole grid")
    if vals[0] > top - margin or vals[-1] > top - margin:
        raise DomainError("quadrature grid does not contain the support (boundary check failed)")
    h = grid[1] - grid[0]
    w = np.full(n, h)
    w[[0, -1]] *= 0.5
    return float(logsumexp(vals, b=w))


def conjugate_normal_log_marginal(y, noise_var: float, prior_mean: float, prior_var: float) -> float:
    """log p(y) for ``y_i ~ N(theta, noise_var)`` and ``theta ~ N(prior_mean, prior_var)``.

    Evaluated directly as the multivariate normal density of ``y``.
    """
    y = np.asarray(y, dtype=float)
    cov = noise_var * np.eye(y.size) + prior_var
    return float(multivariate_normal(np.full(y.size, prior_mean), cov).logpdf(y))


def conjugate_normal_pair(y, noise_var: float, prior_mean: float, prior_var: float) -> GaussianPair:
    """Prior and unnormalized posterior of the conjugate normal-mean model as a Gaussian pair.

    The prior kernel is normalized and the posterior kernel integrates to
    the marginal likelihood, so the pair's log ratio is log p(y).
    """
    y = np.asarray(y, dtype=float)
    post_var = 1.0 / (1.0 / prior_var + y.size / noise_var)
    post_mean = post_var * (prior_mean / prior_var + y.sum() / noise_var)
    # log p(y) from the posterior normalizer, independent of the route above
    log_z = (
        -0.5 * y.size * np.log(2 * np.pi * noise_var)
        - 0.5 * (np.sum(y**2) / noise_var + prior_mean**2 / prior_var - post_mean**2 / post_var)
        + 0.5 * np.log(post_var / prior_var)
    )
    c0 = (2 * np.pi * prior_var) ** -0.5
    log_c1 = log_z - 0.5 * np.log(2 * np.pi * post_var)
    return GaussianPair(prior_mean, post_mean, prior_var, post_var, c0, float(np.exp(log_c1)))

"""Normal linear regression ``y_i = alpha + beta * (x_i - xbar) + eps_i``.

Parameters are ordered ``(alpha, beta, sigma2)``.  Every density used on the
regression paths (tempered likelihood, normal priors on ``(alpha, beta)``,
inverse-gamma priors on ``sigma2`` and moment-matched importance densities of
the same families) is a weighted sum of three kinds of log-terms.  That
family is closed under the geometric and quadrivial mixing used by the
paths, and every member has normal / inverse-gamma full conditionals, so a
single Gibbs sampler covers all of them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import gammaln, logsumexp

from .densities import LOG_2PI, LogDensity
from .errors import ConfigurationError, DomainError


class RegressionData:
    """Response and covariate with the sufficient statistics the sampler needs."""

    def __init__(self, y, x):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        if y.shape != x.shape or y.ndim != 1:
            raise DomainError("y and x must be 1-D arrays of equal length")
        if y.size < 3:
            raise DomainError("regression needs at least 3 observations")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise DomainError("regression data must be finite")
        self.y = y
        self.x = x
        self.xbar = float(x.mean())
        self.xc = x - self.xbar
        self.n = y.size
        self.sum_y = float(y.sum())
        self.sum_yy = float(y @ y)
        self.sxx = float(self.xc @ self.xc)
        self.sxy = float(self.xc @ y)

    def ssr(self, alpha, beta):
        """Residual sum of squares, vectorized over parameter arrays."""
        return (
            self.sum_yy
            - 2.0 * alpha * self.sum_y
            - 2.0 * beta * self.sxy
            + self.n * alpha**2
            + self.sxx * beta**2
        )

    def same_as(self, other: "RegressionData") -> bool:
        return other is self or (np.array_equal(self.y, other.y) and np.array_equal(self.x, other.x))

    def ols(self):
        beta = self.sxy / self.sxx
        alpha = self.sum_y / self.n
        sigma2 = float(self.ssr(alpha, beta)) / (self.n - 2)
        return np.array([alpha, beta, sigma2])


def load_csv(path) -> RegressionData:
    """Read a ``y,x`` CSV with header."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"y", "x"} <= set(reader.fieldnames):
            raise ConfigurationError(f"{path}: expected header with columns y,x")
        rows = list(reader)
    try:
        y = [float(r["y"]) for r in rows]
        x = [float(r["x"]) for r in rows]
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: non-numeric entry ({exc})") from exc
    return RegressionData(y, x)


def load_pine() -> RegressionData:
    """The 42-specimen Pinus radiata data: compressive strength ``y`` against density ``x``."""
    with resources.as_file(resources.files("thermopath") / "data" / "pine.csv") as p:
        return load_csv(Path(p))


@dataclass(frozen=True)
class PriorScheme:
    mean: tuple
    var: tuple
    shape: float
    rate: float


# Labelled to match the reported marginal likelihoods (-309.9, -323.4, -328.2).
PINE_PRIORS = {
    "pi1": PriorScheme((3000.0, 185.0), (1e6, 1e4), 3.0, 1.8e5),
    "pi2": PriorScheme((3000.0, 0.0), (1e5, 1e3), 0.3, 1.8e4),
    "pi3": PriorScheme((3000.0, 0.0), (1e5, 1e3), 3.0, 1.8e4),
}


class RegressionKernel(LogDensity):
    """Weighted sum of log-likelihood, normal and inverse-gamma log-terms.

    ``normal_terms`` holds ``(weight, mean[2], var[2])`` for independent normal
    densities on ``(alpha, beta)``; ``ig_terms`` holds ``(weight, shape, rate)``
    for inverse-gamma densities on ``sigma2``.  All component densities are
    normalized, so a kernel with unit weight on one normal and one
    inverse-gamma term and no likelihood is a proper, normalized density.
    """

    def __init__(self, data: RegressionData, lik_weight=0.0, normal_terms=(), ig_terms=(), label=""):
        self.data = data
        self.lik_weight = float(lik_weight)
        self.normal_terms = tuple(
            (float(w), np.asarray(m, dtype=float), np.asarray(v, dtype=float))
            for w, m, v in normal_terms
            if w != 0
        )
        self.ig_terms = tuple((float(w), float(a), float(b)) for w, a, b in ig_terms if w != 0)
        for _, _, v in self.normal_terms:
            if np.any(v <= 0):
                raise DomainError("normal term variances must be positive")
        for _, a, b in self.ig_terms:
            if a <= 0 or b <= 0:
                raise DomainError("inverse-gamma terms need positive shape and rate")
        super().__init__(self._eval, 3, label or "regression kernel", support_check=lambda th: th[:, 2] > 0)

    def log_likelihood(self, theta):
        theta = np.atleast_2d(theta)
        s2 = theta[:, 2]
        ssr = self.data.ssr(theta[:, 0], theta[:, 1])
        return -0.5 * self.data.n * (LOG_2PI + np.log(s2)) - 0.5 * ssr / s2

    def _eval(self, theta):
        out = np.zeros(theta.shape[0])
        if self.lik_weight:
            out += self.lik_weight * self.log_likelihood(theta)
        ab = theta[:, :2]
        for w, m, v in self.normal_terms:
            out += w * (-0.5 * np.sum(LOG_2PI + np.log(v)) - 0.5 * np.sum((ab - m) ** 2 / v, axis=1))
        s2 = theta[:, 2]
        for w, a, b in self.ig_terms:
            out += w * (a * np.log(b) - gammaln(a) - (a + 1.0) * np.log(s2) - b / s2)
        return out

    def weighted(self, w: float) -> "RegressionKernel":
        w = float(w)
        return RegressionKernel(
            self.data,
            w * self.lik_weight,
            [(w * wn, m, v) for wn, m, v in self.normal_terms],
            [(w * wi, a, b) for wi, a, b in self.ig_terms],
            self.label,
        )

    def combined(self, other: "RegressionKernel") -> "RegressionKernel":
        if not isinstance(other, RegressionKernel):
            raise TypeError("can only combine regression kernels")
        if not self.data.same_as(other.data):
            raise TypeError("kernels refer to different datasets")
        return RegressionKernel(
            self.data,
            self.lik_weight + other.lik_weight,
            self.normal_terms + other.normal_terms,
            self.ig_terms + other.ig_terms,
            f"{self.label} * {other.label}",
        )

    def conditionals(self):
        """Coefficients of the full conditionals.

        Returns ``(w_lik, a_prec, a_num, b_prec, b_num, shape, rate0)`` so that
        ``alpha | sigma2`` is normal with precision ``w_lik*n/sigma2 + a_prec``
        and mean ``(w_lik*sum_y/sigma2 + a_num) / precision`` (likewise for
        beta with ``sxx``/``sxy``), and ``sigma2 | alpha, beta`` is
        inverse-gamma with the returned shape and rate ``rate0 + w_lik*SSR/2``.
        """
        a_prec = sum(w / v[0] for w, _, v in self.normal_terms)
        a_num = sum(w * m[0] / v[0] for w, m, v in self.normal_terms)
        b_prec = sum(w / v[1] for w, _, v in self.normal_terms)
        b_num = sum(w * m[1] / v[1] for w, m, v in self.normal_terms)
        shape = sum(w * (a + 1.0) for w, a, _ in self.ig_terms) - 1.0 + 0.5 * self.lik_weight * self.data.n
        rate0 = sum(w * b for w, _, b in self.ig_terms)
        wl = self.lik_weight
        if shape <= 0 or (rate0 <= 0 and wl <= 0):
            raise DomainError("sigma2 full conditional is improper for this kernel")
        if (a_prec <= 0 or b_prec <= 0) and wl <= 0:
            raise DomainError("(alpha, beta) full conditional is improper for this kernel")
        return wl, a_prec, a_num, b_prec, b_num, shape, rate0


class RegressionModel:
    """Regression likelihood with independent normal priors on (alpha, beta) and IG on sigma2."""

    dim = 3

    def __init__(self, data: RegressionData, prior_mean, prior_var, prior_shape, prior_rate, label="regression"):
        prior_mean = np.asarray(prior_mean, dtype=float)
        prior_var = np.asarray(prior_var, dtype=float)
        if prior_mean.shape != (2,) or prior_var.shape != (2,):
            raise DomainError("prior mean and variance must be 2-vectors")
        if np.any(prior_var <= 0) or prior_shape <= 0 or prior_rate <= 0:
            raise DomainError("prior variances and inverse-gamma hyperparameters must be positive")
        self.data = data
        self.prior_mean = prior_mean
        self.prior_var = prior_var
        self.prior_shape = float(prior_shape)
        self.prior_rate = float(prior_rate)
        self.label = label
        self.log_prior = RegressionKernel(
            data, 0.0, [(1.0, prior_mean, prior_var)], [(1.0, prior_shape, prior_rate)], f"prior[{label}]"
        )
        self.likelihood = RegressionKernel(data, 1.0, label=f"lik[{label}]")

    @classmethod
    def from_scheme(cls, data: RegressionData, scheme: str | PriorScheme, label=None):
        if isinstance(scheme, str):
            key = scheme.lower()
            if key not in PINE_PRIORS:
                raise ConfigurationError(f"unknown prior scheme {scheme!r}; known: {sorted(PINE_PRIORS)}")
            label = label or key
            scheme = PINE_PRIORS[key]
        return cls(data, scheme.mean, scheme.var, scheme.shape, scheme.rate, label or "regression")

    def log_likelihood(self, theta):
        return self.likelihood.log_likelihood(theta)

    def posterior_density(self) -> RegressionKernel:
        return self.likelihood.combined(self.log_prior)

    def prior_density(self) -> RegressionKernel:
        return self.log_prior

    def default_init(self) -> np.ndarray:
        return self.data.ols()

    def positive_coordinates(self):
        return (2,)

    def importance_from_moments(self, mean, var) -> RegressionKernel:
        """Normal on (alpha, beta) and inverse-gamma on sigma2 with the given moments."""
        mean = np.asarray(mean, dtype=float)
        var = np.asarray(var, dtype=float)
        if np.any(var <= 0):
            raise DomainError("importance density needs positive variances")
        shape = mean[2] ** 2 / var[2] + 2.0
        rate = mean[2] * (shape - 1.0)
        return RegressionKernel(
            self.data, 0.0, [(1.0, mean[:2], var[:2])], [(1.0, shape, rate)], f"g[{self.label}]"
        )

    def tempered_posterior(self, t: float) -> RegressionKernel:
        """``f(y|theta)^t * prior(theta)``."""
        return self.likelihood.weighted(t).combined(self.log_prior)


def regression_log_marginal(model: RegressionModel, n_grid: int = 20001, span=(1e-3, 1e3)) -> float:
    """Log marginal likelihood by integrating (alpha, beta) analytically and log(sigma2) by quadrature.

    Given sigma2 the data are Gaussian with covariance ``sigma2*I + X V X'``;
    the remaining one-dimensional integral runs over ``log(sigma2)`` on a grid
    spanning ``span`` times the OLS residual variance.
    """
    d = model.data
    s2_hat = d.ols()[2]
    grid = np.linspace(np.log(s2_hat * span[0]), np.log(s2_hat * span[1]), n_grid)
    va, vb = model.prior_var
    r = d.y - model.prior_mean[0] - model.prior_mean[1] * d.xc
    # X V X' = va * 11' + vb * xc xc'; use the 2x2 Woodbury form for det and quadratic form.
    X = np.column_stack([np.ones(d.n), d.xc])
    XtX = X.T @ X
    Xtr = X.T @ r
    rr = r @ r
    Vinv = np.diag([1.0 / va, 1.0 / vb])
    out = np.empty_like(grid)
    for k, ls in enumerate(grid):
        s2 = np.exp(ls)
        A = Vinv + XtX / s2
        sign, logdet_a = np.linalg.slogdet(A)
        quad = rr / s2 - Xtr @ np.linalg.solve(A, Xtr) / s2**2
        logdet_c = d.n * ls + logdet_a + np.log(va) + np.log(vb)
        loglik = -0.5 * (d.n * LOG_2PI + logdet_c + quad)
        logprior = (
            model.prior_shape * np.log(model.prior_rate)
            - gammaln(model.prior_shape)
            - (model.prior_shape + 1.0) * ls
            - model.prior_rate / s2
        )
        out[k] = loglik + logprior + ls
    if out[0] > out.max() - 30 or out[-1] > out.max() - 30:
        raise DomainError("quadrature grid does not contain the sigma2 mass")
    step = grid[1] - grid[0]
    weights = np.full(n_grid, step)
    weights[[0, -1]] *= 0.5
    return float(logsumexp(out, b=weights))

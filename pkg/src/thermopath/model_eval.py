"""Marginal likelihoods and Bayes factors from tempered ladders.

Every route builds a path, runs one ladder and aggregates it by TI, SS or
both over the same samples:

* ``marginal_pp``: prior to unnormalized posterior.
* ``marginal_ip``: proper importance density to unnormalized posterior.
* ``bayes_factor_ms``: posterior of model 0 to posterior of model 1.
* ``bayes_factor_quadrivial``: hyper-path between the two models' nested
  PP or IP paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .batching import BatchSpec, EstimateWithError
from .densities import GeometricPath, LogDensity, LOG_2PI, QuadrivialPath, mvn_log_density, product_density
from .errors import ConfigurationError, DomainError
from .estimators_ss import ss_estimate, stepping_stone
from .estimators_ti import ti_estimate
from .sampler import ChainConfig, ChainOutput, LadderOutput, run_ladder
from .schedules import TemperatureSchedule

METHODS = ("ti", "ss", "both")


class BayesModel:
    """Likelihood plus proper prior on a ``dim``-dimensional parameter.

    ``log_likelihood`` maps an ``(m, dim)`` array to ``(m,)`` values.
    ``positive`` lists coordinates constrained to be positive; they are
    sampled on the log scale and matched by log-normal importance densities.
    """

    def __init__(
        self,
        log_likelihood: Callable,
        log_prior: LogDensity,
        label: str = "model",
        init=None,
        positive: Sequence[int] = (),
    ):
        self.dim = log_prior.dim
        self.label = label
        self.log_prior = log_prior
        self.likelihood = LogDensity(log_likelihood, self.dim, f"lik[{label}]", vectorized=True)
        self._init = None if init is None else np.asarray(init, dtype=float)
        self._positive = tuple(int(i) for i in positive)

    def log_likelihood(self, theta):
        return self.likelihood(theta)

    def posterior_density(self) -> LogDensity:
        lik, prior = self.likelihood, self.log_prior

        def fn(th):
            # the likelihood is only evaluated inside the prior's support
            out = prior(th)
            ok = np.isfinite(out)
            if ok.any():
                out[ok] += lik(th[ok])
            return out

        return LogDensity(fn, self.dim, f"post[{self.label}]")

    def prior_density(self) -> LogDensity:
        return self.log_prior

    def default_init(self) -> np.ndarray:
        if self._init is not None:
            return self._init
        init = np.zeros(self.dim)
        init[list(self._positive)] = 1.0
        return init

    def positive_coordinates(self):
        return self._positive


def normal_mean_model(y, noise_var: float, prior_mean: float, prior_var: float, label: str = "normal_mean") -> BayesModel:
    """``y_i ~ N(theta, noise_var)`` with a ``N(prior_mean, prior_var)`` prior on theta."""
    y = np.asarray(y, dtype=float)
    if noise_var <= 0 or prior_var <= 0:
        raise DomainError("variances must be positive")
    n, sy, syy = y.size, y.sum(), np.sum(y**2)
    const = -0.5 * n * np.log(2 * np.pi * noise_var)

    def loglik(th):
        m = th[:, 0]
        return const - 0.5 * (syy - 2.0 * m * sy + n * m**2) / noise_var

    return BayesModel(loglik, mvn_log_density([prior_mean], [prior_var], label=f"prior[{label}]"), label,
                      init=[float(y.mean())])


@dataclass
class ImportanceDensity:
    """Proper, normalized density moment-matched to posterior draws."""

    density: LogDensity
    mean: np.ndarray
    var: np.ndarray
    family: str
    positive: tuple = ()

    @property
    def dim(self) -> int:
        return self.density.dim

    def __call__(self, theta):
        return self.density(theta)


def _lognormal_normal_density(mean, var, positive, label):
    """Independent normals, log-normal on ``positive`` coordinates (Jacobian included)."""
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    pos = np.zeros(mean.size, dtype=bool)
    pos[list(positive)] = True
    const = -0.5 * np.sum(LOG_2PI + np.log(var))

    def fn(th):
        x = np.array(th, dtype=float, copy=True)
        jac = 0.0
        if pos.any():
            x[:, pos] = np.log(x[:, pos])
            jac = x[:, pos].sum(axis=1)
        return const - 0.5 * np.sum((x - mean) ** 2 / var, axis=1) - jac

    support = (lambda th: np.all(th[:, pos] > 0, axis=1)) if pos.any() else None
    return LogDensity(fn, mean.size, label, support_check=support)


def build_importance(posterior_chain: ChainOutput, model=None, positive: Optional[Sequence[int]] = None,
                     min_samples: int = 100) -> ImportanceDensity:
    """Moment-matched importance density from draws at t = 1.

    For regression models the positive coordinate gets an inverse-gamma
    matched to its mean and variance, which keeps every path in the
    Gibbs-sampleable family.  Otherwise unconstrained coordinates get
    normals and positive ones log-normals.
    """
    if posterior_chain.t != 1.0:
        raise DomainError(f"importance densities are built from the chain at t=1, got t={posterior_chain.t}")
    x = np.asarray(posterior_chain.samples, dtype=float)
    if x.shape[0] < min_samples:
        raise DomainError(f"need at least {min_samples} posterior draws, got {x.shape[0]}")
    if positive is None:
        positive = tuple(model.positive_coordinates()) if model is not None else ()
    label = f"g[{getattr(model, 'label', 'posterior')}]"
    if model is not None and hasattr(model, "importance_from_moments"):
        mean, var = x.mean(axis=0), x.var(axis=0, ddof=1)
        _check_variance(var)
        return ImportanceDensity(model.importance_from_moments(mean, var), mean, var, "normal-inverse-gamma",
                                 tuple(positive))
    if positive and np.any(x[:, list(positive)] <= 0):
        raise DomainError("positive coordinates hold non-positive draws")
    z = x.copy()
    if positive:
        z[:, list(positive)] = np.log(z[:, list(positive)])
    mean, var = z.mean(axis=0), z.var(axis=0, ddof=1)
    _check_variance(var)
    family = "lognormal" if positive else "normal"
    return ImportanceDensity(_lognormal_normal_density(mean, var, positive, label), mean, var, family,
                             tuple(positive))


def _check_variance(var):
    if np.any(~(var > 0)):
        bad = np.flatnonzero(~(var > 0)).tolist()
        raise DomainError(f"degenerate importance density: zero sample variance in coordinates {bad}")


def _density(obj) -> LogDensity:
    return obj.density if isinstance(obj, ImportanceDensity) else obj


@dataclass
class RouteResult:
    """Estimates from one ladder; ``ti``/``ss`` are None when not requested."""

    route: str
    ti: Optional[EstimateWithError]
    ss: Optional[EstimateWithError]
    ladder: LadderOutput = field(repr=False)
    warnings: list = field(default_factory=list)

    @property
    def estimate(self) -> EstimateWithError:
        """The single requested estimate (TI when both were run)."""
        return self.ti if self.ti is not None else self.ss

    def estimates(self) -> dict:
        return {k: v for k, v in (("ti", self.ti), ("ss", self.ss)) if v is not None}


def _sampler_config(cfg: ChainConfig, positive) -> ChainConfig:
    if positive and not cfg.log_scale:
        return replace(cfg, log_scale=tuple(positive))
    return cfg


def _run_route(route, path, schedule, cfg, method, spec, workers, init=None, positive=()) -> RouteResult:
    if method not in METHODS:
        raise ConfigurationError(f"method must be one of {METHODS}, got {method!r}")
    ladder = run_ladder(path, schedule, _sampler_config(cfg, positive), init=init, workers=workers)
    return _aggregate(route, ladder, method, spec)


def _aggregate(route, ladder, method, spec) -> RouteResult:
    ti = ti_estimate(ladder, spec) if method in ("ti", "both") else None
    ss = ss_estimate(ladder, spec) if method in ("ss", "both") else None
    return RouteResult(route, ti, ss, ladder)


def pp_path(model) -> GeometricPath:
    return GeometricPath(model.prior_density(), model.posterior_density())


def ip_path(model, g) -> GeometricPath:
    return GeometricPath(_density(g), model.posterior_density())


def marginal_pp(model, schedule: TemperatureSchedule, cfg: ChainConfig = ChainConfig(), method: str = "both",
                spec: BatchSpec = BatchSpec(), workers: int = 1) -> RouteResult:
    """log marginal likelihood along the prior-posterior path (U = log-likelihood)."""
    return _run_route("pp", pp_path(model), schedule, cfg, method, spec, workers,
                      init=model.default_init(), positive=model.positive_coordinates())


def marginal_ip(model, g, schedule: TemperatureSchedule, cfg: ChainConfig = ChainConfig(), method: str = "both",
                spec: BatchSpec = BatchSpec(), workers: int = 1, ess_floor: float = 0.05) -> RouteResult:
    """log marginal likelihood along the importance-posterior path.

    Panels whose stepping-stone weights keep less than ``ess_floor`` of the
    samples are reported in ``warnings``; this happens when ``g`` has
    thinner tails than the posterior.
    """
    res = _run_route("ip", ip_path(model, g), schedule, cfg, method, spec, workers,
                     init=model.default_init(), positive=model.positive_coordinates())
    ss = stepping_stone(res.ladder)
    r = res.ladder.min_length
    for lo, hi, e in zip(ss.t_lo, ss.t_hi, ss.ess_per_step):
        if e < ess_floor * r:
            res.warnings.append(f"weight ESS collapse on panel [{lo:.4g}, {hi:.4g}]: {e:.1f} of {r}")
    return res


def _joint_blocks(model1, model0, pseudo_priors, importance):
    """Pseudo-priors ``(for theta_1 at t=0, for theta_0 at t=1)`` and index blocks."""
    d1, d0 = model1.dim, model0.dim
    if pseudo_priors is None:
        if importance is None:
            raise ConfigurationError(
                "models have different parameter blocks: supply pseudo_priors or importance densities"
            )
        pseudo_priors = importance
    p1, p0 = (_density(p) for p in pseudo_priors)
    if p1.dim != d1 or p0.dim != d0:
        raise ConfigurationError("pseudo-prior dimensions do not match the model blocks")
    return p1, p0, np.arange(d1), np.arange(d1, d1 + d0)


def _same_block(model1, model0, pseudo_priors) -> bool:
    return model1.dim == model0.dim and pseudo_priors is None


def _joint_init(model1, model0):
    return np.concatenate([model1.default_init(), model0.default_init()])


def _joint_positive(model1, model0):
    return tuple(model1.positive_coordinates()) + tuple(model1.dim + i for i in model0.positive_coordinates())


def bayes_factor_ms(model1, model0, schedule: TemperatureSchedule, cfg: ChainConfig = ChainConfig(),
                    method: str = "both", pseudo_priors=None, importance=None, spec: BatchSpec = BatchSpec(),
                    workers: int = 1) -> RouteResult:
    """log BF_10 along the model-switch path between the two unnormalized posteriors.

    Models on the same parameter block share theta.  Otherwise theta is
    the concatenation ``(theta_1, theta_0)`` and each inactive block is
    carried by a pseudo-prior; ``importance`` (``(g1, g0)``) is used when no
    pseudo-priors are given.
    """
    if _same_block(model1, model0, pseudo_priors):
        path = GeometricPath(model0.posterior_density(), model1.posterior_density())
        return _run_route("ms", path, schedule, cfg, method, spec, workers,
                          init=model1.default_init(), positive=model1.positive_coordinates())
    p1, p0, b1, b0 = _joint_blocks(model1, model0, pseudo_priors, importance)
    path = GeometricPath(
        product_density([(model0.posterior_density(), b0), (p1, b1)]),
        product_density([(model1.posterior_density(), b1), (p0, b0)]),
    )
    return _run_route("ms", path, schedule, cfg, method, spec, workers,
                      init=_joint_init(model1, model0), positive=_joint_positive(model1, model0))


def quadrivial_path(model1, model0, nested: str = "ip", g1=None, g0=None, pseudo_priors=None,
                    importance=None) -> QuadrivialPath:
    """Four-endpoint path; equals model 1's posterior at t=1 and model 0's at t=0."""
    if nested == "ip":
        if g1 is None or g0 is None:
            raise ConfigurationError("nested IP paths need importance densities g1 and g0")
        ref1, ref0 = _density(g1), _density(g0)
    elif nested == "pp":
        ref1, ref0 = model1.prior_density(), model0.prior_density()
    else:
        raise ConfigurationError(f"nested must be 'pp' or 'ip', got {nested!r}")
    if _same_block(model1, model0, pseudo_priors):
        return QuadrivialPath(model1.posterior_density(), ref1, ref0, model0.posterior_density())
    if importance is None and g1 is not None and g0 is not None:
        importance = (g1, g0)
    p1, p0, b1, b0 = _joint_blocks(model1, model0, pseudo_priors, importance)
    return QuadrivialPath(
        product_density([(model1.posterior_density(), b1), (p0, b0)]),
        product_density([(ref1, b1), (p0, b0)]),
        product_density([(p1, b1), (ref0, b0)]),
        product_density([(p1, b1), (model0.posterior_density(), b0)]),
    )


def bayes_factor_quadrivial(model1, model0, schedule: TemperatureSchedule, cfg: ChainConfig = ChainConfig(),
                            method: str = "both", nested: str = "ip", g1=None, g0=None, pseudo_priors=None,
                            spec: BatchSpec = BatchSpec(), workers: int = 1) -> RouteResult:
    """log BF_10 along the quadrivial path; SS uses the exact midpoint increment per panel."""
    path = quadrivial_path(model1, model0, nested, g1, g0, pseudo_priors)
    if _same_block(model1, model0, pseudo_priors):
        init, positive = model1.default_init(), model1.positive_coordinates()
    else:
        init, positive = _joint_init(model1, model0), _joint_positive(model1, model0)
    return _run_route(f"q{nested}", path, schedule, cfg, method, spec, workers, init=init, positive=positive)


def bayes_factor_separate(res1: RouteResult, res0: RouteResult) -> dict:
    """Difference of two marginal-likelihood runs; MCEs combine in quadrature."""
    out = {}
    for key, a in res1.estimates().items():
        b = res0.estimates().get(key)
        if b is None:
            continue
        n = min(a.n_batches, b.n_batches)
        vals = a.batch_values[:n] - b.batch_values[:n]
        out[key] = EstimateWithError(a.value - b.value, float(np.hypot(a.mce, b.mce)), vals, n)
    return out

"""Per-temperature MCMC: random-walk Metropolis, conjugate Gibbs, and ladders.

Chains at different temperatures are independent.  Each chain draws its
random numbers from its own generator, seeded by mixing the base seed with
the chain's index, and consumes them in fixed-size chunks.  Several chains
can therefore be advanced in lock-step (vectorized over chains) or split
across worker threads without changing a single bit of any chain's output.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .densities import GeometricPath, QuadrivialPath, TemperedTarget, as_param_vector, check_t
from .errors import ChainError, DomainError, SupportError, ThermopathError
from .regression import RegressionKernel, RegressionModel
from .schedules import TemperatureSchedule

logger = logging.getLogger(__name__)

_CHUNK = 1024

# Stream tags mixed into per-chain seeds.
LADDER_STREAM = 0
EXTRA_STREAM = 1
PILOT_STREAM = 2


def derive_seed(base_seed: int, stream: int, index: int) -> int:
    """Deterministic 64-bit seed for chain ``index`` of ``stream``."""
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, int(stream), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 25_000
    burn_in: int = 5_000
    thin: int = 1
    seed: int = 0
    step_scale: Optional[tuple] = None
    adapt: bool = True
    log_scale: tuple = ()
    pilot_iterations: int = 300
    warm_start: bool = True

    def __post_init__(self):
        if self.iterations < 1 or self.thin < 1:
            raise DomainError("iterations and thin must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise DomainError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.retained < 2:
            raise DomainError("chain configuration retains fewer than 2 samples")
        if self.step_scale is not None and any(s <= 0 for s in self.step_scale):
            raise DomainError("step scales must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    @property
    def retained(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))


@dataclass
class ChainOutput:
    t: float
    samples: np.ndarray
    u_values: np.ndarray
    acceptance_rate: float
    seed_used: int

    def __post_init__(self):
        if len(self.samples) != len(self.u_values):
            raise DomainError("samples and u_values must have equal length")

    def __len__(self):
        return len(self.u_values)

    def sliced(self, sl: slice) -> "ChainOutput":
        return ChainOutput(self.t, self.samples[sl], self.u_values[sl], self.acceptance_rate, self.seed_used)


@dataclass
class LadderOutput:
    schedule: TemperatureSchedule
    chains: list
    path: object = None
    extra_runs: int = 0

    def __post_init__(self):
        ts = [c.t for c in self.chains]
        if ts != list(self.schedule.points):
            raise DomainError("ladder chains must match the schedule points one-to-one and in order")

    def chain_at(self, t: float) -> ChainOutput:
        for c in self.chains:
            if c.t == t:
                return c
        raise KeyError(t)

    def has(self, t: float) -> bool:
        return any(c.t == t for c in self.chains)

    @property
    def min_length(self) -> int:
        return min(len(c) for c in self.chains)

    def merged(self, extra: Sequence[ChainOutput]) -> "LadderOutput":
        """New ladder with ``extra`` chains inserted at their temperatures."""
        by_t = {c.t: c for c in self.chains}
        for c in extra:
            by_t[c.t] = c
        ts = sorted(by_t)
        kind = self.schedule.kind if len(ts) == len(self.chains) else "refined"
        return LadderOutput(
            TemperatureSchedule(tuple(ts), kind),
            [by_t[t] for t in ts],
            self.path,
            self.extra_runs + len(ts) - len(self.chains),
        )

    def sliced(self, sl: slice) -> "LadderOutput":
        return LadderOutput(self.schedule, [c.sliced(sl) for c in self.chains], self.path, self.extra_runs)


# --------------------------------------------------------------------------
# random-walk Metropolis
# --------------------------------------------------------------------------


def _to_unconstrained(theta, log_idx):
    phi = np.array(theta, dtype=float, copy=True)
    if log_idx:
        phi[..., log_idx] = np.log(phi[..., log_idx])
    return phi


def _to_constrained(phi, log_idx):
    theta = np.array(phi, dtype=float, copy=True)
    if log_idx:
        theta[..., log_idx] = np.exp(theta[..., log_idx])
    return theta


def _rwm_block(path, ts, inits, seeds, cfg: ChainConfig, iterations=None, burn_in=None, thin=None):
    """Advance ``len(ts)`` independent RWM chains in lock-step.

    Returns retained samples ``(m, R, d)``, acceptance rates ``(m,)`` and
    final states ``(m, d)``.
    """
    iterations = cfg.iterations if iterations is None else iterations
    burn_in = cfg.burn_in if burn_in is None else burn_in
    thin = cfg.thin if thin is None else thin
    ts = np.asarray(ts, dtype=float)
    m = ts.size
    d = path.dim
    log_idx = list(cfg.log_scale)
    rngs = [np.random.default_rng(s) for s in seeds]

    def log_target(phi):
        theta = _to_constrained(phi, log_idx)
        lp = path.log_q(theta, ts)
        if log_idx:
            lp = lp + phi[:, log_idx].sum(axis=1)
        return lp

    phi = _to_unconstrained(np.asarray(inits, dtype=float).reshape(m, d), log_idx)
    lp = log_target(phi)
    if np.any(~np.isfinite(lp)):
        bad = int(np.flatnonzero(~np.isfinite(lp))[0])
        raise SupportError(
            f"initial state {inits[bad]} is outside the support of the target at t={ts[bad]}",
            theta=inits[bad],
        )

    base = np.ones(d) if cfg.step_scale is None else np.broadcast_to(np.asarray(cfg.step_scale, float), (d,))
    scale = np.tile(base, (m, 1))
    log_factor = np.full(m, np.log(2.38 / np.sqrt(d)))
    target_rate = 0.44 if d == 1 else 0.234
    adapt = cfg.adapt and burn_in > 0
    q_lo, q_hi = burn_in // 4, burn_in // 2
    acc_sum = np.zeros(m)
    acc_n = 0
    mom1 = np.zeros((m, d))
    mom2 = np.zeros((m, d))
    n_mom = 0

    keep = np.zeros(iterations, dtype=bool)
    keep[burn_in::thin] = True
    out = np.empty((m, int(keep.sum()), d))
    r = 0
    for start in range(0, iterations, _CHUNK):
        stop = min(start + _CHUNK, iterations)
        size = stop - start
        z = np.empty((size, m, d))
        logu = np.empty((size, m))
        for j, rng in enumerate(rngs):
            z[:, j, :] = rng.standard_normal((size, d))
            logu[:, j] = np.log(rng.random(size))
        for k in range(size):
            it = start + k
            prop = phi + (np.exp(log_factor)[:, None] * scale) * z[k]
            lp_prop = log_target(prop)
            accept = logu[k] < lp_prop - lp
            phi = np.where(accept[:, None], prop, phi)
            lp = np.where(accept, lp_prop, lp)
            if it < burn_in:
                if adapt:
                    log_factor += (accept - target_rate) / (it + 1.0) ** 0.6
                    if q_lo <= it < q_hi:
                        mom1 += phi
                        mom2 += phi**2
                        n_mom += 1
                    elif it == q_hi and n_mom > 10:
                        sd = np.sqrt(np.maximum(mom2 / n_mom - (mom1 / n_mom) ** 2, 0.0))
                        ok = np.all(sd > 0, axis=1)
                        scale[ok] = sd[ok]
                        log_factor[ok] = np.log(2.38 / np.sqrt(d))
            else:
                acc_sum += accept
                acc_n += 1
            if keep[it]:
                out[:, r, :] = phi
                r += 1
    rates = acc_sum / acc_n if acc_n else np.zeros(m)
    return _to_constrained(out, log_idx), rates, _to_constrained(phi, log_idx)


def rwm_chain(target: TemperedTarget, init, cfg: ChainConfig, seed: Optional[int] = None) -> ChainOutput:
    """Single random-walk Metropolis chain on a tempered target."""
    init = as_param_vector(init)
    seed = cfg.seed if seed is None else seed
    samples, rates, _ = _rwm_block(target.path, [target.t], init[None, :], [seed], cfg)
    u = np.asarray(target.path.u(samples[0], target.t), dtype=float)
    return ChainOutput(float(target.t), samples[0], u, float(rates[0]), int(seed))


# --------------------------------------------------------------------------
# conjugate Gibbs for the regression kernel family
# --------------------------------------------------------------------------


def _gibbs_block(kernels: Sequence[RegressionKernel], seeds, cfg: ChainConfig, init=None):
    data = kernels[0].data
    m = len(kernels)
    coef = np.array([k.conditionals() for k in kernels])
    wl, a_prec0, a_num0, b_prec0, b_num0, shape, rate0 = coef.T
    rngs = [np.random.default_rng(s) for s in seeds]
    s2 = np.full(m, data.ols()[2] if init is None else float(init[2]))
    keep = np.zeros(cfg.iterations, dtype=bool)
    keep[cfg.burn_in :: cfg.thin] = True
    out = np.empty((m, int(keep.sum()), 3))
    r = 0
    for start in range(0, cfg.iterations, _CHUNK):
        stop = min(start + _CHUNK, cfg.iterations)
        size = stop - start
        z = np.empty((size, m, 2))
        g = np.empty((size, m))
        for j, rng in enumerate(rngs):
            z[:, j, :] = rng.standard_normal((size, 2))
            g[:, j] = rng.standard_gamma(shape[j], size)
        for k in range(size):
            a_prec = wl * data.n / s2 + a_prec0
            alpha = (wl * data.sum_y / s2 + a_num0) / a_prec + z[k, :, 0] / np.sqrt(a_prec)
            b_prec = wl * data.sxx / s2 + b_prec0
            beta = (wl * data.sxy / s2 + b_num0) / b_prec + z[k, :, 1] / np.sqrt(b_prec)
            rate = rate0 + 0.5 * wl * data.ssr(alpha, beta)
            s2 = rate / g[k]
            if keep[start + k]:
                out[:, r, 0] = alpha
                out[:, r, 1] = beta
                out[:, r, 2] = s2
                r += 1
    return out


def gibbs_regression_chain(model: RegressionModel, t: float, cfg: ChainConfig, seed: Optional[int] = None) -> ChainOutput:
    """Gibbs chain on ``f(y|theta)^t * prior``; ``u_values`` hold ``log f(y|theta)``."""
    check_t(t)
    seed = cfg.seed if seed is None else seed
    samples = _gibbs_block([model.tempered_posterior(t)], [seed], cfg)[0]
    return ChainOutput(float(t), samples, model.log_likelihood(samples), 1.0, int(seed))


# --------------------------------------------------------------------------
# ladders
# --------------------------------------------------------------------------


def prior_posterior_path(model) -> GeometricPath:
    return GeometricPath(model.prior_density(), model.posterior_density())


def _uses_gibbs(path, ts) -> bool:
    return all(isinstance(path.kernel_at(float(t)), RegressionKernel) for t in ts)


def _pilot_inits(path, ts, init, cfg: ChainConfig, stream_offset: int = 0):
    """Sequential warm start: chain i starts where a short pilot at t_{i-1} ended."""
    inits = np.empty((len(ts), path.dim))
    state = np.asarray(init, dtype=float)
    pilot_cfg = replace(cfg, iterations=cfg.pilot_iterations, burn_in=cfg.pilot_iterations - 2, thin=1)
    for i, t in enumerate(ts):
        inits[i] = state
        if i + 1 < len(ts):
            seed = derive_seed(cfg.seed, PILOT_STREAM, stream_offset + i)
            try:
                _, _, final = _rwm_block(path, [t], state[None, :], [seed], pilot_cfg)
            except ThermopathError as exc:
                raise ChainError(f"pilot run at t={t} failed: {exc}", t=float(t), seed=seed, cause=exc) from exc
            state = final[0]
    return inits


def run_chains(path, ts, inits, seeds, cfg: ChainConfig, workers: int = 1) -> list:
    """Run independent chains at temperatures ``ts``; output order follows ``ts``."""
    ts = [float(t) for t in ts]
    check_t(ts)
    gibbs = _uses_gibbs(path, ts)
    groups = np.array_split(np.arange(len(ts)), max(1, min(workers, len(ts))))

    def work(idx):
        idx = list(idx)
        if not idx:
            return []
        sub_t = [ts[i] for i in idx]
        sub_seeds = [seeds[i] for i in idx]
        try:
            if gibbs:
                samples = _gibbs_block([path.kernel_at(t) for t in sub_t], sub_seeds, cfg)
                rates = np.ones(len(idx))
            else:
                samples, rates, _ = _rwm_block(path, sub_t, inits[idx], sub_seeds, cfg)
        except ThermopathError as exc:
            if len(idx) > 1:
                # locate the failing temperature
                out = []
                for i in idx:
                    out.extend(work([i]))
                return out
            raise ChainError(f"chain at t={sub_t[0]} failed: {exc}", t=sub_t[0], seed=sub_seeds[0], cause=exc) from exc
        result = []
        for j, i in enumerate(idx):
            try:
                u = np.asarray(path.u(samples[j], ts[i]), dtype=float)
            except ThermopathError as exc:
                raise ChainError(f"U-statistic failed at t={ts[i]}: {exc}", t=ts[i], seed=seeds[i], cause=exc) from exc
            result.append(ChainOutput(ts[i], samples[j], u, float(rates[j]), int(seeds[i])))
        return result

    if len(groups) == 1:
        return work(groups[0])
    with ThreadPoolExecutor(max_workers=len(groups)) as pool:
        parts = list(pool.map(work, groups))
    return [c for part in parts for c in part]


def default_init(path_or_model):
    if hasattr(path_or_model, "default_init"):
        return np.asarray(path_or_model.default_init(), dtype=float)
    return np.zeros(path_or_model.dim)


def run_ladder(
    path_or_model,
    schedule: TemperatureSchedule,
    cfg: ChainConfig,
    init=None,
    workers: int = 1,
) -> LadderOutput:
    """One independent chain per schedule point.

    A regression model is run on its prior-posterior path.  Paths whose
    tempered targets stay in the regression kernel family are sampled by
    Gibbs; all others by random-walk Metropolis with warm-started chains.
    """
    if isinstance(path_or_model, (GeometricPath, QuadrivialPath)):
        path = path_or_model
    elif hasattr(path_or_model, "prior_density"):
        path = prior_posterior_path(path_or_model)
    else:
        raise DomainError(f"cannot build a path from {type(path_or_model).__name__}")
    ts = list(schedule.points)
    seeds = [derive_seed(cfg.seed, LADDER_STREAM, i) for i in range(len(ts))]
    inits = None
    if not _uses_gibbs(path, ts):
        start = default_init(path_or_model) if init is None else as_param_vector(init)
        if cfg.warm_start:
            inits = _pilot_inits(path, ts, start, cfg)
        else:
            inits = np.tile(start, (len(ts), 1))
    chains = run_chains(path, ts, inits, seeds, cfg, workers)
    return LadderOutput(schedule, chains, path)


def extend_ladder(ladder: LadderOutput, new_ts, cfg: ChainConfig, workers: int = 1) -> LadderOutput:
    """Add chains at new temperatures, seeded from the extra-run stream.

    The extra-run index continues from ``ladder.extra_runs`` so successive
    extensions never reuse a stream.
    """
    path = ladder.path
    new_ts = [float(t) for t in new_ts if not ladder.has(float(t))]
    if not new_ts:
        return ladder
    seeds = [derive_seed(cfg.seed, EXTRA_STREAM, ladder.extra_runs + k) for k in range(len(new_ts))]
    inits = None
    if not _uses_gibbs(path, new_ts):
        inits = np.empty((len(new_ts), path.dim))
        for k, t in enumerate(new_ts):
            below = [c for c in ladder.chains if c.t <= t]
            inits[k] = below[-1].samples[-1]
    return ladder.merged(run_chains(path, new_ts, inits, seeds, cfg, workers))

"""Thermodynamic-integration estimators and the divergences they yield.

The functional KL curve ``KL_t = E_t - log(lambda)`` integrates to zero over
[0, 1]; its partial integral up to ``t`` is ``log mu(t) = -C_t``, the
negative Chernoff t-divergence, and is smallest where ``KL_t`` changes sign.

Sign conventions (the values returned are all non-negative in exact
arithmetic):

* Chernoff information is ``-NTI(t*) = -min_t NTI(t)``.
* Tsallis relative entropy defaults to ``(1 - exp(-C_t)) / (1 - t)``; the
  literal ``(exp(-C_t) - 1) / (1 - t)`` is available with
  ``tsallis_convention="literal"``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .batching import BatchSpec, EstimateWithError, batch_values, chain_mean_se
from .errors import DegeneratePathError, DomainError
from .sampler import ChainConfig, LadderOutput, extend_ladder, run_ladder
from .schedules import TemperatureSchedule, refine_interval

logger = logging.getLogger(__name__)


@dataclass
class EtCurve:
    schedule: TemperatureSchedule
    e_hat: np.ndarray
    v_hat: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        if not (len(self.e_hat) == len(self.v_hat) == len(self.schedule)):
            raise DomainError("curve arrays must match the schedule length")
        if np.any(self.v_hat < 0):
            raise DomainError("local variances must be non-negative")

    @property
    def t(self) -> np.ndarray:
        return self.schedule.as_array()


@dataclass
class KlTCurve:
    schedule: TemperatureSchedule
    kl_t_hat: np.ndarray
    log_lambda_hat: float

    @property
    def t(self) -> np.ndarray:
        return self.schedule.as_array()


@dataclass
class DivergenceReport:
    kl_1_0: float
    kl_0_1: float
    j: float
    bhattacharyya: float
    hellinger: float
    chernoff_info: float
    t_star: float
    renyi_at_t_star: float
    tsallis_at_t_star: float
    errors: dict = field(default_factory=dict)

    FIELDS = (
        "kl_1_0",
        "kl_0_1",
        "j",
        "bhattacharyya",
        "hellinger",
        "chernoff_info",
        "renyi_at_t_star",
        "tsallis_at_t_star",
    )

    def to_dict(self) -> dict:
        out = {name: {"value": float(getattr(self, name)), "mce": float(self.errors.get(name, 0.0))} for name in self.FIELDS}
        out["t_star"] = float(self.t_star)
        return out


def e_hat_curve(ladder: LadderOutput) -> EtCurve:
    """Per-temperature sample mean and unbiased variance of the U-statistic."""
    e, v, r = [], [], []
    for chain in ladder.chains:
        if len(chain) < 2:
            raise DomainError(f"chain at t={chain.t} has fewer than 2 samples")
        e.append(float(np.mean(chain.u_values)))
        v.append(float(np.var(chain.u_values, ddof=1)))
        r.append(len(chain))
    return EtCurve(ladder.schedule, np.array(e), np.array(v), np.array(r))


def _trapezoid(t, y) -> float:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.sum(np.diff(t) * (y[1:] + y[:-1]) / 2.0))


def ti_trapezoid(curve: EtCurve) -> float:
    """Trapezoid rule over the schedule applied to the E-hat curve."""
    return _trapezoid(curve.t, curve.e_hat)


def kl_t_curve(curve: EtCurve, log_lambda_hat: float) -> KlTCurve:
    return KlTCurve(curve.schedule, curve.e_hat - log_lambda_hat, float(log_lambda_hat))


def nti_partial_sums(kl: KlTCurve) -> np.ndarray:
    """Cumulative trapezoid of KL-hat, one value per schedule point (starts at 0)."""
    t = kl.t
    panels = np.diff(t) * (kl.kl_t_hat[1:] + kl.kl_t_hat[:-1]) / 2.0
    return np.concatenate([[0.0], np.cumsum(panels)])


def nti_upto(kl: KlTCurve, t: float) -> float:
    """Trapezoid NTI over [0, t]; inside a panel KL-hat is interpolated linearly."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t must lie in [0, 1], got {t}")
    ts = kl.t
    partial = nti_partial_sums(kl)
    k = int(np.searchsorted(ts, t, side="right") - 1)
    k = min(k, len(ts) - 1)
    if ts[k] == t:
        return float(partial[k])
    kl_t = np.interp(t, ts, kl.kl_t_hat)
    return float(partial[k] + (t - ts[k]) * (kl.kl_t_hat[k] + kl_t) / 2.0)


def _resolve_log_lambda(sub: LadderOutput, log_lambda):
    if log_lambda is None or log_lambda == "ti":
        return ti_trapezoid(e_hat_curve(sub))
    if log_lambda == "ss":
        from .estimators_ss import stepping_stone

        return stepping_stone(sub).log_lambda_hat
    return float(log_lambda)


def ti_estimate(ladder: LadderOutput, spec: BatchSpec = BatchSpec()) -> EstimateWithError:
    """Batch-means TI estimate of log(lambda)."""
    return EstimateWithError.from_batches(batch_values(ladder, lambda sub: ti_trapezoid(e_hat_curve(sub)), spec))


def chernoff_t_divergence(
    ladder: LadderOutput, log_lambda_hat="ti", t: float = 0.5, spec: BatchSpec = BatchSpec()
) -> EstimateWithError:
    """``C_t = -NTI(t)`` with batch-means error.

    ``log_lambda_hat`` is either a fixed number or ``"ti"``/``"ss"`` to
    re-estimate it within every batch.
    """

    def est(sub):
        kl = kl_t_curve(e_hat_curve(sub), _resolve_log_lambda(sub, log_lambda_hat))
        return -nti_upto(kl, t)

    return EstimateWithError.from_batches(batch_values(ladder, est, spec))


def chernoff_information(
    ladder: LadderOutput, t_star: float, log_lambda_hat="ti", spec: BatchSpec = BatchSpec()
) -> EstimateWithError:
    """Chernoff information ``-NTI(t*)`` from a ladder refined around ``t*``."""
    ts = ladder.schedule.as_array()
    if not ts[0] <= t_star <= ts[-1]:
        raise DomainError(f"t* = {t_star} is not bracketed by the schedule")
    return chernoff_t_divergence(ladder, log_lambda_hat, t_star, spec)


@dataclass
class TStarResult:
    t_star: float
    ladder: LadderOutput
    log_lambda_hat: float
    lo: float
    hi: float
    extra_runs: int
    sign_risk: float
    warnings: list = field(default_factory=list)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def __iter__(self):
        return iter((self.t_star, self.ladder))


def _kl_at(ladder, t, log_lambda):
    chain = ladder.chain_at(t)
    return float(np.mean(chain.u_values)) - log_lambda, chain_mean_se(chain.u_values)


def estimate_t_star(
    path,
    schedule: TemperatureSchedule,
    cfg: ChainConfig,
    tol: float = 1e-3,
    ladder: LadderOutput | None = None,
    log_lambda_hat: float | None = None,
    workers: int = 1,
    max_extra_runs: int = 60,
    degenerate_atol: float = 1e-12,
) -> TStarResult:
    """Locate the sign change of KL-hat and refine it by extra MCMC runs.

    The bracketing interval is bisected (each midpoint is a new chain added
    to the ladder) until its width is at most ``tol``.  ``log_lambda_hat``
    defaults to the TI estimate on the initial schedule and stays fixed
    during refinement.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if ladder is None:
        ladder = run_ladder(path, schedule, cfg, workers=workers)
    curve = e_hat_curve(ladder)
    if log_lambda_hat is None:
        log_lambda_hat = ti_trapezoid(curve)
    kl = curve.e_hat - log_lambda_hat
    notes = []
    if np.all(curve.v_hat <= degenerate_atol) and np.all(np.abs(kl) <= 1e-9):
        raise DegeneratePathError("degenerate path: KL_t is identically zero, t* is undefined")
    if not (kl[0] < 0 < kl[-1]):
        raise DegeneratePathError(
            f"KL-hat does not change sign on [0, 1] (KL_0={kl[0]:.4g}, KL_1={kl[-1]:.4g})"
        )
    ts = curve.t
    se = np.array([chain_mean_se(c.u_values) for c in ladder.chains])
    drops = np.diff(kl) + 3.0 * np.hypot(se[:-1], se[1:])
    if np.any(drops < 0):
        notes.append("KL-hat is non-monotone beyond Monte Carlo noise")
    exact = np.flatnonzero(kl == 0.0)
    if exact.size:
        t0 = float(ts[exact[0]])
        return TStarResult(t0, ladder, log_lambda_hat, t0, t0, 0, 0.0, notes)
    t_minus = float(ts[kl < 0].max())
    t_plus = float(ts[kl > 0].min())
    if t_minus < t_plus:
        lo, hi = t_minus, t_plus
    else:
        between = (ts >= t_plus) & (ts <= t_minus)
        if np.any(np.abs(kl[between]) > 3.0 * se[between]):
            notes.append(f"sign pattern crosses more than once between {t_plus} and {t_minus}")
        # crossings inside noise: take the last upward one
        i = int(np.flatnonzero((kl[:-1] < 0) & (kl[1:] > 0))[-1])
        lo, hi = float(ts[i]), float(ts[i + 1])
    extra = 0
    while hi - lo > tol:
        if extra >= max_extra_runs:
            notes.append(f"stopped after {extra} extra runs with width {hi - lo:.3g}")
            break
        mid = 0.5 * (lo + hi)
        refine_interval(ladder.schedule, lo, hi, 2)  # validates adjacency
        ladder = extend_ladder(ladder, [mid], cfg, workers)
        extra += 1
        k_mid, _ = _kl_at(ladder, mid, log_lambda_hat)
        if k_mid < 0:
            lo = mid
        elif k_mid > 0:
            hi = mid
        else:
            lo = hi = mid
    risk = 0.0
    for t_b in (lo, hi):
        k_b, se = _kl_at(ladder, t_b, log_lambda_hat)
        if se > 0:
            risk += float(norm.cdf(-abs(k_b) / se))
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return TStarResult(0.5 * (lo + hi), ladder, float(log_lambda_hat), lo, hi, extra, risk, notes)


def _tsallis(c, t, convention):
    if convention == "literal":
        return (np.exp(-c) - 1.0) / (1.0 - t)
    if convention == "positive":
        return (1.0 - np.exp(-c)) / (1.0 - t)
    raise DomainError(f"unknown Tsallis convention {convention!r}")


def divergence_report(
    ladder: LadderOutput,
    log_lambda_hat="ti",
    t_star: float | None = None,
    spec: BatchSpec = BatchSpec(),
    tsallis_convention: str = "positive",
) -> DivergenceReport:
    """KL both ways, J, Bhattacharyya, Hellinger, Chernoff, Renyi and Tsallis at t*.

    Every entry is the batch mean of the full pipeline recomputed per batch,
    with the across-batch standard deviation as its error.
    """
    missing = [t for t in (0.0, 0.5, 1.0) if not ladder.has(t)]
    if missing:
        raise DomainError(f"ladder is missing required temperatures {missing}")
    if t_star is None:
        raise DomainError("t_star is required (see estimate_t_star)")
    if not 0.0 <= t_star < 1.0:
        raise DomainError("t_star must lie in [0, 1)")

    def pipeline(sub):
        curve = e_hat_curve(sub)
        ll = _resolve_log_lambda(sub, log_lambda_hat)
        kl = kl_t_curve(curve, ll)
        kl_1_0 = kl.kl_t_hat[-1]
        kl_0_1 = -kl.kl_t_hat[0]
        bh = -nti_upto(kl, 0.5)
        he = np.sqrt(max(0.0, 1.0 - np.exp(-bh)))
        c = -nti_upto(kl, t_star)
        return [
            kl_1_0,
            kl_0_1,
            kl_1_0 + kl_0_1,
            bh,
            he,
            c,
            c / (1.0 - t_star),
            _tsallis(c, t_star, tsallis_convention),
        ]

    vals = batch_values(ladder, pipeline, spec)
    means = vals.mean(axis=0)
    sds = vals.std(axis=0, ddof=1)
    names = DivergenceReport.FIELDS
    values = dict(zip(names, means))
    # J is rebuilt from its parts so the identity holds exactly.
    values["j"] = values["kl_1_0"] + values["kl_0_1"]
    return DivergenceReport(
        t_star=float(t_star),
        errors={n: float(s) for n, s in zip(names, sds)},
        **{n: float(v) for n, v in values.items()},
    )

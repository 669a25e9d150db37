"""Monte Carlo error, secant geometry and discretisation-error indicators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batching import BatchSpec, EstimateWithError, batch_means, batch_values, chain_mean_se
from .estimators_ss import stepping_stone
from .estimators_ti import EtCurve, _trapezoid, e_hat_curve, kl_t_curve
from .sampler import LadderOutput

__all__ = [
    "BatchSpec",
    "EstimateWithError",
    "GeometryReport",
    "batch_means",
    "batch_values",
    "chain_mean_se",
    "diagnose",
    "nti_residual",
    "secant_slopes",
]


@dataclass
class GeometryReport:
    t_lo: np.ndarray
    t_hi: np.ndarray
    slopes: np.ndarray
    j_proxies: np.ndarray
    v_hat: np.ndarray
    nti_residual: float = float("nan")

    def rows(self) -> list:
        return [
            {
                "t_lo": float(a),
                "t_hi": float(b),
                "slope": float(s),
                "j_proxy": float(j),
                "v_hat_lo": float(self.v_hat[i]),
                "v_hat_hi": float(self.v_hat[i + 1]),
            }
            for i, (a, b, s, j) in enumerate(zip(self.t_lo, self.t_hi, self.slopes, self.j_proxies))
        ]


def secant_slopes(curve: EtCurve) -> GeometryReport:
    """Secant slope of E-hat per panel and the J-divergence it implies between neighbours.

    As the panel shrinks the slope approaches the local variance, which is
    attached for comparison.
    """
    t = curve.t
    dt = np.diff(t)
    slopes = np.diff(curve.e_hat) / dt
    return GeometryReport(t[:-1], t[1:], slopes, slopes * dt**2, curve.v_hat.copy())


def nti_residual(curve: EtCurve, log_lambda_hat: float) -> float:
    """Trapezoid integral of KL-hat over [0, 1]; zero in exact arithmetic.

    With ``log_lambda_hat`` taken from the TI estimate on the same schedule
    this vanishes identically, so pass an independent estimate (the
    stepping-stone one, as :func:`diagnose` does).  The residual then equals
    TI minus that estimate.
    """
    kl = kl_t_curve(curve, log_lambda_hat)
    return _trapezoid(kl.t, kl.kl_t_hat)


@dataclass
class Diagnosis:
    geometry: GeometryReport
    residual: EstimateWithError
    flagged: bool
    verdict: str


def diagnose(ladder: LadderOutput, spec: BatchSpec = BatchSpec(), threshold: float = 3.0) -> Diagnosis:
    """Flag a schedule whose NTI residual exceeds ``threshold`` times its batch-means error."""
    curve = e_hat_curve(ladder)
    geo = secant_slopes(curve)

    def residual(sub):
        return nti_residual(e_hat_curve(sub), stepping_stone(sub).log_lambda_hat)

    res = EstimateWithError.from_batches(batch_values(ladder, residual, spec))
    geo.nti_residual = res.value
    flagged = abs(res.value) > threshold * res.mce
    if flagged:
        k = int(np.argmax(np.abs(geo.slopes)))
        verdict = (
            f"NTI residual {res.value:.4g} exceeds {threshold:g}x its MCE ({res.mce:.3g}): "
            f"schedule refinement recommended near t={0.5 * (geo.t_lo[k] + geo.t_hi[k]):.4g}"
        )
    else:
        verdict = f"NTI residual {res.value:.4g} within {threshold:g}x its MCE ({res.mce:.3g}): schedule adequate"
    return Diagnosis(geo, res, bool(flagged), verdict)

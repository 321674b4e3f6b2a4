"""Kaplan-Meier estimation and the log-log Weibull adequacy check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, NoEvents, TooFewPoints

Z95 = stats.norm.ppf(0.975)


@dataclass(frozen=True)
class KMCurve:
    """Product-limit estimate at the distinct event times.

    ``greenwood_var`` is the Greenwood variance of ``survival``. The
    confidence bounds are for the cumulative hazard, built symmetrically on
    the log cumulative hazard scale (NaN where the hazard is 0 or infinite).
    """

    times: np.ndarray
    n_risk: np.ndarray
    n_events: np.ndarray
    survival: np.ndarray
    greenwood_var: np.ndarray
    cumhaz: np.ndarray
    cumhaz_lower: np.ndarray
    cumhaz_upper: np.ndarray

    def __call__(self, t):
        """Right-continuous step function ``S(t)``."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        return np.concatenate([[1.0], self.survival])[idx]


def kaplan_meier(t, delta) -> KMCurve:
    t = np.asarray(t, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if t.shape != delta.shape or t.ndim != 1:
        raise DimensionMismatch("t and delta must be 1-d arrays of equal length")
    if not np.any(delta == 1):
        raise NoEvents("no observed events")
    times = np.unique(t[delta == 1])
    order = np.sort(t)
    n_risk = t.shape[0] - np.searchsorted(order, times, side="left")
    ev_sorted = np.sort(t[delta == 1])
    n_events = (np.searchsorted(ev_sorted, times, side="right")
                - np.searchsorted(ev_sorted, times, side="left"))
    surv = np.cumprod(1.0 - n_events / n_risk)
    with np.errstate(divide="ignore", invalid="ignore"):
        gw_terms = n_events / (n_risk * (n_risk - n_events))
        gw_sum = np.cumsum(gw_terms)
        var = surv ** 2 * gw_sum
        cumhaz = -np.log(surv)
        # var(H) = var(log S) ~ Greenwood sum; delta method to log H
        se_log_h = np.sqrt(gw_sum) / cumhaz
        ok = (cumhaz > 0) & np.isfinite(cumhaz) & np.isfinite(se_log_h)
        lower = np.where(ok, cumhaz * np.exp(-Z95 * se_log_h), np.nan)
        upper = np.where(ok, cumhaz * np.exp(Z95 * se_log_h), np.nan)
    var = np.where(surv == 0, 0.0, var)
    return KMCurve(times, n_risk, n_events, surv, var, cumhaz, lower, upper)


@dataclass(frozen=True)
class WeibullCheck:
    log_t: np.ndarray
    log_H: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    slope: float
    intercept: float
    r_squared: float

    columns = ("log_t", "log_H", "ci_lo", "ci_hi")

    def rows(self):
        return zip(self.log_t, self.log_H, self.ci_lo, self.ci_hi)


def weibull_check_points(curve: KMCurve) -> WeibullCheck:
    """Points ``(log t, log H(t))`` and their least-squares line.

    Under a Weibull model ``log H = log tau + gamma log t``, so the slope
    estimates the shape and the intercept the log scale. Points with
    ``S = 1`` or ``S = 0`` are dropped. CI columns are on the log H scale.
    """
    keep = (curve.survival > 0) & (curve.survival < 1)
    if np.count_nonzero(keep) < 2:
        raise TooFewPoints("need at least two points with 0 < S(t) < 1")
    log_t = np.log(curve.times[keep])
    log_h = np.log(curve.cumhaz[keep])
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.log(curve.cumhaz_lower[keep])
        hi = np.log(curve.cumhaz_upper[keep])
    if np.ptp(log_t) == 0:
        raise TooFewPoints("all retained points share one time")
    fit = stats.linregress(log_t, log_h)
    return WeibullCheck(log_t, log_h, lo, hi, float(fit.slope), float(fit.intercept),
                        float(fit.rvalue ** 2))

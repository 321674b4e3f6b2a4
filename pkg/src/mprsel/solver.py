"""Penalized Newton-Raphson fitting and sandwich inference."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .data import SurvivalDataset, ThetaVector, as_flat
from .errors import NonFiniteResult, SingularSystem
from .likelihood import LikelihoodWorkspace, loglik_value
from .penalties import (
    Family,
    LambdaVector,
    PenaltySpec,
    assemble_penalty_terms,
    penalty_value,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 100
    conv_tol: float = 1e-6
    max_step_halvings: int = 20
    ridge_boost: float = 1e-8
    ridge_max: float = 1e-2
    zero_tol: float = 1e-3

    def __post_init__(self):
        for name in ("max_iter", "conv_tol", "max_step_halvings", "ridge_boost", "zero_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class FitResult:
    theta_hat: ThetaVector
    converged: bool
    n_iter: int
    loglik: float
    penalized_loglik: float
    selected_mask: np.ndarray
    covariance: Optional[np.ndarray] = None
    effective_df: Optional[float] = None
    df_scale: Optional[float] = None
    df_shape: Optional[float] = None
    grad_norm: float = np.nan
    trace: list = field(default_factory=list)

    @property
    def std_errors(self) -> Optional[np.ndarray]:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


class _Objective:
    """Penalized log-likelihood with cached workspace at the current point."""

    def __init__(self, data, penalty, lambda_vec):
        self.data = data
        self.penalty = penalty
        self.lambda_vec = lambda_vec
        self.n = data.n

        self._lam = lambda_vec.flat
        self._active = penalty.family is not Family.NONE and bool(np.any(self._lam > 0))

    def value(self, flat):
        """Return ``(loglik, penalized loglik)``."""
        ll = loglik_value(flat, self.data)
        if not self._active:
            return ll, ll
        pen = float(np.sum(penalty_value(self.penalty.family, self._lam, flat, self.penalty)))
        return ll, ll - self.n * pen

    def evaluate(self, flat):
        ws = LikelihoodWorkspace.compute(flat, self.data)
        ll = ws.loglik(self.data)
        terms = assemble_penalty_terms(flat, self.lambda_vec, self.penalty)
        return ws, ll, terms, ll - self.n * terms.total

    def gradient_and_information(self, ws, terms):
        g = ws.score(self.data) - self.n * terms.v
        info0 = ws.information(self.data)
        info = info0.copy()
        idx = np.arange(info.shape[0])
        info[idx, idx] += self.n * terms.sigma
        return g, info, info0

    def iteration_matrix(self, flat, info0, terms):
        """``I_0 + n diag(P'(theta) / theta)``: a majorizer of the penalty curvature.

        Each penalty is a concave nondecreasing function of ``theta_j**2``, so
        the quadratic with curvature ``P'(theta_j) / theta_j`` lies above it
        and touches at ``theta_j``. Iterating with this matrix is a
        minorize-maximize scheme with the same fixed points as Newton, but
        it does not stall on coefficients shrinking toward zero, where the
        exact second derivative of the smoothed penalty is nearly zero.
        """
        if not self._active:
            return info0
        v = terms.v
        with np.errstate(divide="ignore", invalid="ignore"):
            curv = np.where(flat != 0.0, v / flat, terms.sigma)
        info = info0.copy()
        idx = np.arange(info.shape[0])
        info[idx, idx] += self.n * curv
        return info


def _line_search(obj, theta, d, value, max_halvings):
    """Largest step in ``{1, 1/2, ...}`` along ``d`` that does not decrease the
    penalized log-likelihood: ``(candidate, value)``, or None."""
    step = 1.0
    for _ in range(max_halvings + 1):
        cand = theta + step * d
        try:
            c_value = obj.value(cand)[1]
        except NonFiniteResult:
            c_value = -np.inf
        if c_value >= value:
            return cand, c_value
        step /= 2
    return None


def _newton_direction(H, g, config: SolverConfig):
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
        raise NonFiniteResult("non-finite gradient or information")
    eye = np.eye(H.shape[0])
    ridge = 0.0
    while True:
        try:
            c = sla.cho_factor(H + ridge * eye, check_finite=False)
            return sla.cho_solve(c, g, check_finite=False)
        except np.linalg.LinAlgError:
            ridge = config.ridge_boost if ridge == 0.0 else ridge * 10
            if ridge > config.ridge_max:
                break
    # indefinite (possible under SCAD): symmetric solve, else eigenvalue-modified Newton
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            d = sla.solve(H, g, assume_a="sym", check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("penalized information is singular") from exc
    if np.all(np.isfinite(d)) and d @ g > 0:
        return d
    w, V = np.linalg.eigh(H)
    w = np.maximum(np.abs(w), 1e-8 * np.max(np.abs(w)))
    return V @ ((V.T @ g) / w)


def _default_init(data: SurvivalDataset) -> np.ndarray:
    flat = np.zeros(data.n_params)
    flat[0] = np.log(np.sum(data.delta) / np.sum(data.t))
    return flat


def fit_penalized(data: SurvivalDataset, penalty: PenaltySpec, lambda_vec: LambdaVector,
                  init=None, config: SolverConfig = SolverConfig(),
                  inference: bool = True) -> FitResult:
    """Maximize the penalized log-likelihood by damped Newton-Raphson.

    Each iteration solves ``A d = score - n V`` and accepts the
    largest step ``s in {1, 1/2, 1/4, ...}`` that does not decrease the
    penalized log-likelihood. Iteration stops once the accepted step has
    sup-norm below ``config.conv_tol``. ``A`` is ``I_0`` plus the curvature
    of a quadratic majorizer of the penalty (see
    ``_Objective.iteration_matrix``); the exact ``I_lambda`` is used for the
    sandwich covariance and effective degrees of freedom.

    Non-convergence is reported through ``converged=False``; numerical
    failures raise ``SingularSystem`` or ``NonFiniteResult``.
    """
    obj = _Objective(data, penalty, lambda_vec)
    theta = _default_init(data) if init is None else as_flat(init).copy()
    ws, ll, terms, value = obj.evaluate(theta)
    trace = [value]
    converged = False
    n_iter = 0
    g = None
    for n_iter in range(1, config.max_iter + 1):
        g, H, info0 = obj.gradient_and_information(ws, terms)
        d = _newton_direction(obj.iteration_matrix(theta, info0, terms), g, config)
        # take the better of a damped majorizer step and a damped exact
        # Newton step: the former is robust far from the optimum, the latter
        # converges fast near it and walks onto kinks at zero
        best = _line_search(obj, theta, d, value, config.max_step_halvings)
        if obj._active:
            try:
                dn = _newton_direction(H, g, config)
            except SingularSystem:
                dn = None
            if dn is not None:
                newton = _line_search(obj, theta, dn, value, config.max_step_halvings)
                if best is None or (newton is not None and newton[1] > best[1]):
                    best = newton
        accepted = best is not None
        if accepted:
            cand, c_value = best
        if not accepted:
            # no ascent left at floating-point resolution
            converged = bool(np.max(np.abs(d)) < config.conv_tol)
            break
        delta = cand - theta
        theta, value = cand, c_value
        ws, ll, terms, _ = obj.evaluate(theta)
        trace.append(value)
        if np.max(np.abs(delta)) < config.conv_tol:
            converged = True
            break

    g, H, info0 = obj.gradient_and_information(ws, terms)
    kb = data.X.shape[1]
    theta_vec = ThetaVector.from_flat(theta, kb)
    result = FitResult(
        theta_hat=theta_vec,
        converged=converged,
        n_iter=n_iter,
        loglik=ll,
        penalized_loglik=value,
        selected_mask=np.abs(theta) >= config.zero_tol,
        grad_norm=float(np.max(np.abs(g))),
        trace=trace,
    )
    if not converged:
        logger.debug("Newton did not converge after %d iterations", n_iter)
    if inference:
        try:
            result.covariance = _sandwich(H, info0)
            result.effective_df, result.df_scale, result.df_shape = _effective_df(H, info0, kb)
        except SingularSystem:
            pass
    return result


def fit_unpenalized(data: SurvivalDataset, init=None,
                    config: SolverConfig = SolverConfig()) -> FitResult:
    """Maximum likelihood fit (no penalty).

    Starts from the exponential-model intercept ``log(sum(delta) / sum(t))``
    with every other coefficient zero unless ``init`` is given.
    """
    k = data.n_params
    lam = LambdaVector(np.zeros(data.X.shape[1]), np.zeros(k - data.X.shape[1]))
    return fit_penalized(data, PenaltySpec(Family.NONE), lam, init, config)


def information_pair(theta_hat, data: SurvivalDataset, penalty: PenaltySpec,
                     lambda_vec: LambdaVector):
    """Return ``(I_lambda, I_0)`` at ``theta_hat``."""
    obj = _Objective(data, penalty, lambda_vec)
    ws, _, terms, _ = obj.evaluate(as_flat(theta_hat))
    _, H, info0 = obj.gradient_and_information(ws, terms)
    return H, info0


def _inverse(H):
    if not np.all(np.isfinite(H)):
        raise NonFiniteResult("non-finite information matrix")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            inv = sla.inv(H, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("penalized information is singular") from exc
    if not np.all(np.isfinite(inv)):
        raise SingularSystem("penalized information is singular")
    return inv


def _sandwich(H, info0):
    inv = _inverse(H)
    cov = inv @ info0 @ inv
    return (cov + cov.T) / 2


def _effective_df(H, info0, kb):
    k = H.shape[0]
    if np.array_equal(H, info0):
        diag = np.ones(k)
    else:
        if not np.all(np.isfinite(H)):
            raise NonFiniteResult("non-finite information matrix")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                sol = sla.solve(H, info0, assume_a="sym", check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem("penalized information is singular") from exc
        diag = np.diag(sol)
    if not np.all(np.isfinite(diag)):
        raise SingularSystem("penalized information is singular")
    total = float(np.sum(diag))
    if total > k + 1e-8:
        logger.debug("effective df %.4f exceeds parameter count %d", total, k)
    return total, float(np.sum(diag[:kb])), float(np.sum(diag[kb:]))


def sandwich_covariance(theta_hat, data: SurvivalDataset, penalty: PenaltySpec,
                        lambda_vec: LambdaVector) -> np.ndarray:
    """``I_lambda^-1 I_0 I_lambda^-1``, symmetrized."""
    H, info0 = information_pair(theta_hat, data, penalty, lambda_vec)
    return _sandwich(H, info0)


def effective_df(theta_hat, data: SurvivalDataset, penalty: PenaltySpec,
                 lambda_vec: LambdaVector) -> float:
    """Trace of ``I_lambda^-1 I_0``, computed by linear solves."""
    H, info0 = information_pair(theta_hat, data, penalty, lambda_vec)
    return _effective_df(H, info0, data.X.shape[1])[0]


def effective_df_split(theta_hat, data, penalty, lambda_vec) -> tuple:
    """``(total, scale, shape)`` partial traces of ``I_lambda^-1 I_0``."""
    H, info0 = information_pair(theta_hat, data, penalty, lambda_vec)
    return _effective_df(H, info0, data.X.shape[1])

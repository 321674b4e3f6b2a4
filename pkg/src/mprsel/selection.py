"""Tuning-parameter selection: BIC objective and differential evolution."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .data import (
    StandardizationRecord,
    SurvivalDataset,
    ThetaVector,
    destandardize_covariance,
    destandardize_theta,
    standardize,
    validate,
)
from .errors import MPRError
from .penalties import Family, LambdaVector, PenaltySpec, alasso_weights, expand_lambda
from .solver import FitResult, SolverConfig, fit_penalized, fit_unpenalized

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DEConfig:
    population_size: Optional[int] = None  # default 10 * dimension
    generations_max: int = 60
    F: float = 0.8
    CR: float = 0.9
    bounds: Optional[Sequence[tuple]] = None  # default [(0, 1)] * dimension
    bic_tol: float = 1e-4
    stagnation_patience: int = 10
    rng_seed: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.CR <= 1:
            raise ValueError("CR must lie in (0, 1]")
        if not 0 < self.F < 2:
            raise ValueError("F must lie in (0, 2)")
        if self.population_size is not None and self.population_size < 4:
            raise ValueError("population_size must be at least 4")
        if self.bounds is not None:
            for lo, hi in self.bounds:
                if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                    raise ValueError(f"invalid bounds ({lo}, {hi})")

    def resolved(self, dim: int) -> "DEConfig":
        bounds = self.bounds if self.bounds is not None else [(0.0, 1.0)] * dim
        if len(bounds) == 1 and dim > 1:
            bounds = list(bounds) * dim
        if len(bounds) != dim:
            raise ValueError(f"need {dim} bounds, got {len(bounds)}")
        pop = self.population_size if self.population_size is not None else 10 * dim
        return DEConfig(pop, self.generations_max, self.F, self.CR,
                        [tuple(map(float, b)) for b in bounds], self.bic_tol,
                        self.stagnation_patience, self.rng_seed)


@dataclass
class DEResult:
    x: np.ndarray
    fun: float
    trace: list
    n_evals: int
    n_generations: int


def de_minimize(objective: Callable, dim: int, config: DEConfig = DEConfig(),
                map_fn: Callable = map) -> DEResult:
    """Minimize ``objective`` over a box with DE/rand/1/bin.

    ``map_fn`` evaluates a list of candidates; pass an executor's ``map`` to
    evaluate a generation concurrently. Results are consumed in population
    order, so the outcome does not depend on how the map is scheduled.
    """
    cfg = config.resolved(dim)
    rng = np.random.default_rng(cfg.rng_seed)
    bounds = np.array(cfg.bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    npop = cfg.population_size

    pop = lo + rng.random((npop, dim)) * (hi - lo)
    fit = np.array(list(map_fn(objective, list(pop))), dtype=float)
    n_evals = npop
    best = int(np.argmin(fit))
    trace = [float(fit[best])]
    stagnant = 0
    gen = 0
    for gen in range(1, cfg.generations_max + 1):
        trials = np.empty_like(pop)
        for i in range(npop):
            choices = rng.choice(npop - 1, size=3, replace=False)
            r1, r2, r3 = np.where(choices >= i, choices + 1, choices)
            mutant = pop[r1] + cfg.F * (pop[r2] - pop[r3])
            cross = rng.random(dim) < cfg.CR
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, pop[i])
            # out-of-range coordinates are redrawn uniformly, as DEoptim does
            out = (trial < lo) | (trial > hi)
            if np.any(out):
                trial[out] = (lo + rng.random(dim) * (hi - lo))[out]
            trials[i] = trial
        trial_fit = np.array(list(map_fn(objective, list(trials))), dtype=float)
        n_evals += npop
        better = trial_fit <= fit
        pop[better] = trials[better]
        fit[better] = trial_fit[better]
        prev = trace[-1]
        best = int(np.argmin(fit))
        trace.append(float(fit[best]))
        improvement = prev - trace[-1]
        if np.isfinite(prev) and improvement < cfg.bic_tol:
            stagnant += 1
        else:
            stagnant = 0
        if stagnant >= cfg.stagnation_patience:
            break
    return DEResult(pop[best].copy(), float(fit[best]), trace, n_evals, gen)


def bic_value(fit: FitResult, n: int) -> float:
    if not fit.converged or fit.effective_df is None:
        return np.inf
    return -2.0 * fit.loglik + fit.effective_df * np.log(n)


def bic_objective(scalars, data: SurvivalDataset, penalty: PenaltySpec, init_theta,
                  config: SolverConfig = SolverConfig()) -> float:
    """``-2 loglik(theta_lambda) + e_lambda log n``; ``inf`` if the inner fit fails."""
    try:
        lam = expand_lambda(scalars, penalty, (data.p, data.q))
        fit = fit_penalized(data, penalty, lam, init_theta, config)
    except MPRError:
        return np.inf
    return bic_value(fit, data.n)


class BICObjective:
    """Picklable BIC objective that counts inner fits.

    With ``warm_start`` each fit starts from the previous candidate's solution
    instead of the unpenalized estimate; this makes results order-dependent.
    """

    def __init__(self, data, penalty, init_theta, config, warm_start=False):
        self.data = data
        self.penalty = penalty
        self.init_theta = init_theta
        self.config = config
        self.warm_start = warm_start
        self.n_fits = 0
        self._last = None

    def __call__(self, scalars) -> float:
        self.n_fits += 1
        init = self._last if (self.warm_start and self._last is not None) else self.init_theta
        try:
            lam = expand_lambda(scalars, self.penalty, (self.data.p, self.data.q))
            fit = fit_penalized(self.data, self.penalty, lam, init, self.config)
        except MPRError:
            return np.inf
        if self.warm_start and fit.converged:
            self._last = fit.theta_hat
        return bic_value(fit, self.data.n)


@dataclass
class SelectionResult:
    lambda_star: np.ndarray
    bic_star: float
    fit: FitResult
    lambda_vec: LambdaVector
    penalty: PenaltySpec
    record: StandardizationRecord
    unpenalized: FitResult
    bic_trace: list = field(default_factory=list)
    n_inner_fits: int = 0
    theta_original: Optional[ThetaVector] = None
    covariance_original: Optional[np.ndarray] = None

    @property
    def se_original(self) -> Optional[np.ndarray]:
        if self.covariance_original is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance_original), 0.0, None))


def _finish(fit, record, kb):
    theta_orig = destandardize_theta(fit.theta_hat, record)
    cov_orig = None
    if fit.covariance is not None:
        cov_orig = destandardize_covariance(fit.covariance, record)
    return theta_orig, cov_orig


def select_and_fit(data: SurvivalDataset, penalty: PenaltySpec,
                   solver_config: SolverConfig = SolverConfig(),
                   de_config: DEConfig = DEConfig(),
                   map_fn: Callable = map,
                   warm_start: bool = False,
                   do_standardize: bool = True) -> SelectionResult:
    """Full pipeline: standardize, unpenalized fit, DE search over BIC, refit.

    For ALASSO the adaptive weights come from the unpenalized estimate.
    Coefficients are reported on the standardized scale (``fit``) and the
    original covariate scale (``theta_original``).
    """
    validate(data)
    if do_standardize:
        std, record = standardize(data)
    else:
        std, record = data, StandardizationRecord.identity(data.p, data.q)
    kb = std.X.shape[1]
    unpen = fit_unpenalized(std, config=solver_config)
    if not unpen.converged:
        logger.warning("unpenalized fit did not converge")

    if penalty.family is Family.NONE:
        lam = LambdaVector.zeros(std.p, std.q)
        bic = bic_value(unpen, std.n)
        theta_orig, cov_orig = _finish(unpen, record, kb)
        return SelectionResult(np.zeros(1), bic, unpen, lam, penalty, record, unpen,
                               [bic], 1, theta_orig, cov_orig)

    if penalty.family is Family.ALASSO:
        penalty = penalty.with_weights(*alasso_weights(unpen.theta_hat, kb))

    objective = BICObjective(std, penalty, unpen.theta_hat, solver_config, warm_start)
    dim = penalty.tuning_mode.n_scalars
    de = de_minimize(objective, dim, de_config, map_fn=map_fn)
    lam = expand_lambda(de.x, penalty, (std.p, std.q))
    fit = fit_penalized(std, penalty, lam, unpen.theta_hat, solver_config)
    n_fits = objective.n_fits if map_fn is map else de.n_evals
    theta_orig, cov_orig = _finish(fit, record, kb)
    return SelectionResult(
        lambda_star=de.x,
        bic_star=de.fun,
        fit=fit,
        lambda_vec=lam,
        penalty=penalty,
        record=record,
        unpenalized=unpen,
        bic_trace=de.trace,
        n_inner_fits=n_fits + 2,
        theta_original=theta_orig,
        covariance_original=cov_orig,
    )

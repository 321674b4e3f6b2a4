"""Monte Carlo study of selection and estimation performance.

Covariates follow a stationary Gaussian AR(1) across columns, event times a
Weibull scale/shape regression, and censoring times an exponential law whose
rate is calibrated to a target censoring proportion.
"""

from __future__ import annotations

import functools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import SurvivalDataset
from .errors import CalibrationFailed, ConfigError, MPRError
from .penalties import Family, PenaltySpec, TuningMode, default_mode
from .selection import DEConfig, select_and_fit
from .solver import SolverConfig

logger = logging.getLogger(__name__)

TRUE_BETA = (-1.5, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.8, 0.5, 0.0, 0.0)
TRUE_ALPHA = (0.5, 0.4, 0.0, 0.0, 0.0, 0.4, -0.2, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SimScenario:
    n: int = 500
    rho: float = 0.5
    true_beta: tuple = TRUE_BETA
    true_alpha: tuple = TRUE_ALPHA
    target_censoring: float = 0.25
    family: Family = Family.ALASSO
    tuning_mode: Optional[TuningMode] = None
    n_replicates: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "true_beta", tuple(float(b) for b in self.true_beta))
        object.__setattr__(self, "true_alpha", tuple(float(a) for a in self.true_alpha))
        object.__setattr__(self, "family", Family(self.family))
        mode = default_mode(self.family) if self.tuning_mode is None else TuningMode(self.tuning_mode)
        object.__setattr__(self, "tuning_mode", mode)
        if not 0 <= self.rho < 1:
            raise ConfigError("rho must lie in [0, 1)")
        if not 0 < self.target_censoring < 1:
            raise ConfigError("target_censoring must lie in (0, 1)")
        if len(self.true_beta) != len(self.true_alpha):
            raise ConfigError("scale and shape share covariates; truths must have equal length")
        if self.n < 2 or self.n_replicates < 1:
            raise ConfigError("n must be >= 2 and n_replicates >= 1")

    @property
    def dim(self) -> int:
        return len(self.true_beta) - 1

    def penalty(self) -> PenaltySpec:
        return PenaltySpec(self.family, self.tuning_mode)


# --- data generation -------------------------------------------------------

def gen_ar1_covariates(n: int, dim: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows of ``dim`` standard normals with lag-k correlation ``rho**k``."""
    if not 0 <= rho < 1:
        raise ConfigError("rho must lie in [0, 1)")
    e = rng.standard_normal((n, dim))
    x = np.empty((n, dim))
    x[:, 0] = e[:, 0]
    s = np.sqrt(1.0 - rho * rho)
    for j in range(1, dim):
        x[:, j] = rho * x[:, j - 1] + s * e[:, j]
    return x


def weibull_quantile(u, tau, gamma):
    """Event time with survival probability ``u``: ``(-log u / tau)**(1/gamma)``."""
    return (-np.log(u) / tau) ** (1.0 / gamma)


def sample_weibull_mpr(x_row, z_row, true_beta, true_alpha, rng: np.random.Generator):
    """Draw event times for covariate rows (with intercept) by inverse CDF.

    Accepts single rows or matrices of rows.
    """
    tau = np.exp(np.asarray(x_row) @ np.asarray(true_beta))
    gamma = np.exp(np.asarray(z_row) @ np.asarray(true_alpha))
    u = rng.random(np.shape(tau))
    # u = 0 has probability ~2**-53 but would give an infinite time
    u = np.where(u > 0, u, np.finfo(float).tiny)
    return weibull_quantile(u, tau, gamma)


def _design(cov):
    return np.column_stack([np.ones(cov.shape[0]), cov])


@functools.lru_cache(maxsize=64)
def _calibrate(true_beta, true_alpha, rho, target, seed, n_mc, bracket, tol):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31 - 1,)))
    cov = gen_ar1_covariates(n_mc, len(true_beta) - 1, rho, rng)
    design = _design(cov)
    T = sample_weibull_mpr(design, design, true_beta, true_alpha, rng)
    E = rng.standard_exponential(n_mc)

    def censored(rate):
        return float(np.mean(E / rate < T))

    lo, hi = np.log(bracket[0]), np.log(bracket[1])
    p_lo, p_hi = censored(np.exp(lo)), censored(np.exp(hi))
    if not (p_lo - tol <= target <= p_hi + tol):
        raise CalibrationFailed(
            f"target censoring {target} outside [{p_lo:.4f}, {p_hi:.4f}] for the rate bracket")
    for _ in range(60):
        mid = (lo + hi) / 2
        p = censored(np.exp(mid))
        if abs(p - target) < tol:
            return float(np.exp(mid))
        if p < target:
            lo = mid
        else:
            hi = mid
    raise CalibrationFailed(f"could not reach censoring {target} within tolerance")


def calibrate_censoring(scenario: SimScenario, target: Optional[float] = None,
                        n_mc: int = 50_000, bracket=(1e-6, 1e6), tol: float = 0.005) -> float:
    """Exponential censoring rate giving censoring proportion ``target``.

    Bisection on the log-rate against a Monte Carlo estimate of
    ``P(C < T)`` from ``n_mc`` (covariate, event, censoring) draws with common
    random numbers. Deterministic given the scenario seed; results are cached.
    """
    target = scenario.target_censoring if target is None else target
    if not 0 < target < 1:
        raise ConfigError("target must lie in (0, 1)")
    return _calibrate(scenario.true_beta, scenario.true_alpha, scenario.rho, float(target),
                      scenario.rng_seed, int(n_mc), tuple(map(float, bracket)), float(tol))


def generate_dataset(scenario: SimScenario, rate: float, rng: np.random.Generator):
    """One simulated dataset plus the raw covariate matrix."""
    cov = gen_ar1_covariates(scenario.n, scenario.dim, scenario.rho, rng)
    design = _design(cov)
    T = sample_weibull_mpr(design, design, scenario.true_beta, scenario.true_alpha, rng)
    C = rng.standard_exponential(scenario.n) / rate
    t = np.minimum(T, C)
    delta = (T <= C).astype(float)
    return SurvivalDataset(t, delta, design, design), cov


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


# --- fitting and metrics -----------------------------------------------------

@dataclass
class ReplicateFit:
    """Original-scale estimates, standard errors and zero/non-zero decisions."""

    beta: np.ndarray
    alpha: np.ndarray
    beta_se: np.ndarray
    alpha_se: np.ndarray
    beta_selected: np.ndarray
    alpha_selected: np.ndarray


@dataclass(frozen=True)
class SelectionFitter:
    """Default replicate fitter: BIC/DE selection followed by sandwich inference."""

    solver_config: SolverConfig = SolverConfig()
    de_config: DEConfig = DEConfig()

    def __call__(self, data: SurvivalDataset, scenario: SimScenario, seed: int) -> ReplicateFit:
        de = DEConfig(**{**asdict(self.de_config), "rng_seed": seed})
        res = select_and_fit(data, scenario.penalty(), self.solver_config, de)
        if not res.fit.converged or res.covariance_original is None:
            raise MPRError("final fit failed")
        kb = data.X.shape[1]
        se = res.se_original
        mask = res.fit.selected_mask
        return ReplicateFit(res.theta_original.beta, res.theta_original.alpha,
                            se[:kb], se[kb:], mask[:kb], mask[kb:])


@dataclass
class ReplicateOutcome:
    index: int
    ok: bool
    fit: Optional[ReplicateFit] = None
    V: Optional[np.ndarray] = None
    censored: float = np.nan
    seconds: float = 0.0


def run_replicate(scenario: SimScenario, rate: float, fitter: Callable, index: int) -> ReplicateOutcome:
    rng = replicate_rng(scenario.rng_seed, index)
    data, cov = generate_dataset(scenario, rate, rng)
    fit_seed = int(rng.integers(2**63 - 1))
    V = np.cov(cov, rowvar=False)
    start = time.perf_counter()
    try:
        fit = fitter(data, scenario, fit_seed)
        ok = True
    except MPRError as exc:
        logger.info("replicate %d failed: %s", index, exc)
        fit, ok = None, False
    return ReplicateOutcome(index, ok, fit, V, float(1 - data.delta.mean()),
                            time.perf_counter() - start)


@dataclass
class ComponentMetrics:
    C: float
    IC: float
    PT: float
    MSE: float
    n_true_zero: int
    n_true_nonzero: int


@dataclass
class CoefficientMetrics:
    component: str
    index: int
    true_value: float
    mean_estimate: float
    SE: float
    SEE: float
    CP: float


@dataclass
class SimReport:
    scenario: dict
    censoring_rate: float
    n_ok: int
    n_failed: int
    mean_censoring: float
    scale: ComponentMetrics
    shape: ComponentMetrics
    coefficients: list = field(default_factory=list)
    mean_seconds: float = np.nan

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "scenario": self.scenario,
            "censoring_rate": self.censoring_rate,
            "n_ok": self.n_ok,
            "n_failed": self.n_failed,
            "mean_censoring": self.mean_censoring,
            "scale": asdict(self.scale),
            "shape": asdict(self.shape),
            "coefficients": [asdict(c) for c in self.coefficients],
        }
        if timing:
            out["mean_seconds"] = self.mean_seconds
        return out

    def coefficient(self, component: str, index: int) -> CoefficientMetrics:
        for c in self.coefficients:
            if c.component == component and c.index == index:
                return c
        raise KeyError((component, index))


def _component_metrics(truth, estimates, selected, Vs):
    truth = np.asarray(truth)
    zero = truth[1:] == 0
    sel = np.array([s[1:] for s in selected])
    est = np.array(estimates)
    C = np.sum(~sel & zero, axis=1)
    IC = np.sum(~sel & ~zero, axis=1)
    PT = np.all(sel == ~zero, axis=1)
    err = est[:, 1:] - truth[1:]
    mse = np.einsum("ri,rij,rj->r", err, np.array(Vs), err)
    return ComponentMetrics(float(C.mean()), float(IC.mean()), float(PT.mean()),
                            float(mse.mean()), int(zero.sum()), int((~zero).sum()))


def _coefficient_metrics(component, truth, estimates, ses):
    out = []
    est = np.array(estimates)
    se = np.array(ses)
    for j, theta in enumerate(truth):
        if theta == 0:
            continue
        col = est[:, j]
        covered = np.abs(col - theta) <= 1.96 * se[:, j]
        sd = float(col.std(ddof=1)) if col.shape[0] > 1 else np.nan
        out.append(CoefficientMetrics(component, j, float(theta), float(col.mean()), sd,
                                      float(se[:, j].mean()), float(covered.mean())))
    return out


def summarize(scenario: SimScenario, rate: float, outcomes) -> SimReport:
    outcomes = sorted(outcomes, key=lambda o: o.index)
    good = [o for o in outcomes if o.ok]
    n_failed = len(outcomes) - len(good)
    if not good:
        raise MPRError("every replicate failed")
    Vs = [o.V for o in good]
    fits = [o.fit for o in good]
    scale = _component_metrics(scenario.true_beta, [f.beta for f in fits],
                               [f.beta_selected for f in fits], Vs)
    shape = _component_metrics(scenario.true_alpha, [f.alpha for f in fits],
                               [f.alpha_selected for f in fits], Vs)
    coefs = (_coefficient_metrics("scale", scenario.true_beta, [f.beta for f in fits],
                                  [f.beta_se for f in fits])
             + _coefficient_metrics("shape", scenario.true_alpha, [f.alpha for f in fits],
                                    [f.alpha_se for f in fits]))
    scen = asdict(scenario)
    scen["family"] = scenario.family.value
    scen["tuning_mode"] = scenario.tuning_mode.value
    scen["true_beta"] = list(scenario.true_beta)
    scen["true_alpha"] = list(scenario.true_alpha)
    return SimReport(
        scenario=scen,
        censoring_rate=rate,
        n_ok=len(good),
        n_failed=n_failed,
        mean_censoring=float(np.mean([o.censored for o in outcomes])),
        scale=scale,
        shape=shape,
        coefficients=coefs,
        mean_seconds=float(np.mean([o.seconds for o in outcomes])),
    )


def run_scenario(scenario: SimScenario, solver_config: SolverConfig = SolverConfig(),
                 de_config: DEConfig = DEConfig(), fitter: Optional[Callable] = None,
                 workers: int = 1) -> SimReport:
    """Run every replicate of ``scenario`` and aggregate the metrics.

    Replicate ``i`` draws from a generator seeded by ``(rng_seed, i)``, so the
    report does not depend on ``workers``. Failed replicates are excluded from
    the averages and counted in ``n_failed``.
    """
    rate = calibrate_censoring(scenario)
    if fitter is None:
        fitter = SelectionFitter(solver_config, de_config)
    job = functools.partial(run_replicate, scenario, rate, fitter)
    indices = range(scenario.n_replicates)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, indices))
    else:
        outcomes = [job(i) for i in indices]
    return summarize(scenario, rate, outcomes)

"""LASSO, SCAD and adaptive-LASSO penalties on a smoothed absolute value.

``|x|`` is replaced everywhere (including the SCAD branch tests) by
``a(x) = sqrt(x**2 + eps**2) - eps`` so that the penalized log-likelihood is
smooth and can be maximized by Newton-Raphson.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .data import as_flat
from .errors import ConfigError, MissingAdaptiveWeights, WrongScalarCount


class Family(str, enum.Enum):
    NONE = "none"
    LASSO = "lasso"
    SCAD = "scad"
    ALASSO = "alasso"


class TuningMode(str, enum.Enum):
    SINGLE = "single"
    SINGLE_ADAPTIVE = "single-adaptive"
    SEPARATE = "separate"
    SEPARATE_ADAPTIVE = "separate-adaptive"

    @property
    def adaptive(self) -> bool:
        return self in (TuningMode.SINGLE_ADAPTIVE, TuningMode.SEPARATE_ADAPTIVE)

    @property
    def n_scalars(self) -> int:
        return 1 if self in (TuningMode.SINGLE, TuningMode.SINGLE_ADAPTIVE) else 2


def default_mode(family: Family, separate: bool = False) -> TuningMode:
    if Family(family) is Family.ALASSO:
        return TuningMode.SEPARATE_ADAPTIVE if separate else TuningMode.SINGLE_ADAPTIVE
    return TuningMode.SEPARATE if separate else TuningMode.SINGLE


@dataclass(frozen=True)
class PenaltySpec:
    family: Family = Family.NONE
    tuning_mode: Optional[TuningMode] = None
    scad_a: float = 3.7
    epsilon: float = 1e-4
    adaptive_weights: Optional[tuple] = None  # (w_beta, w_alpha); index 0 ignored

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        mode = default_mode(family) if self.tuning_mode is None else TuningMode(self.tuning_mode)
        object.__setattr__(self, "tuning_mode", mode)
        if not self.scad_a > 2:
            raise ConfigError(f"scad_a must exceed 2, got {self.scad_a}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if family is not Family.NONE and mode.adaptive != (family is Family.ALASSO):
            raise ConfigError(
                f"tuning mode {mode.value!r} is incompatible with penalty {family.value!r}")

    def with_weights(self, w_beta, w_alpha) -> "PenaltySpec":
        return PenaltySpec(self.family, self.tuning_mode, self.scad_a, self.epsilon,
                           (np.asarray(w_beta, float), np.asarray(w_alpha, float)))


@dataclass(frozen=True)
class LambdaVector:
    """Per-coefficient tuning values; intercept entries are always zero."""

    beta: np.ndarray
    alpha: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.beta, self.alpha])

    @classmethod
    def zeros(cls, p: int, q: int) -> "LambdaVector":
        return cls(np.zeros(p + 1), np.zeros(q + 1))


# --- smoothed absolute value ---------------------------------------------

def smooth_abs(x, epsilon: float = 1e-4):
    x = np.asarray(x, dtype=float)
    # x^2 / (sqrt(x^2 + eps^2) + eps) == sqrt(x^2 + eps^2) - eps without cancellation
    return x * x / (np.sqrt(x * x + epsilon * epsilon) + epsilon)


def smooth_abs_d1(x, epsilon: float = 1e-4):
    x = np.asarray(x, dtype=float)
    return x / np.sqrt(epsilon * epsilon + x * x)


def smooth_abs_d2(x, epsilon: float = 1e-4):
    x = np.asarray(x, dtype=float)
    return epsilon * epsilon / (epsilon * epsilon + x * x) ** 1.5


# --- penalty functions of u = a(theta) -----------------------------------

def _scad_j(u, lam, a):
    mid = (2 * a * lam * u - u * u - lam * lam) / (2 * (a - 1))
    top = lam * lam * (a + 1) / 2
    return np.where(u <= lam, lam * u, np.where(u < a * lam, mid, top))


def _scad_j1(u, lam, a):
    return np.where(u <= lam, lam, np.where(u < a * lam, (a * lam - u) / (a - 1), 0.0))


def _scad_j2(u, lam, a):
    return np.where((u > lam) & (u < a * lam), -1.0 / (a - 1), 0.0)


def _family(family) -> Family:
    return Family(family)


def penalty_value(family, lam, theta, spec: PenaltySpec):
    """Penalty ``J_lam(a(theta))`` elementwise.

    For ALASSO ``lam`` is the already-weighted per-coefficient value
    (see :func:`expand_lambda`), so it shares the LASSO formula.
    """
    family = _family(family)
    lam = np.asarray(lam, dtype=float)
    u = smooth_abs(theta, spec.epsilon)
    if family is Family.NONE:
        return np.zeros(np.broadcast(lam, u).shape)
    if family is Family.SCAD:
        return _scad_j(u, lam, spec.scad_a)
    return lam * u


def penalty_d1(family, lam, theta, spec: PenaltySpec):
    """First derivative of the penalty with respect to ``theta``."""
    family = _family(family)
    lam = np.asarray(lam, dtype=float)
    u = smooth_abs(theta, spec.epsilon)
    da = smooth_abs_d1(theta, spec.epsilon)
    if family is Family.NONE:
        return np.zeros(np.broadcast(lam, u).shape)
    if family is Family.SCAD:
        return _scad_j1(u, lam, spec.scad_a) * da
    return lam * da


def penalty_d2(family, lam, theta, spec: PenaltySpec):
    """Second derivative of the penalty with respect to ``theta``."""
    family = _family(family)
    lam = np.asarray(lam, dtype=float)
    u = smooth_abs(theta, spec.epsilon)
    da = smooth_abs_d1(theta, spec.epsilon)
    dda = smooth_abs_d2(theta, spec.epsilon)
    if family is Family.NONE:
        return np.zeros(np.broadcast(lam, u).shape)
    if family is Family.SCAD:
        a = spec.scad_a
        return _scad_j2(u, lam, a) * da * da + _scad_j1(u, lam, a) * dda
    return lam * dda


# --- tuning parameters ---------------------------------------------------

def expand_lambda(scalars: Sequence[float], spec: PenaltySpec, dims: tuple) -> LambdaVector:
    """Expand one or two tuning scalars into per-coefficient values.

    ``dims`` is ``(p, q)``. Single modes take one scalar shared by both
    components; separate modes take ``(lambda_beta, lambda_alpha)``. Adaptive
    modes multiply by the stored weights. Intercepts are never penalized.
    """
    p, q = dims
    scalars = np.atleast_1d(np.asarray(scalars, dtype=float))
    mode = spec.tuning_mode
    if scalars.shape[0] != mode.n_scalars:
        raise WrongScalarCount(
            f"tuning mode {mode.value!r} takes {mode.n_scalars} scalar(s), got {scalars.shape[0]}")
    if np.any(scalars < 0):
        raise ConfigError("tuning parameters must be non-negative")
    lam_b, lam_a = (scalars[0], scalars[0]) if mode.n_scalars == 1 else scalars
    lb = np.full(p + 1, lam_b)
    la = np.full(q + 1, lam_a)
    if mode.adaptive:
        if spec.adaptive_weights is None:
            raise MissingAdaptiveWeights("adaptive tuning mode needs adaptive weights")
        wb, wa = spec.adaptive_weights
        if len(wb) != p + 1 or len(wa) != q + 1:
            raise ConfigError("adaptive weights do not match the design dimensions")
        lb = lb * wb
        la = la * wa
    lb[0] = 0.0
    la[0] = 0.0
    return LambdaVector(lb, la)


def alasso_weights(unpenalized, n_beta: int, cap: float = 1e6) -> tuple:
    """Adaptive weights ``1 / |theta0_j|``, capped at ``cap``; intercepts get 0."""
    flat = np.abs(as_flat(unpenalized))
    w = 1.0 / np.maximum(flat, 1.0 / cap)
    wb, wa = w[:n_beta].copy(), w[n_beta:].copy()
    wb[0] = 0.0
    wa[0] = 0.0
    return wb, wa


class PenaltyTerms(NamedTuple):
    v_beta: np.ndarray
    v_alpha: np.ndarray
    sigma_beta: np.ndarray  # diagonal of the second-derivative matrix
    sigma_alpha: np.ndarray
    total: float

    @property
    def v(self) -> np.ndarray:
        return np.concatenate([self.v_beta, self.v_alpha])

    @property
    def sigma(self) -> np.ndarray:
        return np.concatenate([self.sigma_beta, self.sigma_alpha])


def assemble_penalty_terms(theta, lambda_vec: LambdaVector, spec: PenaltySpec) -> PenaltyTerms:
    """Gradient, curvature and total of the (unscaled) penalty at ``theta``."""
    flat = as_flat(theta)
    lam = lambda_vec.flat
    if lam.shape != flat.shape:
        raise ConfigError("lambda vector does not match theta")
    kb = lambda_vec.beta.shape[0]
    if spec.family is Family.NONE:
        z = np.zeros_like(flat)
        return PenaltyTerms(z[:kb], z[kb:], z[:kb].copy(), z[kb:].copy(), 0.0)
    v = penalty_d1(spec.family, lam, flat, spec)
    s = penalty_d2(spec.family, lam, flat, spec)
    total = penalty_value(spec.family, lam, flat, spec)
    # intercepts carry lambda 0; force exact zeros regardless of family
    for arr in (v, s, total):
        arr[0] = 0.0
        arr[kb] = 0.0
    return PenaltyTerms(v[:kb], v[kb:], s[:kb], s[kb:], float(np.sum(total)))

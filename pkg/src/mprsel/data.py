"""Survival data containers, validation and covariate standardization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadIndicator,
    ConstantColumnNotIntercept,
    DataError,
    DimensionMismatch,
    NoEvents,
    NonPositiveTime,
)


class MissingIntercept(DataError):
    code = "MISSING_INTERCEPT"


class NonFiniteData(DataError):
    code = "NON_FINITE_DATA"


def _frozen(a, ndim):
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SurvivalDataset:
    """Right-censored survival data for a scale/shape regression.

    ``X`` and ``Z`` include the intercept column (column 0 of ones).
    """

    t: np.ndarray
    delta: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    log_t: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t, 1))
        object.__setattr__(self, "delta", _frozen(self.delta, 1))
        object.__setattr__(self, "X", _frozen(self.X, 2))
        object.__setattr__(self, "Z", _frozen(self.Z, 2))
        with np.errstate(divide="ignore", invalid="ignore"):
            log_t = np.log(self.t)
        log_t.setflags(write=False)
        object.__setattr__(self, "log_t", log_t)

    @classmethod
    def from_covariates(cls, t, delta, x_cov=None, z_cov=None) -> "SurvivalDataset":
        """Build a dataset, prepending intercept columns to the covariates."""
        t = np.asarray(t, dtype=float)
        n = t.shape[0]

        def design(cov):
            if cov is None:
                return np.ones((n, 1))
            cov = np.asarray(cov, dtype=float)
            if cov.ndim == 1:
                cov = cov[:, None]
            return np.column_stack([np.ones(cov.shape[0]), cov])

        return cls(t, delta, design(x_cov), design(z_cov))

    @property
    def n(self) -> int:
        return self.t.shape[0]

    @property
    def p(self) -> int:
        """Number of scale covariates (excluding the intercept)."""
        return self.X.shape[1] - 1

    @property
    def q(self) -> int:
        """Number of shape covariates (excluding the intercept)."""
        return self.Z.shape[1] - 1

    @property
    def n_params(self) -> int:
        return self.p + self.q + 2


@dataclass(frozen=True)
class ThetaVector:
    """Scale coefficients ``beta`` and shape coefficients ``alpha``.

    The flat layout used by every gradient and Hessian is ``(beta, alpha)``.
    """

    beta: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        beta = _frozen(self.beta, 1)
        alpha = _frozen(self.alpha, 1)
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(alpha))):
            raise NonFiniteData("theta must have finite entries")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.beta, self.alpha])

    @classmethod
    def from_flat(cls, vec, n_beta: int) -> "ThetaVector":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:n_beta], vec[n_beta:])

    @classmethod
    def zeros(cls, p: int, q: int) -> "ThetaVector":
        return cls(np.zeros(p + 1), np.zeros(q + 1))


def as_flat(theta) -> np.ndarray:
    if isinstance(theta, ThetaVector):
        return theta.flat
    return np.asarray(theta, dtype=float)


def validate(data: SurvivalDataset) -> None:
    """Check the dataset invariants, raising the matching ``DataError``."""
    n = data.t.shape[0]
    if data.delta.shape[0] != n or data.X.shape[0] != n or data.Z.shape[0] != n:
        raise DimensionMismatch(
            f"t has {n} rows but delta, X, Z have "
            f"{data.delta.shape[0]}, {data.X.shape[0]}, {data.Z.shape[0]}"
        )
    if n == 0 or data.X.shape[1] == 0 or data.Z.shape[1] == 0:
        raise DimensionMismatch("empty dataset or design matrix")
    for name, arr in (("t", data.t), ("delta", data.delta), ("X", data.X), ("Z", data.Z)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteData(f"{name} contains non-finite values")
    if np.any(data.t <= 0):
        i = int(np.flatnonzero(data.t <= 0)[0])
        raise NonPositiveTime(f"t[{i}] = {data.t[i]} is not strictly positive")
    bad = (data.delta != 0) & (data.delta != 1)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise BadIndicator(f"delta[{i}] = {data.delta[i]} is not 0 or 1")
    for name, M in (("X", data.X), ("Z", data.Z)):
        if np.any(M[:, 0] != 1.0):
            raise MissingIntercept(f"first column of {name} must be all ones")
    if not np.any(data.delta == 1):
        raise NoEvents("no observed events (all delta are 0)")
    for name, M in (("X", data.X), ("Z", data.Z)):
        if M.shape[1] > 1:
            const = np.ptp(M[:, 1:], axis=0) == 0
            if np.any(const):
                j = int(np.flatnonzero(const)[0]) + 1
                raise ConstantColumnNotIntercept(f"column {j} of {name} is constant")


@dataclass(frozen=True)
class StandardizationRecord:
    """Column means and sample standard deviations of the non-intercept columns."""

    x_mean: np.ndarray
    x_sd: np.ndarray
    z_mean: np.ndarray
    z_sd: np.ndarray
    applied: bool = True

    @classmethod
    def identity(cls, p: int, q: int) -> "StandardizationRecord":
        return cls(np.zeros(p), np.ones(p), np.zeros(q), np.ones(q), applied=False)

    def transform_matrix(self) -> np.ndarray:
        """Linear map taking standardized-scale theta to original-scale theta."""
        return _block_diag(_affine_block(self.x_mean, self.x_sd),
                           _affine_block(self.z_mean, self.z_sd))


def _affine_block(mean, sd):
    k = mean.shape[0] + 1
    A = np.zeros((k, k))
    A[0, 0] = 1.0
    A[0, 1:] = -mean / sd
    A[np.arange(1, k), np.arange(1, k)] = 1.0 / sd
    return A


def _block_diag(A, B):
    out = np.zeros((A.shape[0] + B.shape[0], A.shape[1] + B.shape[1]))
    out[: A.shape[0], : A.shape[1]] = A
    out[A.shape[0]:, A.shape[1]:] = B
    return out


def _standardize_columns(M):
    cols = M[:, 1:]
    mean = cols.mean(axis=0)
    sd = cols.std(axis=0, ddof=1)
    if np.any(~(sd > 0)):
        j = int(np.flatnonzero(~(sd > 0))[0]) + 1
        raise ConstantColumnNotIntercept(f"column {j} has zero variance")
    out = M.copy()
    out[:, 1:] = (cols - mean) / sd
    return out, mean, sd


def standardize(data: SurvivalDataset) -> tuple[SurvivalDataset, StandardizationRecord]:
    """Centre and scale every non-intercept column to mean 0, sample sd 1."""
    X, x_mean, x_sd = _standardize_columns(data.X)
    Z, z_mean, z_sd = _standardize_columns(data.Z)
    record = StandardizationRecord(x_mean, x_sd, z_mean, z_sd, applied=True)
    return SurvivalDataset(data.t, data.delta, X, Z), record


def destandardize_theta(theta: ThetaVector, record: StandardizationRecord) -> ThetaVector:
    """Map coefficients fitted on standardized covariates back to the original scale.

    The returned coefficients give the same linear predictors on the original
    covariates as ``theta`` gives on the standardized ones.
    """
    if theta.beta.shape[0] != record.x_mean.shape[0] + 1 or \
            theta.alpha.shape[0] != record.z_mean.shape[0] + 1:
        raise DimensionMismatch("theta does not match the standardization record")
    flat = record.transform_matrix() @ theta.flat
    return ThetaVector.from_flat(flat, theta.beta.shape[0])


def destandardize_covariance(cov: np.ndarray, record: StandardizationRecord) -> np.ndarray:
    A = record.transform_matrix()
    if cov.shape != A.shape:
        raise DimensionMismatch("covariance does not match the standardization record")
    out = A @ cov @ A.T
    return (out + out.T) / 2

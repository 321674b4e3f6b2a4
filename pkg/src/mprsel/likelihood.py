"""Weibull scale/shape regression log-likelihood and its derivatives.

With ``tau_i = exp(x_i' beta)`` and ``gamma_i = exp(z_i' alpha)`` the hazard is
``tau_i * gamma_i * t**(gamma_i - 1)`` and the cumulative hazard is
``H_i = tau_i * t_i**gamma_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SurvivalDataset, ThetaVector, as_flat
from .errors import DimensionMismatch, NonFiniteResult


@dataclass(frozen=True)
class LikelihoodWorkspace:
    """Per-subject quantities shared by the value, score and information."""

    eta: np.ndarray  # x_i' beta = log tau_i
    zeta: np.ndarray  # z_i' alpha = log gamma_i
    gamma: np.ndarray
    cumhaz: np.ndarray  # tau_i * t_i**gamma_i
    u_beta: np.ndarray
    u_alpha: np.ndarray
    w_beta: np.ndarray
    w_alpha: np.ndarray
    w_alphabeta: np.ndarray

    @classmethod
    def compute(cls, theta, data: SurvivalDataset) -> "LikelihoodWorkspace":
        flat = as_flat(theta)
        k = data.X.shape[1]
        if flat.shape[0] != k + data.Z.shape[1]:
            raise DimensionMismatch(
                f"theta has {flat.shape[0]} entries, design needs {k + data.Z.shape[1]}")
        eta = data.X @ flat[:k]
        zeta = data.Z @ flat[k:]
        with np.errstate(over="ignore", invalid="ignore"):
            gamma = np.exp(zeta)
            glogt = gamma * data.log_t
            cumhaz = np.exp(eta + glogt)
            h_glogt = cumhaz * glogt
            w_alpha = (cumhaz * (glogt + 1.0) - data.delta) * glogt
        if not (np.all(np.isfinite(h_glogt)) and np.all(np.isfinite(w_alpha))):
            raise NonFiniteResult("cumulative hazard overflowed")
        d = data.delta
        return cls(
            eta=eta,
            zeta=zeta,
            gamma=gamma,
            cumhaz=cumhaz,
            u_beta=d - cumhaz,
            u_alpha=d * (1.0 + glogt) - h_glogt,
            w_beta=cumhaz,
            w_alpha=w_alpha,
            w_alphabeta=h_glogt,
        )

    def loglik(self, data: SurvivalDataset) -> float:
        d = data.delta
        val = float(np.sum(d * (self.eta + self.zeta + (self.gamma - 1.0) * data.log_t))
                    - np.sum(self.cumhaz))
        if not np.isfinite(val):
            raise NonFiniteResult("log-likelihood is not finite")
        return val

    def score(self, data: SurvivalDataset) -> np.ndarray:
        return np.concatenate([data.X.T @ self.u_beta, data.Z.T @ self.u_alpha])

    def information(self, data: SurvivalDataset) -> np.ndarray:
        X, Z = data.X, data.Z
        kb = X.shape[1]
        k = kb + Z.shape[1]
        info = np.empty((k, k))
        info[:kb, :kb] = X.T @ (self.w_beta[:, None] * X)
        info[kb:, kb:] = Z.T @ (self.w_alpha[:, None] * Z)
        off = X.T @ (self.w_alphabeta[:, None] * Z)
        info[:kb, kb:] = off
        info[kb:, :kb] = off.T
        # diagonal blocks are Gram matrices up to roundoff; make them exact
        info[:kb, :kb] = (info[:kb, :kb] + info[:kb, :kb].T) / 2
        info[kb:, kb:] = (info[kb:, kb:] + info[kb:, kb:].T) / 2
        return info


def log_likelihood(theta, data: SurvivalDataset) -> float:
    return LikelihoodWorkspace.compute(theta, data).loglik(data)


def loglik_value(flat: np.ndarray, data: SurvivalDataset) -> float:
    """Log-likelihood only, skipping the derivative quantities."""
    k = data.X.shape[1]
    eta = data.X @ flat[:k]
    zeta = data.Z @ flat[k:]
    with np.errstate(over="ignore", invalid="ignore"):
        gamma = np.exp(zeta)
        cumhaz = np.exp(eta + gamma * data.log_t)
        val = float(data.delta @ (eta + zeta + (gamma - 1.0) * data.log_t) - cumhaz.sum())
    if not np.isfinite(val):
        raise NonFiniteResult("log-likelihood is not finite")
    return val


def score(theta, data: SurvivalDataset) -> np.ndarray:
    """Gradient of the log-likelihood, laid out as ``(d/d beta, d/d alpha)``."""
    return LikelihoodWorkspace.compute(theta, data).score(data)


def observed_information(theta, data: SurvivalDataset) -> np.ndarray:
    """Negative Hessian of the log-likelihood (symmetric)."""
    return LikelihoodWorkspace.compute(theta, data).information(data)


def cumulative_hazard(theta: ThetaVector, t: float, x, z) -> float:
    """``exp(x' beta) * t ** exp(z' alpha)``; zero at ``t = 0``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    tau = np.exp(np.dot(x, theta.beta))
    gamma = np.exp(np.dot(z, theta.alpha))
    if t == 0:
        return 0.0
    return float(tau * np.exp(gamma * np.log(t)))


def hazard(theta: ThetaVector, t: float, x, z) -> float:
    tau = np.exp(np.dot(x, theta.beta))
    gamma = np.exp(np.dot(z, theta.alpha))
    return float(tau * gamma * t ** (gamma - 1.0))

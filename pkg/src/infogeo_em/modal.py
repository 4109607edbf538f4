"""Modal linear regression with a Gaussian kernel.

The fitted line maximizes the kernel density estimate of the residuals at
zero, ``(1/N) sum_i phi_h(y_i - x_i' beta)``. The EM iteration alternates

* an e-step, the normalized kernel weights of the residuals (the
  e-projection of the current model onto the mixture family of latent
  sample labels), and
* an m-step, weighted least squares with those weights.

The log objective is minorized by the surrogate :func:`mlr_surrogate`, which
touches it at the current estimate, so the objective never decreases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._base import DomainError, EmConfig, FitError, Trace

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class MlrConfig:
    h: float
    tol: float = 1e-10
    max_iters: int = 500

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise DomainError(f"bandwidth h must be positive, got {self.h}")
        EmConfig(self.tol, self.max_iters)


def as_regression(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DomainError(f"design {X.shape} and response {y.shape} are incompatible")
    if X.shape[0] < X.shape[1]:
        raise DomainError(f"need N >= p, got N={X.shape[0]}, p={X.shape[1]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("regression data contain non-finite values")
    return X, y


def _log_kernel(r: np.ndarray, h: float) -> np.ndarray:
    return -0.5 * (r / h) ** 2 - math.log(h) - LOG_SQRT_2PI


def _residuals(beta, X, y) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size != X.shape[1]:
        raise DomainError(f"beta has {beta.size} entries, design has {X.shape[1]} columns")
    return y - X @ beta


def log_mlr_objective(beta, X, y, h: float) -> float:
    """``log((1/N) sum_i phi_h(y_i - x_i' beta))``, evaluated without underflow."""
    X, y = as_regression(X, y)
    return float(logsumexp(_log_kernel(_residuals(beta, X, y), h)) - math.log(y.size))


def mlr_objective(beta, X, y, h: float) -> float:
    """Kernel density of the residuals at zero, ``(1/N) sum_i phi_h(r_i)``."""
    return math.exp(log_mlr_objective(beta, X, y, h))


def mlr_e_step(beta, X, y, h: float) -> np.ndarray:
    """Kernel weights ``pi_i ∝ phi_h(y_i - x_i' beta)`` summing to one."""
    X, y = as_regression(X, y)
    lk = _log_kernel(_residuals(beta, X, y), h)
    w = np.exp(lk - lk.max())
    return w / math.fsum(w)


def mlr_surrogate(beta, beta_k, X, y, h: float) -> float:
    """Minorizer ``sum_i pi_i^(k) log(phi_h(r_i(beta)) / (N pi_i^(k)))``.

    Terms with ``pi_i^(k) = 0`` contribute nothing.
    """
    X, y = as_regression(X, y)
    pi = mlr_e_step(beta_k, X, y, h)
    lk = _log_kernel(_residuals(beta, X, y), h)
    pos = pi > 0
    return math.fsum(pi[pos] * (lk[pos] - math.log(y.size) - np.log(pi[pos])))


def mlr_m_step(X, y, weights, ridge: bool = False) -> np.ndarray:
    """Weighted least squares ``(X'WX)^{-1} X'Wy`` with ``W = diag(weights)``.

    With ``ridge=True`` a term ``1e-10 * trace(X'WX)`` is added to the
    diagonal instead of failing on a singular system.
    """
    X, y = as_regression(X, y)
    w = np.asarray(weights, dtype=float)
    if w.shape != y.shape or np.any(w < 0):
        raise DomainError("weights must be a nonnegative vector with one entry per sample")
    A = X.T @ (w[:, None] * X)
    b = X.T @ (w * y)
    if ridge:
        A = A + 1e-10 * np.trace(A) * np.eye(A.shape[0])
    if np.linalg.matrix_rank(A) < A.shape[0]:
        raise DomainError("rank-deficient weighted design")
    return np.linalg.solve(A, b)


def ols(X, y) -> np.ndarray:
    X, y = as_regression(X, y)
    return np.linalg.lstsq(X, y, rcond=None)[0]


def silverman_bandwidth(X, y) -> float:
    """``1.06 * sigma * N^(-1/5)`` from the OLS residual standard deviation."""
    X, y = as_regression(X, y)
    r = y - X @ ols(X, y)
    dof = max(y.size - X.shape[1], 1)
    sigma = math.sqrt(float(r @ r) / dof)
    if sigma == 0:
        raise DomainError("OLS residuals are all zero; choose a bandwidth explicitly")
    return 1.06 * sigma * y.size ** -0.2


def fit_mlr(X, y, config: MlrConfig, init=None, ridge: bool = False):
    """Modal linear regression by EM, started from ``init`` (OLS by default).

    Returns ``(beta, trace)``; the trace holds the objective
    ``(1/N) sum phi_h(r_i)`` per iteration and is non-decreasing. Stops when
    the objective increases by less than ``config.tol``.
    """
    X, y = as_regression(X, y)
    beta = ols(X, y) if init is None else np.asarray(init, dtype=float).ravel().copy()
    h = config.h
    trace = Trace("increasing")
    try:
        obj = mlr_objective(beta, X, y, h)
        trace.append(obj, log_objective=log_mlr_objective(beta, X, y, h))
        for _ in range(config.max_iters):
            w = mlr_e_step(beta, X, y, h)
            beta = mlr_m_step(X, y, w, ridge=ridge)
            new = mlr_objective(beta, X, y, h)
            trace.append(new, log_objective=log_mlr_objective(beta, X, y, h))
            if new - obj < config.tol:
                trace.converged = True
                break
            obj = new
    except DomainError as exc:
        raise FitError(f"modal regression aborted: {exc}", trace) from exc
    return beta, trace

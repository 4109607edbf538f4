"""EM / em estimation of Gaussian mixtures.

The e-step replaces the responsibilities by the model posterior
``p(z | x; theta)``, which is the e-projection of the model point onto the
data manifold ``{q(x) q(z|x)}`` with ``q(x)`` the empirical law. The m-step is
the weighted maximum-likelihood fit, i.e. the m-projection back onto the
model manifold. Both steps decrease

    J(r, theta) = (1/N) sum_i sum_k r_ik [log r_ik - log(w_k N(x_i; mu_k, S_k))],

the joint KL divergence with the (ill-defined) entropy of the empirical law
dropped. At ``r = e_step(theta)`` it equals the average negative
log-likelihood.

For curved exponential families the e-step need not coincide with the
classical E-step: the conditional expectation of the sufficient statistic
is not in general its value at the conditioned mean. For Gaussian mixtures
the two agree, so a single implementation serves both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from ._base import DomainError, EmConfig, FitError, Trace
from .geometry import as_probability

LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class GaussianMixtureParams:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, p)
    covariances: np.ndarray  # (K, p, p)

    def __post_init__(self):
        w = as_probability(self.weights, tol=1e-9, name="weights")
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.covariances, dtype=float)
        K = w.size
        if mu.shape[0] != K:
            mu = mu.reshape(K, -1)
        p = mu.shape[1]
        cov = cov.reshape(K, p, p)
        for k in range(K):
            if not np.allclose(cov[k], cov[k].T, rtol=1e-10, atol=1e-12):
                raise DomainError(f"covariance {k} is not symmetric")
            if np.linalg.eigvalsh(cov[k]).min() <= 0:
                raise DomainError(f"covariance {k} is not positive definite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def as_dataset(data) -> np.ndarray:
    """Observations as an ``(N, p)`` array; 1-D input is read as ``p = 1``."""
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DomainError(f"dataset must be N x p with N >= 1, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DomainError("dataset contains non-finite values")
    return X


def covariance_floor(data) -> float:
    """Eigenvalue floor ``1e-6 * trace(S) / p`` of the pooled scatter ``S``.

    Falls back to ``1e-6`` when the data have zero spread.
    """
    X = as_dataset(data)
    spread = float(np.trace(np.atleast_2d(np.cov(X.T, bias=True)))) / X.shape[1]
    return 1e-6 * spread if spread > 0 else 1e-6


def component_log_densities(params: GaussianMixtureParams, data) -> np.ndarray:
    """``log w_k + log N(x_i; mu_k, S_k)`` as an ``(N, K)`` array."""
    X = as_dataset(data)
    if X.shape[1] != params.dim:
        raise DomainError(f"data dimension {X.shape[1]} != model dimension {params.dim}")
    N, p = X.shape
    out = np.empty((N, params.n_components))
    with np.errstate(divide="ignore"):
        logw = np.log(params.weights)
    for k in range(params.n_components):
        L = np.linalg.cholesky(params.covariances[k])
        z = np.linalg.solve(L, (X - params.means[k]).T)
        logdet = 2.0 * np.log(np.diag(L)).sum()
        out[:, k] = logw[k] - 0.5 * (p * LOG_2PI + logdet + (z * z).sum(axis=0))
    return out


def log_likelihood(params: GaussianMixtureParams, data) -> float:
    """Average marginal log-likelihood ``(1/N) sum_i log p(x_i; theta)``."""
    return float(logsumexp(component_log_densities(params, data), axis=1).mean())


def e_step(params: GaussianMixtureParams, data) -> np.ndarray:
    """Responsibilities ``r_ik ∝ w_k N(x_i; mu_k, S_k)``, rows summing to one."""
    logp = component_log_densities(params, data)
    top = logp.max(axis=1, keepdims=True)
    bad = ~np.isfinite(top[:, 0])
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(f"all component densities vanish at observation {i}")
    r = np.exp(logp - top)
    return r / r.sum(axis=1, keepdims=True)


def _floor_eigs(S: np.ndarray, floor: float) -> np.ndarray:
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def m_step(data, resp, floor: float | None = None) -> GaussianMixtureParams:
    """Weighted maximum-likelihood parameters for the given responsibilities.

    Covariance eigenvalues are clipped from below at ``floor`` (default
    :func:`covariance_floor`), which is the constrained maximizer.
    """
    X = as_dataset(data)
    R = np.asarray(resp, dtype=float)
    if R.ndim != 2 or R.shape[0] != X.shape[0]:
        raise DomainError(f"responsibilities shape {R.shape} does not match {X.shape[0]} observations")
    if np.any(R < 0) or not np.allclose(R.sum(axis=1), 1.0, atol=1e-12, rtol=0):
        raise DomainError("responsibility rows must be nonnegative and sum to 1")
    if floor is None:
        floor = covariance_floor(X)
    Nk = R.sum(axis=0)
    if np.any(Nk <= 0):
        raise DomainError(f"empty component {int(np.flatnonzero(Nk <= 0)[0])}")
    weights = Nk / X.shape[0]
    means = (R.T @ X) / Nk[:, None]
    covs = np.empty((R.shape[1], X.shape[1], X.shape[1]))
    for k in range(R.shape[1]):
        D = X - means[k]
        covs[k] = _floor_eigs((R[:, k, None] * D).T @ D / Nk[k], floor)
    return GaussianMixtureParams(weights / weights.sum(), means, covs)


def joint_divergence_objective(data, resp, params: GaussianMixtureParams) -> float:
    """Joint divergence between the data-manifold point ``resp`` and ``params``."""
    R = np.asarray(resp, dtype=float)
    logp = component_log_densities(params, data)
    if R.shape != logp.shape:
        raise DomainError(f"responsibilities shape {R.shape} != {logp.shape}")
    pos = R > 0
    if np.any(~np.isfinite(logp[pos])):
        raise DomainError("positive responsibility on a component with vanishing density")
    return float((R[pos] * (np.log(R[pos]) - logp[pos])).sum() / R.shape[0])


def init_params(data, n_components: int, seed: int = 0) -> GaussianMixtureParams:
    """Means at ``n_components`` distinct data points, shared pooled covariance."""
    X = as_dataset(data)
    uniq = np.unique(X, axis=0)
    if n_components < 1 or n_components > uniq.shape[0]:
        raise DomainError(f"need 1 <= K <= {uniq.shape[0]} distinct points, got K={n_components}")
    rng = np.random.default_rng(seed)
    means = uniq[rng.choice(uniq.shape[0], size=n_components, replace=False)]
    pooled = _floor_eigs(np.atleast_2d(np.cov(X.T, bias=True)), covariance_floor(X))
    covs = np.repeat(pooled[None], n_components, axis=0)
    return GaussianMixtureParams(np.full(n_components, 1.0 / n_components), means, covs)


def fit_em(data, init: GaussianMixtureParams, config: EmConfig | None = None):
    """Alternate e- and m-steps from ``init``.

    Returns ``(params, trace)``. Each trace record holds the objective after
    the e-step (``objective``, equal to minus the average log-likelihood),
    and, from iteration 1 on, the value reached by the preceding m-step
    (``after_m_step``) so that both half-steps can be audited.

    Raises
    ------
    FitError
        If a step fails; the partial trace is attached.
    """
    config = config or EmConfig()
    X = as_dataset(data)
    floor = covariance_floor(X)
    trace = Trace("decreasing")
    params = init
    try:
        resp = e_step(params, X)
        obj = joint_divergence_objective(X, resp, params)
        trace.append(obj, loglik=-obj)
        for _ in range(config.max_iters):
            params = m_step(X, resp, floor)
            mid = joint_divergence_objective(X, resp, params)
            resp = e_step(params, X)
            new = joint_divergence_objective(X, resp, params)
            trace.append(new, after_m_step=mid, loglik=-new)
            if obj - new < config.tol:
                trace.converged = True
                break
            obj = new
    except DomainError as exc:
        raise FitError(f"em aborted: {exc}", trace) from exc
    return replace(params), trace

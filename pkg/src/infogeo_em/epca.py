"""Exponential-family PCA in dual coordinates.

A data point is an exponential-family member, carried as its natural
coordinate ``theta`` and expectation coordinate ``eta``. e-PCA fits an affine
subspace in ``theta``,

    theta_hat_i = sum_k w_ik u_k,   sum_k w_ik = 1,

by minimizing ``L = sum_i D(p_i, p_hat_i)`` (KL, data point first). Its
gradients are ``dL/dw_ik = u_k . (eta_hat_i - eta_i)`` and
``dL/du_k = sum_i w_ik (eta_hat_i - eta_i)``. m-PCA swaps the roles: the
subspace is affine in ``eta``, the loss is ``sum_i D(p_hat_i, p_i)`` and the
residual is ``theta_hat_i - theta_i``.

With ``K = 1`` the optimum is the e-center ``theta(mean eta_i)`` for e-PCA
and the m-center ``eta(mean theta_i)`` for m-PCA.

Two families are supported: categorical on ``d`` letters (coordinates
relative to the last letter, dimension ``d - 1``) and the Gaussian with known
variance (dimension 1, ``eta`` is the mean, ``theta = mean / variance``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._base import DomainError, Trace

CATEGORICAL = "categorical"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class ExpFamilySpec:
    kind: str
    d: int = 2
    variance: float = 1.0

    def __post_init__(self):
        if self.kind == CATEGORICAL and self.d < 2:
            raise DomainError(f"categorical family needs d >= 2, got {self.d}")
        if self.kind == GAUSSIAN and not self.variance > 0:
            raise DomainError(f"variance must be positive, got {self.variance}")
        if self.kind not in (CATEGORICAL, GAUSSIAN):
            raise DomainError(f"unknown family {self.kind!r}")

    @classmethod
    def categorical(cls, d: int) -> "ExpFamilySpec":
        return cls(CATEGORICAL, d=int(d))

    @classmethod
    def gaussian(cls, variance: float = 1.0) -> "ExpFamilySpec":
        return cls(GAUSSIAN, d=2, variance=float(variance))

    @property
    def dim(self) -> int:
        return self.d - 1 if self.kind == CATEGORICAL else 1


def _vec(spec: ExpFamilySpec, v, name: str) -> np.ndarray:
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.shape[-1] != spec.dim:
        raise DomainError(f"{name} must have {spec.dim} coordinate(s), got {a.shape[-1]}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    return a


def in_eta_domain(spec: ExpFamilySpec, eta: np.ndarray) -> np.ndarray:
    """Row-wise interior test for expectation coordinates."""
    eta = np.atleast_2d(eta)
    if spec.kind == GAUSSIAN:
        return np.all(np.isfinite(eta), axis=-1)
    return np.all(eta > 0, axis=-1) & (eta.sum(axis=-1) < 1)


def theta_to_eta(spec: ExpFamilySpec, theta) -> np.ndarray:
    """Expectation coordinates: softmax against a zero reference, or ``variance * theta``."""
    theta = _vec(spec, theta, "theta")
    if spec.kind == GAUSSIAN:
        return spec.variance * theta
    ext = np.concatenate([theta, np.zeros(theta.shape[:-1] + (1,))], axis=-1)
    return np.exp(theta - logsumexp(ext, axis=-1, keepdims=True))


def eta_to_theta(spec: ExpFamilySpec, eta) -> np.ndarray:
    """Natural coordinates; inverse of :func:`theta_to_eta`."""
    eta = _vec(spec, eta, "eta")
    if spec.kind == GAUSSIAN:
        return eta / spec.variance
    if not np.all(in_eta_domain(spec, eta)):
        raise DomainError("eta lies on or outside the boundary of the simplex")
    last = 1.0 - eta.sum(axis=-1, keepdims=True)
    return np.log(eta) - np.log(last)


def log_partition(spec: ExpFamilySpec, theta) -> np.ndarray:
    theta = _vec(spec, theta, "theta")
    if spec.kind == GAUSSIAN:
        return 0.5 * spec.variance * (theta ** 2).sum(axis=-1)
    ext = np.concatenate([theta, np.zeros(theta.shape[:-1] + (1,))], axis=-1)
    return logsumexp(ext, axis=-1)


def kl_natural(spec: ExpFamilySpec, theta_p, theta_q) -> np.ndarray:
    """``D(p, q)`` for members given by natural coordinates (row-wise)."""
    theta_p = _vec(spec, theta_p, "theta_p")
    theta_q = _vec(spec, theta_q, "theta_q")
    eta_p = theta_to_eta(spec, theta_p)
    return (log_partition(spec, theta_q) - log_partition(spec, theta_p)
            - (eta_p * (theta_q - theta_p)).sum(axis=-1))


@dataclass(frozen=True)
class DualPoint:
    theta: np.ndarray
    eta: np.ndarray

    @classmethod
    def from_theta(cls, spec: ExpFamilySpec, theta) -> "DualPoint":
        theta = _vec(spec, theta, "theta").ravel()
        return cls(theta, theta_to_eta(spec, theta))

    @classmethod
    def from_eta(cls, spec: ExpFamilySpec, eta) -> "DualPoint":
        eta = _vec(spec, eta, "eta").ravel()
        return cls(eta_to_theta(spec, eta), eta)


def _stack(spec: ExpFamilySpec, points) -> tuple[np.ndarray, np.ndarray]:
    pts = list(points)
    if not pts:
        raise DomainError("need at least one point")
    theta = np.vstack([_vec(spec, p.theta, "theta") for p in pts])
    eta = np.vstack([_vec(spec, p.eta, "eta") for p in pts])
    return theta, eta


def e_center(spec: ExpFamilySpec, points) -> DualPoint:
    """Point whose ``eta`` is the mean of the inputs' ``eta``."""
    _, eta = _stack(spec, points)
    return DualPoint.from_eta(spec, eta.mean(axis=0))


def m_center(spec: ExpFamilySpec, points) -> DualPoint:
    """Point whose ``theta`` is the mean of the inputs' ``theta``."""
    theta, _ = _stack(spec, points)
    return DualPoint.from_theta(spec, theta.mean(axis=0))


@dataclass
class Subspace:
    """Affine subspace ``{sum_k w_k b_k : sum_k w_k = 1}`` with per-point weights.

    ``coords`` is ``"theta"`` for e-PCA (basis of natural vectors) and
    ``"eta"`` for m-PCA (basis of expectation vectors).
    """

    basis: np.ndarray  # (K, dim)
    weights: np.ndarray  # (N, K)
    coords: str = "theta"

    def __post_init__(self):
        self.basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if self.coords not in ("theta", "eta"):
            raise DomainError(f"coords must be 'theta' or 'eta', got {self.coords!r}")
        if self.weights.shape[1] != self.basis.shape[0]:
            raise DomainError("weights and basis disagree on K")
        if not np.allclose(self.weights.sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise DomainError("every weight row must sum to 1")

    def reconstruction(self) -> np.ndarray:
        return self.weights @ self.basis


def _hat(spec: ExpFamilySpec, coords: str, R: np.ndarray):
    # (theta_hat, eta_hat) for reconstructions R in the given coordinates;
    # None when a reconstruction leaves the domain.
    if coords == "theta":
        return R, theta_to_eta(spec, R)
    if not np.all(in_eta_domain(spec, R)):
        return None
    return eta_to_theta(spec, R), R


def _loss(spec, coords, R, theta, eta) -> float:
    hat = _hat(spec, coords, R)
    if hat is None:
        return math.inf
    th, _ = hat
    d = kl_natural(spec, theta, th) if coords == "theta" else kl_natural(spec, th, theta)
    return math.fsum(np.maximum(d, 0.0))


def pca_loss(spec: ExpFamilySpec, sub: Subspace, points) -> float:
    """``sum_i D(p_i, p_hat_i)`` (e-PCA) or ``sum_i D(p_hat_i, p_i)`` (m-PCA)."""
    theta, eta = _stack(spec, points)
    return _loss(spec, sub.coords, sub.reconstruction(), theta, eta)


def _residual(spec, coords, R, theta, eta) -> np.ndarray:
    hat = _hat(spec, coords, R)
    if hat is None:
        raise DomainError("a reconstruction lies outside the parameter domain")
    th, et = hat
    return et - eta if coords == "theta" else th - theta


def _tangent(G: np.ndarray) -> np.ndarray:
    return G - G.mean(axis=1, keepdims=True)


def epca_gradients(spec: ExpFamilySpec, sub: Subspace, points):
    """Gradients of the PCA loss with respect to the weights and the basis.

    Returns ``(dL_dw, dL_du)``. ``dL_dw`` is projected onto the tangent of
    the affine constraint, so each of its rows sums to zero. For a subspace
    with ``coords="eta"`` the m-PCA gradients are returned.
    """
    theta, eta = _stack(spec, points)
    if sub.weights.shape[0] != theta.shape[0]:
        raise DomainError(f"subspace has {sub.weights.shape[0]} weight rows for {theta.shape[0]} points")
    Res = _residual(spec, sub.coords, sub.reconstruction(), theta, eta)
    return _tangent(Res @ sub.basis.T), sub.weights.T @ Res


@dataclass(frozen=True)
class EpcaConfig:
    tol: float = 1e-12
    max_iters: int = 300
    inner_iters: int = 50
    gtol: float = 1e-11
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0 or self.max_iters < 0 or self.inner_iters < 1:
            raise DomainError("invalid EpcaConfig")


def _descend(f, grad, x, iters: int, gtol: float):
    """Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.

    ``f`` returns ``inf`` outside the domain, which the line search rejects.
    Returns ``(x, fx, stalled)``.
    """
    fx = f(x)
    g = grad(x)
    alpha = 1.0
    for _ in range(iters):
        gg = float((g * g).sum())
        if math.sqrt(gg) < gtol:
            return x, fx, False
        step = alpha
        while True:
            cand = x - step * g
            fc = f(cand)
            if fc <= fx - 1e-4 * step * gg:
                break
            step *= 0.5
            if step < 1e-20:
                return x, fx, True
        g_new = grad(cand)
        s, yv = cand - x, g_new - g
        sy = float((s * yv).sum())
        alpha = float((s * s).sum()) / sy if sy > 0 else 2.0 * step
        x, fx, g = cand, fc, g_new
    return x, fx, False


def _fit(spec, points, K, config, coords):
    theta, eta = _stack(spec, points)
    N = theta.shape[0]
    if not 1 <= K <= N:
        raise DomainError(f"need 1 <= K <= N = {N}, got K={K}")
    X = theta if coords == "theta" else eta
    rng = np.random.default_rng(config.seed)
    uniq_idx = np.unique(X, axis=0, return_index=True)[1]
    if uniq_idx.size < K:
        raise DomainError(f"need K={K} distinct points, have {uniq_idx.size}")
    chosen = np.sort(rng.choice(np.sort(uniq_idx), size=K, replace=False))
    basis = X[chosen].copy()
    W = np.full((N, K), 1.0 / K)
    for k, i in enumerate(chosen):
        W[i] = 0.0
        W[i, k] = 1.0

    def loss_w(Wv, B):
        return _loss(spec, coords, Wv @ B, theta, eta)

    def grad_w(Wv, B):
        return _tangent(_residual(spec, coords, Wv @ B, theta, eta) @ B.T)

    def grad_b(B, Wv):
        return Wv.T @ _residual(spec, coords, Wv @ B, theta, eta)

    trace = Trace("decreasing")
    L = loss_w(W, basis)
    trace.append(L)
    for _ in range(config.max_iters):
        stalled_w = stalled_b = False
        if K > 1:
            W, _, stalled_w = _descend(lambda v: loss_w(v, basis), lambda v: grad_w(v, basis),
                                       W, config.inner_iters, config.gtol)
        basis, L_new, stalled_b = _descend(lambda b: loss_w(W, b), lambda b: grad_b(b, W),
                                           basis, config.inner_iters, config.gtol)
        trace.append(L_new)
        gnorm = max(np.abs(grad_w(W, basis)).max(initial=0.0), np.abs(grad_b(basis, W)).max())
        if gnorm < config.gtol or L - L_new < config.tol * (1.0 + L_new) or (stalled_w and stalled_b):
            trace.converged = True
            break
        L = L_new
    return Subspace(basis, W, coords), trace


def fit_epca(spec: ExpFamilySpec, points, K: int, config: EpcaConfig | None = None):
    """e-PCA: alternate weight and basis updates for a ``theta``-affine subspace.

    Returns ``(subspace, trace)`` with the loss recorded per outer iteration.
    The basis starts at ``K`` distinct input points chosen with
    ``config.seed``.
    """
    return _fit(spec, points, K, config or EpcaConfig(), "theta")


def fit_mpca(spec: ExpFamilySpec, points, K: int, config: EpcaConfig | None = None):
    """m-PCA: as :func:`fit_epca` with an ``eta``-affine subspace and reversed KL."""
    return _fit(spec, points, K, config or EpcaConfig(), "eta")

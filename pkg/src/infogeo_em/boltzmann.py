"""Exact Boltzmann machine learning at enumeration scale.

The machine family has pairwise interactions only (no bias terms):

    B(z) ∝ exp(sum_{i<j} w_ij z_i z_j),  z in {0,1}^n.

States are indexed by the integer whose binary expansion is ``z_1 z_2 ... z_n``
(``z_1`` most significant), with the visible units first, so a joint index
is ``x_index * 2**h + y_index``.

Learning with hidden units alternates

* the e-step :func:`project_to_data`, ``P(x, y) = P^(x) B(y|x)``, the closest
  point of the set of joints with visible marginal ``P^``, and
* the m-step :func:`fit_weights_to_joint`, the maximum-likelihood machine for
  that joint (moment matching of ``E[z_i z_j]``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._base import DomainError, FitError, Trace
from .geometry import as_probability, kl_divergence

MAX_UNITS = 20


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-10
    max_iters: int = 200
    outer_tol: float = 1e-12
    outer_max_iters: int = 500


@dataclass
class BoltzmannParams:
    """``n_visible + n_hidden`` units with upper-triangular weights ``w``."""

    n_visible: int
    n_hidden: int
    w: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.n_visible + self.n_hidden
        if self.n_visible < 0 or self.n_hidden < 0 or n < 1:
            raise DomainError("unit counts must be nonnegative with at least one unit")
        if n > MAX_UNITS:
            raise DomainError(f"enumeration bound exceeded: {n} units > {MAX_UNITS}")
        w = np.zeros((n, n)) if self.w is None else np.array(self.w, dtype=float)
        if w.shape != (n, n):
            raise DomainError(f"weights must be {n} x {n}, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite")
        self.w = np.triu(w, 1)

    @property
    def n(self) -> int:
        return self.n_visible + self.n_hidden

    def pair_weights(self) -> np.ndarray:
        i, j = np.triu_indices(self.n, 1)
        return self.w[i, j]

    @classmethod
    def from_pairs(cls, n_visible: int, n_hidden: int, values) -> "BoltzmannParams":
        n = n_visible + n_hidden
        w = np.zeros((n, n))
        w[np.triu_indices(n, 1)] = np.asarray(values, dtype=float)
        return cls(n_visible, n_hidden, w)


def states(n: int) -> np.ndarray:
    """All ``2**n`` binary states as rows, ``z_1`` most significant."""
    if n > MAX_UNITS:
        raise DomainError(f"enumeration bound exceeded: {n} units > {MAX_UNITS}")
    idx = np.arange(2 ** n)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(float)


def pair_statistics(n: int) -> np.ndarray:
    """``z_i z_j`` for every state (rows) and pair ``i < j`` (columns)."""
    Z = states(n)
    i, j = np.triu_indices(n, 1)
    return Z[:, i] * Z[:, j]


def _log_probs(S: np.ndarray, wv: np.ndarray) -> np.ndarray:
    e = S @ wv
    m = e.max()
    return e - (m + math.log(math.fsum(np.exp(e - m))))


def bm_distribution(params: BoltzmannParams) -> np.ndarray:
    """Exact joint distribution over ``{0,1}^n``."""
    return np.exp(_log_probs(pair_statistics(params.n), params.pair_weights()))


def visible_marginal(P, n_visible: int, n_hidden: int) -> np.ndarray:
    return np.asarray(P, dtype=float).reshape(2 ** n_visible, 2 ** n_hidden).sum(axis=1)


def project_to_data(P_hat, params: BoltzmannParams) -> np.ndarray:
    """``P(x, y) = P^(x) B(y | x)``: the joint with visible marginal ``P^`` closest to ``B``."""
    P_hat = as_probability(P_hat, tol=1e-9, name="visible distribution")
    if P_hat.size != 2 ** params.n_visible:
        raise DomainError(f"visible distribution has {P_hat.size} states, expected {2 ** params.n_visible}")
    B = bm_distribution(params).reshape(2 ** params.n_visible, 2 ** params.n_hidden)
    cond = B / B.sum(axis=1, keepdims=True)
    return (P_hat[:, None] * cond).ravel()


def _ascend(P: np.ndarray, S: np.ndarray, wv: np.ndarray, tol: float, max_iters: int):
    # Fisher-scoring ascent on sum_z P(z) log B(z) with backtracking. The
    # gradient is the moment gap E_P[s] - E_B[s]; the Fisher matrix is Cov_B[s].
    target = P @ S
    logB = _log_probs(S, wv)
    ll = float(P @ logB)
    for _ in range(max_iters):
        B = np.exp(logB)
        mean = B @ S
        g = target - mean
        if np.abs(g).max() < tol:
            return wv, True
        C = (S - mean).T @ ((S - mean) * B[:, None])
        try:
            d = np.linalg.solve(C + 1e-12 * np.eye(C.shape[0]), g)
        except np.linalg.LinAlgError:
            d = g
        if not float(g @ d) > 0:
            d = g
        step = 1.0
        gap = np.abs(g).max()
        while True:
            cand = wv + step * d
            logc = _log_probs(S, cand)
            llc = float(P @ logc)
            if llc >= ll + 1e-4 * step * float(g @ d):
                break
            # near the optimum the likelihood is flat to rounding; accept a
            # step that still shrinks the moment gap
            flat = llc >= ll - 8 * np.finfo(float).eps * max(1.0, abs(ll))
            if flat and np.abs(target - np.exp(logc) @ S).max() < gap:
                break
            step *= 0.5
            if step < 1e-16:
                return wv, False
        wv, logB, ll = cand, logc, llc
    B = np.exp(logB)
    return wv, bool(np.abs(target - B @ S).max() < tol)


def fit_weights_to_joint(P, init: BoltzmannParams, config: FitConfig | None = None) -> BoltzmannParams:
    """Maximum-likelihood machine for a fully observed joint ``P``.

    Stops when every moment gap ``|E_P[z_i z_j] - E_B[z_i z_j]|`` is below
    ``config.tol``. Raises :class:`FitError` if that is not reached within
    ``config.max_iters`` steps, which happens when the moments of ``P`` lie
    on the boundary of what the family can express (weights diverge).
    """
    config = config or FitConfig()
    n = init.n
    P = as_probability(P, tol=1e-9, name="joint distribution")
    if P.size != 2 ** n:
        raise DomainError(f"joint distribution has {P.size} states, expected {2 ** n}")
    S = pair_statistics(n)
    if S.shape[1] == 0:
        return BoltzmannParams(init.n_visible, init.n_hidden)
    wv, ok = _ascend(P, S, init.pair_weights(), config.tol, config.max_iters)
    if not ok:
        raise FitError(
            f"moment matching did not reach tol={config.tol:g} "
            f"(max |w| = {np.abs(wv).max():.3g}); the target moments may lie on the boundary")
    return BoltzmannParams.from_pairs(init.n_visible, init.n_hidden, wv)


def fit_bm_em(P_hat, n_visible: int, n_hidden: int, config: FitConfig | None = None):
    """Learn a machine with hidden units by alternating projections from ``w = 0``.

    Returns ``(params, trace)``. Each trace record holds ``D(P_t, B_t)``
    after the e-step and, from iteration 1 on, ``after_m_step``, the value
    ``D(P_{t-1}, B_t)`` reached by the preceding m-step. Both half-steps are
    non-increasing. Iteration stops when the divergence decreases by less
    than ``config.outer_tol``.
    """
    config = config or FitConfig()
    params = BoltzmannParams(n_visible, n_hidden)
    P_hat = as_probability(P_hat, tol=1e-9, name="visible distribution")
    if P_hat.size != 2 ** n_visible:
        raise DomainError(f"visible distribution has {P_hat.size} states, expected {2 ** n_visible}")
    S = pair_statistics(params.n)
    trace = Trace("decreasing")
    try:
        P = project_to_data(P_hat, params)
        D = kl_divergence(P, bm_distribution(params))
        trace.append(D)
        for _ in range(config.outer_max_iters):
            wv = params.pair_weights()
            if S.shape[1]:
                wv, _ = _ascend(P, S, wv, config.tol, config.max_iters)
            params = BoltzmannParams.from_pairs(n_visible, n_hidden, wv)
            B = bm_distribution(params)
            mid = kl_divergence(P, B)
            P = project_to_data(P_hat, params)
            new = kl_divergence(P, B)
            trace.append(new, after_m_step=mid)
            if n_hidden == 0 or D - new < config.outer_tol:
                trace.converged = True
                break
            D = new
    except DomainError as exc:
        raise FitError(f"Boltzmann em aborted: {exc}", trace) from exc
    return params, trace

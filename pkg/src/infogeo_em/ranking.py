"""Bradley-Terry preference estimation by alternating projections.

Each observed pair ``(n_ij, n_ji)`` defines an m-flat data manifold
``D_ij = {P : p_i : p_j = n_ij : n_ji}`` inside the simplex of preference
vectors. One iteration e-projects the current ``Q`` onto every ``D_ij`` and
then m-projects the collection back, which for KL in the second argument is
the arithmetic mean. The objective

    F(Q) = (1/N) sum_{pairs} min_{P in D_ij} D(P, Q)

is non-increasing. Its minimizer is a consistent estimate but not the
maximum-likelihood estimate in general; :func:`bt_log_likelihood` allows the
two to be compared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from ._base import DomainError, EmConfig, FitError, Trace
from .geometry import as_probability


def as_counts(counts) -> np.ndarray:
    """Validate a square matrix of nonnegative integer win counts."""
    n = np.asarray(counts, dtype=float)
    if n.ndim != 2 or n.shape[0] != n.shape[1] or n.shape[0] < 2:
        raise DomainError(f"counts must be an N x N matrix with N >= 2, got shape {n.shape}")
    if not np.all(np.isfinite(n)):
        raise DomainError("counts contain non-finite entries")
    if np.any(n < 0):
        i, j = np.argwhere(n < 0)[0]
        raise DomainError(f"negative count n[{i}][{j}] = {n[i, j]:g}")
    if np.any(n != np.round(n)):
        i, j = np.argwhere(n != np.round(n))[0]
        raise DomainError(f"non-integer count n[{i}][{j}] = {n[i, j]!r}")
    if np.any(np.diag(n) != 0):
        raise DomainError("diagonal counts must be zero")
    return n


def _as_params(Q, N: int | None = None) -> np.ndarray:
    theta = as_probability(Q, tol=1e-9, name="theta")
    if np.any(theta <= 0):
        raise DomainError("preference parameters must be strictly positive")
    if N is not None and theta.size != N:
        raise DomainError(f"theta has {theta.size} items, counts have {N}")
    return theta


def observed_pairs(counts) -> list[tuple[int, int]]:
    """Unordered pairs ``i < j`` compared at least once."""
    n = as_counts(counts)
    tot = n + n.T
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(np.triu(tot, 1)))]


def _pair_projection(theta: np.ndarray, i: int, j: int, nij: float, nji: float):
    # Inside D_ij write p_i = r s, p_j = (1 - r) s. Minimizing over s shows the
    # pair acts as a single item of weight g = (t_i / r)^r (t_j / (1-r))^(1-r),
    # so P is Q with (t_i, t_j) replaced by (r g, (1 - r) g), renormalized, and
    # min D(P, Q) = -log(1 - t_i - t_j + g).
    r = nij / (nij + nji)
    logg = 0.0
    if r > 0:
        logg += r * (math.log(theta[i]) - math.log(r))
    if r < 1:
        logg += (1 - r) * (math.log(theta[j]) - math.log(1 - r))
    g = math.exp(logg)
    P = theta.copy()
    P[i] = r * g
    P[j] = (1 - r) * g
    excess = g - theta[i] - theta[j]
    return P / (1.0 + excess), -math.log1p(excess)


def e_project_pair(Q, i: int, j: int, counts) -> np.ndarray:
    """e-projection of ``Q`` onto the data manifold of pair ``(i, j)``.

    Returns ``argmin_{P in D_ij} D(P, Q)``. A one-sided pair (one count zero)
    pushes the losing item to the simplex boundary and is rejected.
    """
    n = as_counts(counts)
    theta = _as_params(Q, n.shape[0])
    nij, nji = n[i, j], n[j, i]
    if i == j:
        raise DomainError("a pair needs two distinct items")
    if nij + nji == 0:
        raise DomainError(f"items {i} and {j} were never compared")
    if nij == 0 or nji == 0:
        raise DomainError(
            f"one-sided counts for pair ({i}, {j}) leave the open simplex; use smoothing")
    return _pair_projection(theta, i, j, nij, nji)[0]


def m_step_mean(projections) -> np.ndarray:
    """Arithmetic mean, the minimizer of ``sum D(P_ij, Q)`` over ``Q``."""
    P = [as_probability(p, tol=1e-9) for p in projections]
    if not P:
        raise DomainError("m-step needs at least one projection")
    if len({p.size for p in P}) != 1:
        raise DomainError("projections differ in dimension")
    M = np.vstack(P)
    mean = np.array([math.fsum(col) for col in M.T]) / len(P)
    return mean / math.fsum(mean)


def bt_log_likelihood(counts, Q) -> float:
    """``L(Q) = sum_{i != j} n_ij log(theta_i / (theta_i + theta_j))``."""
    n = as_counts(counts)
    theta = _as_params(Q, n.shape[0])
    i, j = np.nonzero(n)
    return math.fsum(n[i, j] * (np.log(theta[i]) - np.log(theta[i] + theta[j])))


def pl_probability(ranking, Q) -> float:
    """Plackett-Luce probability of ``ranking`` (best first, 0-based item ids).

    ``ranking`` may cover a subset of the items; only those items enter the
    normalizers.
    """
    theta = _as_params(Q)
    a = [int(k) for k in ranking]
    if len(set(a)) != len(a):
        raise DomainError(f"ranking {a} repeats an item")
    if any(k < 0 or k >= theta.size for k in a):
        raise DomainError(f"ranking {a} references an unknown item")
    t = theta[a]
    tails = np.cumsum(t[::-1])[::-1]
    return float(np.prod(t[:-1] / tails[:-1])) if len(a) > 1 else 1.0


@dataclass(frozen=True)
class PairData:
    pairs: list[tuple[int, int]]
    wins: list[tuple[float, float]]


def _prepare(counts, smoothing: float) -> tuple[np.ndarray, PairData]:
    n = as_counts(counts)
    pairs = observed_pairs(n)
    if not pairs:
        raise DomainError("no observed comparisons")
    tot = n + n.T
    ncomp, _ = connected_components(tot > 0, directed=False)
    if ncomp > 1:
        raise DomainError(
            f"parameters unidentifiable across components: comparison graph has {ncomp} components")
    wins = []
    for i, j in pairs:
        a, b = n[i, j] + smoothing, n[j, i] + smoothing
        if a == 0 or b == 0:
            raise DomainError(
                f"one-sided counts for pair ({i}, {j}) leave the open simplex; use smoothing")
        wins.append((a, b))
    return n, PairData(pairs, wins)


def _project_all(theta: np.ndarray, data: PairData):
    Ps, Ds = [], []
    for (i, j), (a, b) in zip(data.pairs, data.wins):
        P, d = _pair_projection(theta, i, j, a, b)
        Ps.append(P)
        Ds.append(max(d, 0.0))
    return Ps, math.fsum(Ds) / len(Ds)


def f_objective(counts, Q, smoothing: float = 0.0) -> float:
    """Average divergence ``F(Q)`` from ``Q`` to the observed data manifolds."""
    n, data = _prepare(counts, smoothing)
    return _project_all(_as_params(Q, n.shape[0]), data)[1]


def fit_bt_em(counts, init=None, config: EmConfig | None = None, smoothing: float = 0.0):
    """Fit Bradley-Terry preferences by alternating e- and m-projections.

    Parameters
    ----------
    counts : (N, N) array_like
        ``counts[i][j]`` is the number of times item ``i`` beat item ``j``.
    init : array_like, optional
        Starting preference vector; uniform by default.
    config : EmConfig, optional
        Stops when ``F`` decreases by less than ``tol`` or after ``max_iters``.
    smoothing : float
        Pseudo-count added to both directions of every observed pair.

    Returns
    -------
    theta : ndarray
        Fitted preference vector on the simplex.
    trace : Trace
        ``F(Q_t)`` per iteration.
    """
    config = config or EmConfig()
    if smoothing < 0:
        raise DomainError(f"smoothing must be >= 0, got {smoothing}")
    n, data = _prepare(counts, smoothing)
    N = n.shape[0]
    theta = np.full(N, 1.0 / N) if init is None else _as_params(init, N)
    trace = Trace("decreasing")
    try:
        Ps, F = _project_all(theta, data)
        trace.append(F)
        for _ in range(config.max_iters):
            prev, theta = theta, m_step_mean(Ps)
            if np.any(theta <= 0):
                raise DomainError("preference vector left the open simplex")
            Ps, F_new = _project_all(theta, data)
            trace.append(F_new)
            if config.done(F - F_new, float(np.abs(theta - prev).max())):
                trace.converged = True
                break
            F = F_new
    except DomainError as exc:
        raise FitError(f"Bradley-Terry em aborted: {exc}", trace) from exc
    return theta, trace

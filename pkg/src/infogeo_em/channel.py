"""Capacity of discrete memoryless channels.

The capacity is computed with the Arimoto update, which multiplies each input
probability by ``exp D(r(.|x), r_q)`` and renormalizes. Geometrically this is
the tractable approximation of a backward em iteration between the m-flat set
of joint laws ``q(x) r(y|x)`` and the e-flat set of product laws
``q~(x) r(y)``; the exact backward step is not implemented.

At the optimum every input letter in the support of ``q`` has the same
divergence ``D(r(.|x), r_q) = C`` and letters outside the support have at most
``C``. :func:`verify_capacity` checks this independently of the iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._base import DomainError, Trace
from .geometry import as_probability

ROW_TOL = 1e-12


def as_channel(matrix, tol: float = ROW_TOL) -> np.ndarray:
    """Validate a row-stochastic matrix ``r(y|x)`` (rows are input letters)."""
    W = np.asarray(matrix, dtype=float)
    if W.ndim != 2 or 0 in W.shape:
        raise DomainError(f"channel must be a non-empty 2-D matrix, got shape {W.shape}")
    return np.vstack([as_probability(row, tol=tol, name=f"channel row {x}")
                      for x, row in enumerate(W)])


def output_marginal(q, ch) -> np.ndarray:
    """Output law ``r_q(y) = sum_x q(x) r(y|x)``."""
    q = as_probability(q, name="q")
    W = as_channel(ch)
    if q.size != W.shape[0]:
        raise DomainError(f"input law has {q.size} letters, channel has {W.shape[0]}")
    return q @ W


def _row_divergences(W: np.ndarray, r: np.ndarray) -> np.ndarray:
    # D(r(.|x), r) for every x; +inf where a row puts mass outside supp(r).
    out = np.empty(W.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        for x, row in enumerate(W):
            pos = row > 0
            if np.any(r[pos] == 0):
                out[x] = np.inf
            else:
                out[x] = math.fsum(row[pos] * (np.log(row[pos]) - np.log(r[pos])))
    return np.maximum(out, 0.0)


def letter_divergences(q, ch) -> np.ndarray:
    """Per-letter divergences ``D(r(.|x), r_q)``; infinite off the reachable support."""
    q = as_probability(q, name="q")
    W = as_channel(ch)
    if q.size != W.shape[0]:
        raise DomainError(f"input law has {q.size} letters, channel has {W.shape[0]}")
    return _row_divergences(W, q @ W)


def _mi(q: np.ndarray, d: np.ndarray) -> float:
    pos = q > 0
    return max(math.fsum(q[pos] * d[pos]), 0.0)


def mutual_information(q, ch) -> float:
    """Mutual information ``I = sum_x q(x) D(r(.|x), r_q)`` in nats."""
    q = as_probability(q, name="q")
    return _mi(q, letter_divergences(q, ch))


def _arimoto(q: np.ndarray, d: np.ndarray) -> np.ndarray:
    pos = q > 0
    logs = np.full(q.shape, -np.inf)
    logs[pos] = np.log(q[pos]) + d[pos]
    w = np.exp(logs - logs[pos].max())
    return w / math.fsum(w)


def arimoto_step(q, ch) -> np.ndarray:
    """One Arimoto update ``q'(x) ∝ q(x) exp D(r(.|x), r_q)``.

    Zero-probability letters stay at zero.
    """
    q = as_probability(q, name="q")
    return _arimoto(q, letter_divergences(q, ch))


@dataclass(frozen=True)
class CapacityConfig:
    tol: float = 1e-10
    max_iters: int = 10_000

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class CapacityResult:
    capacity: float
    input_dist: np.ndarray
    iterations: int
    certificate_gap: float
    converged: bool
    trace: Trace = field(repr=False, default_factory=lambda: Trace("increasing"))

    @property
    def capacity_bits(self) -> float:
        return self.capacity / math.log(2)


def capacity(ch, config: CapacityConfig | None = None) -> CapacityResult:
    """Channel capacity (nats) by Arimoto iteration from the uniform input.

    Iteration stops once the certificate gap
    ``max_x D(r(.|x), r_q) - I(q)`` falls below ``config.tol``; the true
    capacity is always bracketed by ``[I(q), max_x D(r(.|x), r_q)]``. The
    trace records the mutual information with both bounds per iteration.
    If ``max_iters`` is exhausted the result has ``converged=False``.
    """
    config = config or CapacityConfig()
    W = as_channel(ch)
    q = np.full(W.shape[0], 1.0 / W.shape[0])
    trace = Trace("increasing")
    converged = False
    it = 0
    while True:
        d = _row_divergences(W, q @ W)
        lower = _mi(q, d)
        upper = float(d.max())
        gap = max(upper - lower, 0.0)
        trace.append(lower, lower_bound=lower, upper_bound=upper)
        if gap < config.tol:
            converged = True
            break
        if it >= config.max_iters:
            break
        q = _arimoto(q, d)
        it += 1
    trace.converged = converged
    return CapacityResult(lower, q, it, gap, converged, trace)


def verify_capacity(ch, q, C: float, tol: float) -> bool:
    """Check the capacity-attainment conditions for ``(q, C)``.

    Letters with ``q(x) > tol`` must satisfy ``|D(r(.|x), r_q) - C| < tol``;
    the remaining letters need ``D(r(.|x), r_q) <= C + tol``.
    """
    q = as_probability(q, name="q")
    d = letter_divergences(q, ch)
    active = q > tol
    return bool(np.all(np.abs(d[active] - C) < tol) and np.all(d[~active] <= C + tol))

"""KL divergence and geodesics on the finite probability simplex.

Every probability vector handled here is a 1-D float array with nonnegative
entries summing to one. Divergences are in nats.
"""

from __future__ import annotations

import math

import numpy as np

from ._base import DomainError

SUM_TOL = 1e-12


def as_probability(v, tol: float = SUM_TOL, name: str = "p") -> np.ndarray:
    """Validate ``v`` as a probability vector and renormalize away round-off.

    Raises
    ------
    DomainError
        If ``v`` is not 1-D, has a negative or non-finite entry, or its sum
        differs from one by more than ``tol``.
    """
    p = np.asarray(v, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError(f"{name} has non-finite entries")
    if np.any(p < 0):
        k = int(np.flatnonzero(p < 0)[0])
        raise DomainError(f"{name}[{k}] = {p[k]!r} is negative")
    s = math.fsum(p)
    if abs(s - 1.0) > tol:
        raise DomainError(f"{name} sums to {s!r}, not 1 (tolerance {tol:g})")
    return p / s


def normalize(v) -> np.ndarray:
    """Scale a nonnegative vector to unit sum.

    The vector is first divided by its largest entry so that tiny (even
    subnormal) inputs normalize without underflow.
    """
    x = np.asarray(v, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError(f"expected a non-empty 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("vector has non-finite entries")
    if np.any(x < 0):
        k = int(np.flatnonzero(x < 0)[0])
        raise DomainError(f"entry {k} = {x[k]!r} is negative")
    top = x.max()
    if top == 0:
        raise DomainError("cannot normalize an all-zero vector")
    x = x / top
    return x / math.fsum(x)


def _check_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = as_probability(p, name="p")
    q = as_probability(q, name="q")
    if p.shape != q.shape:
        raise DomainError(f"dimension mismatch: {p.size} vs {q.size}")
    return p, q


def _kl_terms(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # p log(p/q) - p + q, written as p * (t - 1 - log t) with t = q/p so every
    # term is nonnegative in floating point; on normalized inputs the extra
    # -p + q terms cancel in the sum.
    out = q.astype(float, copy=True)
    pos = p > 0
    if np.any(q[pos] == 0):
        k = int(np.flatnonzero(pos & (q == 0))[0])
        raise DomainError(
            f"infinite divergence (absolute-continuity violation) at index {k}")
    out[pos] = gen_kl_terms(p[pos], q[pos])
    return out


def gen_kl_terms(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``f log(f/g) - f + g`` for positive arrays, as ``f (t - 1 - log t)``, ``t = g/f``."""
    x = g / f - 1.0
    # log1p is accurate near t = 1; far below it (or when g/f underflows) take
    # log t from the separate logs instead
    far = x < -0.5
    logt = np.where(far, np.log(g) - np.log(f), np.log1p(np.where(far, 0.0, x)))
    return f * np.maximum(x - logt, 0.0)


def kl_divergence(p, q) -> float:
    """KL divergence ``D(p, q) = sum_k p_k log(p_k / q_k)`` in nats.

    Uses the convention ``0 log 0 = 0``. Raises :class:`DomainError` when
    ``p_k > 0`` and ``q_k = 0`` for some ``k``.
    """
    p, q = _check_pair(p, q)
    return math.fsum(_kl_terms(p, q))


def _endpoint(p0, q0, t: float) -> np.ndarray:
    # endpoints are returned exactly as given; renormalizing would move them
    # by an ulp
    return np.array(p0 if t == 0 else q0, dtype=float)


def m_interpolate(p, q, t: float) -> np.ndarray:
    """Point at parameter ``t`` on the mixture geodesic from ``p`` to ``q``."""
    p0, q0 = p, q
    p, q = _check_pair(p, q)
    t = _check_t(t)
    if t in (0, 1):
        return _endpoint(p0, q0, t)
    return (1.0 - t) * p + t * q


def e_interpolate(p, q, t: float) -> np.ndarray:
    """Point at parameter ``t`` on the exponential geodesic from ``p`` to ``q``.

    Returns the normalized vector proportional to ``p**(1-t) * q**t``,
    computed in the log domain. For ``0 < t < 1`` entries outside the common
    support of ``p`` and ``q`` are zero.
    """
    p0, q0 = p, q
    p, q = _check_pair(p, q)
    t = _check_t(t)
    if t in (0, 1):
        return _endpoint(p0, q0, t)
    common = (p > 0) & (q > 0)
    if not np.any(common):
        raise DomainError("p and q have no common support")
    logs = (1.0 - t) * np.log(p[common]) + t * np.log(q[common])
    w = np.exp(logs - logs.max())
    out = np.zeros_like(p)
    out[common] = w / math.fsum(w)
    return out


def e_normalizer(p, q, t: float) -> float:
    """Log normalizer ``a(t) = log sum_k p_k^(1-t) q_k^t`` of the e-geodesic."""
    p, q = _check_pair(p, q)
    t = _check_t(t)
    if t in (0.0, 1.0):
        return 0.0
    common = (p > 0) & (q > 0)
    if not np.any(common):
        raise DomainError("p and q have no common support")
    logs = (1.0 - t) * np.log(p[common]) + t * np.log(q[common])
    top = logs.max()
    return float(top + math.log(math.fsum(np.exp(logs - top))))


def pythagorean_residual(q, mid, p) -> float:
    """Return ``D(q, p) - D(q, mid) - D(mid, p)``.

    Vanishes when ``mid`` is the m-projection of ``q`` onto an e-flat set
    that contains ``p``.
    """
    return kl_divergence(q, p) - kl_divergence(q, mid) - kl_divergence(mid, p)


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"geodesic parameter t must lie in [0, 1], got {t}")
    return t

"""U-functions and the Bregman (u-) divergence they generate.

Three convex generators are supported::

    kind         U(z)                          u(z)              u*(zeta)
    exponential  exp(z)                        exp(z)            log(zeta)
    eta          exp(z) + eta*z                exp(z) + eta      log(zeta - eta)
    beta         (beta*z+1)^((beta+1)/beta)    (beta*z+1)^(1/beta)  (zeta^beta - 1)/beta
                 / (beta + 1)

``U*`` is the Legendre conjugate of ``U`` and ``u* = u^{-1}`` its derivative.
The exponential generator yields the (extended) KL divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._base import DomainError
from .geometry import as_probability, gen_kl_terms

EXPONENTIAL = "exponential"
ETA = "eta"
BETA = "beta"


@dataclass(frozen=True)
class UFunction:
    """A convex generator ``U``. Build with the class methods below.

    ``eta=0`` and ``beta=0`` both reduce to the exponential generator and are
    canonicalized to it.
    """

    kind: str = EXPONENTIAL
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in (EXPONENTIAL, ETA, BETA):
            raise DomainError(f"unknown U-function kind {self.kind!r}")
        if self.kind != EXPONENTIAL and not (self.param >= 0 and math.isfinite(self.param)):
            raise DomainError(f"{self.kind} parameter must be >= 0, got {self.param}")
        if self.kind != EXPONENTIAL and self.param == 0:
            object.__setattr__(self, "kind", EXPONENTIAL)
        if self.kind == EXPONENTIAL:
            object.__setattr__(self, "param", 0.0)

    @classmethod
    def exponential(cls) -> "UFunction":
        return cls(EXPONENTIAL)

    @classmethod
    def eta_type(cls, eta: float) -> "UFunction":
        return cls(ETA, float(eta))

    @classmethod
    def beta_type(cls, beta: float) -> "UFunction":
        return cls(BETA, float(beta))


def _out(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def _require(mask: np.ndarray, what: str, values: np.ndarray):
    if not np.all(mask):
        bad = np.flatnonzero(~np.atleast_1d(mask))[0]
        v = np.atleast_1d(values)[bad]
        raise DomainError(f"{what} (index {bad}, value {v!r})")


def u_forward(U: UFunction, z):
    """Evaluate ``u = U'`` at ``z``."""
    z = np.asarray(z, dtype=float)
    if U.kind == EXPONENTIAL:
        return _out(np.exp(z))
    if U.kind == ETA:
        return _out(np.exp(z) + U.param)
    b = U.param
    _require(b * z + 1 > 0, "beta-type u requires beta*z + 1 > 0", z)
    return _out(np.exp(np.log1p(b * z) / b))


def u_inverse(U: UFunction, zeta):
    """Evaluate ``u* = u^{-1}`` at ``zeta``."""
    zeta = np.asarray(zeta, dtype=float)
    if U.kind == ETA:
        _require(zeta > U.param, f"u* domain requires zeta > eta = {U.param}", zeta)
        return _out(np.log(zeta - U.param))
    _require(zeta > 0, "u* domain requires zeta > 0", zeta)
    if U.kind == EXPONENTIAL:
        return _out(np.log(zeta))
    b = U.param
    return _out(np.expm1(b * np.log(zeta)) / b)


def U_potential(U: UFunction, z):
    """The convex generator ``U(z)`` itself."""
    z = np.asarray(z, dtype=float)
    if U.kind == EXPONENTIAL:
        return _out(np.exp(z))
    if U.kind == ETA:
        return _out(np.exp(z) + U.param * z)
    b = U.param
    _require(b * z + 1 > 0, "beta-type U requires beta*z + 1 > 0", z)
    return _out(np.exp((b + 1) / b * np.log1p(b * z)) / (b + 1))


def U_conjugate(U: UFunction, zeta):
    """Legendre conjugate ``U*(zeta) = sup_z {z*zeta - U(z)}``."""
    zeta = np.asarray(zeta, dtype=float)
    if U.kind == ETA:
        _require(zeta > U.param, f"U* domain requires zeta > eta = {U.param}", zeta)
        a = zeta - U.param
        return _out(a * (np.log(a) - 1.0))
    _require(zeta > 0, "U* domain requires zeta > 0", zeta)
    if U.kind == EXPONENTIAL:
        return _out(zeta * (np.log(zeta) - 1.0))
    b = U.param
    return _out(zeta ** (b + 1) / (b * (b + 1)) - zeta / b)


def _beta_terms(f: np.ndarray, g: np.ndarray, b: float) -> np.ndarray:
    # f^(b+1)/(b(b+1)) + g^(b+1)/(b+1) - f g^b / b, factored by g^(b+1) with
    # x = log(f/g) so the b -> 0 limit is evaluated without 1/b blow-up.
    x = np.log(f) - np.log(g)
    inner = np.exp(x) * np.expm1(b * x) / b - np.expm1((b + 1) * x) / (b + 1)
    return np.maximum(g ** (b + 1) * inner, 0.0)


def bregman_terms(U: UFunction, p, q) -> np.ndarray:
    """Per-coordinate Bregman potentials ``d_U(p_k, q_k)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DomainError(f"dimension mismatch: {p.shape} vs {q.shape}")
    lo = U.param if U.kind == ETA else 0.0
    for name, v in (("p", p), ("q", q)):
        if not np.all(v > lo):
            k = int(np.flatnonzero(~(v > lo))[0])
            raise DomainError(
                f"{name}[{k}] = {v[k]!r} is outside the u* domain (must exceed {lo:g})")
    if U.kind == EXPONENTIAL:
        return gen_kl_terms(p, q)
    if U.kind == ETA:
        return gen_kl_terms(p - U.param, q - U.param)
    return _beta_terms(p, q, U.param)


def bregman_divergence(U: UFunction, p, q) -> float:
    """Bregman divergence ``D_U(p, q) = sum_k U*(p_k) + U(u*(q_k)) - p_k u*(q_k)``.

    Both arguments must be probability vectors whose entries lie inside the
    u* domain (strictly positive; strictly above ``eta`` for the eta type).
    Coordinates are accumulated with compensated summation.
    """
    p = as_probability(p, name="p")
    q = as_probability(q, name="q")
    return math.fsum(bregman_terms(U, p, q))

"""Shared exceptions, iteration traces and solver configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator


class InfoGeoError(ValueError):
    """Base class for all errors raised by this package."""


class DomainError(InfoGeoError):
    """An argument lies outside the domain of the operation."""


class FitError(InfoGeoError):
    """An iterative fit aborted; the partial trace is attached."""

    def __init__(self, message: str, trace: "Trace | None" = None):
        super().__init__(message)
        self.trace = trace


@dataclass
class TraceRecord:
    iteration: int
    objective: float
    extras: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"iter": self.iteration, "objective": self.objective, **self.extras}


@dataclass
class Trace:
    """Per-iteration record of the quantity an algorithm drives monotonically.

    ``direction`` is ``"decreasing"`` for divergence-type objectives and
    ``"increasing"`` for likelihood-type ones.
    """

    direction: str = "decreasing"
    records: list[TraceRecord] = field(default_factory=list)
    converged: bool = False

    def append(self, objective: float, **extras: float) -> TraceRecord:
        rec = TraceRecord(len(self.records), float(objective),
                          {k: float(v) for k, v in extras.items()})
        self.records.append(rec)
        return rec

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __getitem__(self, i: int) -> TraceRecord:
        return self.records[i]

    @property
    def objectives(self) -> list[float]:
        return [r.objective for r in self.records]

    def extra(self, key: str) -> list[float]:
        return [r.extras[key] for r in self.records]

    def half_steps(self) -> list[float]:
        """Objective after every half-step, using ``after_m_step`` where recorded."""
        out = []
        for r in self.records:
            if "after_m_step" in r.extras:
                out.append(r.extras["after_m_step"])
            out.append(r.objective)
        return out

    def is_monotone(self, slack: float = 1e-10, half_steps: bool = False) -> bool:
        vals = self.half_steps() if half_steps else self.objectives
        if self.direction == "decreasing":
            return all(b <= a + slack for a, b in zip(vals, vals[1:]))
        return all(b >= a - slack for a, b in zip(vals, vals[1:]))


@dataclass(frozen=True)
class EmConfig:
    """Stopping rule shared by the alternating-projection fits.

    Iteration stops once the objective improves by less than ``tol`` or after
    ``max_iters`` full (two-step) iterations. When ``param_tol`` is set the
    largest parameter change of the last iteration must also fall below it;
    objectives that are quadratic at the optimum lose resolution long before
    the parameters settle.
    """

    tol: float = 1e-8
    max_iters: int = 1000
    param_tol: float | None = None

    def done(self, decrease: float, step: float) -> bool:
        if decrease >= self.tol:
            return False
        return self.param_tol is None or step < self.param_tol

    def __post_init__(self):
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise InfoGeoError(f"tol must be a positive finite number, got {self.tol}")
        if self.max_iters < 0:
            raise InfoGeoError(f"max_iters must be >= 0, got {self.max_iters}")

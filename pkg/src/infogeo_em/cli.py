"""Command-line front-end.

Every subcommand reads one input file, runs the corresponding estimator and
writes a JSON result (to ``--output`` or standard output). ``--trace`` writes
one JSON line per iteration. Exit status is 0 on convergence, 2 when the
iteration limit was reached first and 1 on input or algorithm errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import boltzmann, channel, epca, mixture, modal, ranking
from ._base import EmConfig, InfoGeoError, Trace
from .io import (SCHEMA, InputError, dumps, dumps_line, read_channel, read_counts,
                 read_eta_points, read_matrix, read_visible_distribution)

SUBCOMMANDS = ("capacity", "gmm", "bt-rank", "mlr", "epca", "boltzmann")

# slack used when re-validating each module's monotone trace
MONOTONE_SLACK = {
    "capacity": 1e-12, "gmm": 1e-10, "bt-rank": 1e-10,
    "mlr": 1e-12, "epca": 1e-12, "boltzmann": 1e-10,
}


@dataclass
class RunConfig:
    subcommand: str
    input_path: str
    output_path: str | None = None
    tol: float | None = None
    max_iters: int | None = None
    seed: int = 0
    trace_path: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise InputError(f"unknown subcommand {self.subcommand!r}")
        if self.tol is not None and not self.tol > 0:
            raise InputError(f"--tol must be positive, got {self.tol}")
        if self.max_iters is not None and self.max_iters < 1:
            raise InputError(f"--max-iters must be >= 1, got {self.max_iters}")


def _pick(value, default):
    return default if value is None else value


def _capacity(cfg: RunConfig):
    W = read_channel(cfg.input_path)
    res = channel.capacity(W, channel.CapacityConfig(
        tol=_pick(cfg.tol, 1e-10), max_iters=_pick(cfg.max_iters, 10_000)))
    out = {
        "capacity_bits": res.capacity_bits,
        "capacity_nats": res.capacity,
        "input_dist": res.input_dist,
        "iterations": res.iterations,
        "certificate_gap": res.certificate_gap,
    }
    return out, res.trace


def _gmm(cfg: RunConfig):
    X = read_matrix(cfg.input_path)
    K = cfg.options.get("components", 1)
    init = mixture.init_params(X, K, seed=cfg.seed)
    params, trace = mixture.fit_em(X, init, EmConfig(
        tol=_pick(cfg.tol, 1e-8), max_iters=_pick(cfg.max_iters, 1000)))
    out = {
        "weights": params.weights,
        "means": params.means,
        "covariances": params.covariances,
        "loglik": mixture.log_likelihood(params, X),
        "objective_trace": trace.objectives,
        "iterations": len(trace) - 1,
    }
    return out, trace


def _bt_rank(cfg: RunConfig):
    n = read_counts(cfg.input_path, cfg.options.get("format", "auto"))
    theta, trace = ranking.fit_bt_em(
        n, config=EmConfig(tol=_pick(cfg.tol, 1e-12), max_iters=_pick(cfg.max_iters, 10_000),
                           param_tol=1e-12),
        smoothing=cfg.options.get("smoothing", 0.0))
    out = {
        "theta": theta,
        "F_trace": trace.objectives,
        "loglik": ranking.bt_log_likelihood(n, theta),
        "iterations": len(trace) - 1,
    }
    return out, trace


def _mlr(cfg: RunConfig):
    M = read_matrix(cfg.input_path)
    if M.shape[1] < 2 and cfg.options.get("no_intercept"):
        raise InputError(f"{cfg.input_path}: need at least one predictor column before y")
    X, y = M[:, :-1], M[:, -1]
    if not cfg.options.get("no_intercept"):
        X = np.hstack([np.ones((X.shape[0], 1)), X])
    h = cfg.options.get("bandwidth")
    if h is None:
        h = modal.silverman_bandwidth(X, y)
    beta, trace = modal.fit_mlr(X, y, modal.MlrConfig(
        h=h, tol=_pick(cfg.tol, 1e-10), max_iters=_pick(cfg.max_iters, 500)))
    out = {
        "beta": beta,
        "objective_trace": trace.objectives,
        "iterations": len(trace) - 1,
        "h": h,
        "intercept": not cfg.options.get("no_intercept", False),
    }
    return out, trace


def _epca(cfg: RunConfig):
    family = cfg.options.get("family", "categorical")
    E = read_eta_points(cfg.input_path, family)
    if family == "categorical":
        spec = epca.ExpFamilySpec.categorical(E.shape[1] + 1)
    else:
        if E.shape[1] != 1:
            raise InputError(f"{cfg.input_path}: gaussian points need exactly one column (the mean)")
        spec = epca.ExpFamilySpec.gaussian(cfg.options.get("variance", 1.0))
    points = [epca.DualPoint.from_eta(spec, row) for row in E]
    conf = epca.EpcaConfig(tol=_pick(cfg.tol, 1e-12), max_iters=_pick(cfg.max_iters, 300),
                           seed=cfg.seed)
    mode = cfg.options.get("mode", "e")
    fit = epca.fit_epca if mode == "e" else epca.fit_mpca
    sub, trace = fit(spec, points, cfg.options.get("K", 1), conf)
    out = {"mode": mode, "family": family}
    out["basis_theta" if mode == "e" else "basis_eta"] = sub.basis
    out.update(weights=sub.weights, loss_trace=trace.objectives, iterations=len(trace) - 1)
    return out, trace


def _boltzmann(cfg: RunConfig):
    P = read_visible_distribution(cfg.input_path)
    v = int(round(math.log2(P.size)))
    h = cfg.options.get("hidden", 0)
    conf = boltzmann.FitConfig(outer_tol=_pick(cfg.tol, 1e-12),
                               outer_max_iters=_pick(cfg.max_iters, 500))
    params, trace = boltzmann.fit_bm_em(P, v, h, conf)
    out = {
        "n_visible": v,
        "n_hidden": h,
        "weights": params.w,
        "divergence_trace": trace.half_steps(),
        "iterations": len(trace) - 1,
    }
    return out, trace


HANDLERS = {
    "capacity": _capacity, "gmm": _gmm, "bt-rank": _bt_rank,
    "mlr": _mlr, "epca": _epca, "boltzmann": _boltzmann,
}


def _write(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_trace(path: str, trace: Trace):
    lines = "".join(dumps_line(rec.as_dict()) for rec in trace)
    Path(path).write_text(lines)


def run(config: RunConfig) -> int:
    """Execute one subcommand; returns the process exit status."""
    try:
        result, trace = HANDLERS[config.subcommand](config)
    except InfoGeoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    monotone = trace.is_monotone(MONOTONE_SLACK[config.subcommand], half_steps=True)
    doc = {"schema": SCHEMA, "subcommand": config.subcommand,
           "converged": trace.converged, "trace_monotone": monotone}
    doc.update(result)
    try:
        _write(config.output_path, dumps(doc))
        if config.trace_path:
            _write_trace(config.trace_path, trace)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0 if trace.converged else 2


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infogeo-em", description="Alternating e/m-projection estimators.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, flag, dest_help):
        p.add_argument(flag, dest="input_path", required=True, help=dest_help)
        p.add_argument("--output", "-o", dest="output_path", help="result JSON (default: stdout)")
        p.add_argument("--tol", type=_positive_float)
        p.add_argument("--max-iters", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trace", dest="trace_path", help="per-iteration JSONL trace")

    p = sub.add_parser("capacity", help="channel capacity by Arimoto iteration")
    common(p, "--channel", "channel matrix, CSV or JSON, rows = input letters")

    p = sub.add_parser("gmm", help="Gaussian mixture by em")
    common(p, "--data", "CSV, one observation per row")
    p.add_argument("--components", "-K", type=int, required=True)

    p = sub.add_parser("bt-rank", help="Bradley-Terry preferences by em")
    common(p, "--counts", "CSV of i,j,n_ij triplets or a full count matrix")
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--format", choices=("auto", "matrix", "triplets"), default="auto")

    p = sub.add_parser("mlr", help="modal linear regression")
    common(p, "--data", "CSV, predictors then response in the last column")
    p.add_argument("--bandwidth", type=_positive_float)
    p.add_argument("--no-intercept", action="store_true")

    p = sub.add_parser("epca", help="e-PCA / m-PCA of exponential-family points")
    common(p, "--points", "CSV of expectation coordinates, one point per row")
    p.add_argument("--family", choices=("categorical", "gaussian"), required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--variance", type=_positive_float, default=1.0)
    p.add_argument("--mode", choices=("e", "m"), default="e")

    p = sub.add_parser("boltzmann", help="Boltzmann machine with hidden units")
    common(p, "--visible-dist", "CSV of 'bitstring, probability' rows")
    p.add_argument("--hidden", type=int, default=0)
    return parser


_OPTION_KEYS = {
    "gmm": ("components",),
    "bt-rank": ("smoothing", "format"),
    "mlr": ("bandwidth", "no_intercept"),
    "epca": ("family", "K", "variance", "mode"),
    "boltzmann": ("hidden",),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(
            subcommand=args.subcommand, input_path=args.input_path,
            output_path=args.output_path, tol=args.tol, max_iters=args.max_iters,
            seed=args.seed, trace_path=args.trace_path,
            options={k: getattr(args, k) for k in _OPTION_KEYS.get(args.subcommand, ())})
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(config)


if __name__ == "__main__":
    sys.exit(main())

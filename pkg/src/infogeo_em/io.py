"""Input parsing and JSON output for the command-line front-end."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ._base import InfoGeoError

SCHEMA = "infogeo-em/1"
ROW_SUM_TOL = 1e-6


class InputError(InfoGeoError):
    """Malformed input file; the message names the offending line."""


def _rows(path) -> list[tuple[int, list[str]]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    out = []
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        cells = [c.strip() for c in row]
        if not any(cells) or cells[0].startswith("#"):
            continue
        out.append((lineno, cells))
    return out


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _numeric_rows(path, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
    rows = _rows(path)
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]  # header
    if not rows:
        raise InputError(f"{path}: no data rows")
    width = ncols or len(rows[0][1])
    data, lines = [], []
    for lineno, cells in rows:
        if len(cells) != width:
            raise InputError(f"{path}: line {lineno}: expected {width} columns, found {len(cells)}")
        vals = []
        for col, c in enumerate(cells, start=1):
            try:
                v = float(c)
            except ValueError:
                raise InputError(f"{path}: line {lineno}, column {col}: cannot parse {c!r} as a number") from None
            if not math.isfinite(v):
                raise InputError(f"{path}: line {lineno}, column {col}: value {c!r} is not finite")
            vals.append(v)
        data.append(vals)
        lines.append(lineno)
    return np.array(data, dtype=float), lines


def _stochastic_rows(M: np.ndarray, labels: list[str], path, what: str) -> np.ndarray:
    for r, (row, where) in enumerate(zip(M, labels)):
        if np.any(row < 0):
            col = int(np.flatnonzero(row < 0)[0]) + 1
            raise InputError(f"{path}: {where}, column {col}: negative probability {row[col - 1]:g}")
        s = math.fsum(row)
        if abs(s - 1.0) > ROW_SUM_TOL:
            raise InputError(
                f"{path}: {where}: {what} row {r} sums to {s:.10g}, not 1 (tolerance {ROW_SUM_TOL:g})")
    return M / M.sum(axis=1, keepdims=True)


def read_channel(path) -> np.ndarray:
    """Row-stochastic channel matrix from CSV (rows = input letters) or JSON."""
    p = Path(path)
    try:
        head = p.read_text().lstrip()[:1]
    except OSError as exc:
        raise InputError(f"{p}: cannot read ({exc.strerror})") from exc
    if p.suffix.lower() == ".json" or head in ("[", "{"):
        try:
            obj = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{p}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if isinstance(obj, dict):
            obj = obj.get("channel")
        try:
            M = np.array(obj, dtype=float)
        except (TypeError, ValueError):
            raise InputError(f"{p}: expected a list of equal-length numeric rows") from None
        if M.ndim != 2 or 0 in M.shape:
            raise InputError(f"{p}: expected a non-empty matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise InputError(f"{p}: channel contains non-finite values")
        lines = [f"row {r + 1}" for r in range(M.shape[0])]
        return _stochastic_rows(M, lines, p, "channel")
    M, lines = _numeric_rows(p)
    return _stochastic_rows(M, [f"line {n}" for n in lines], p, "channel")


def read_counts(path, fmt: str = "auto") -> np.ndarray:
    """Pairwise win counts as an N x N matrix.

    Accepts a full matrix or ``i, j, n_ij`` triplets with 0-based item ids.
    ``auto`` reads a square table with zero diagonal as a matrix and anything
    else as triplets.
    """
    M, lines = _numeric_rows(path)
    if fmt == "auto":
        square = M.shape[0] == M.shape[1] and M.shape[0] >= 2
        fmt = "matrix" if square and np.all(np.diag(M) == 0) else "triplets"
    for (r, c) in zip(*np.nonzero(M < 0)):
        raise InputError(f"{path}: line {lines[r]}, column {c + 1}: negative count {M[r, c]:g}")
    for (r, c) in zip(*np.nonzero(M != np.round(M))):
        raise InputError(f"{path}: line {lines[r]}, column {c + 1}: non-integer count {M[r, c]:g}")
    if fmt == "matrix":
        if M.shape[0] != M.shape[1]:
            raise InputError(f"{path}: count matrix must be square, got {M.shape}")
        for r in range(M.shape[0]):
            if M[r, r] != 0:
                raise InputError(f"{path}: line {lines[r]}: diagonal count must be 0")
        return M
    if fmt != "triplets":
        raise InputError(f"unknown counts format {fmt!r}")
    if M.shape[1] != 3:
        raise InputError(f"{path}: triplet rows need 3 columns (i, j, n_ij), found {M.shape[1]}")
    N = int(M[:, :2].max()) + 1
    n = np.zeros((N, N))
    for (i, j, c), lineno in zip(M, lines):
        if i == j:
            raise InputError(f"{path}: line {lineno}: item {int(i)} compared with itself")
        n[int(i), int(j)] += c
    return n


def read_matrix(path) -> np.ndarray:
    return _numeric_rows(path)[0]


def read_eta_points(path, family: str) -> np.ndarray:
    M, lines = _numeric_rows(path)
    if family == "categorical":
        for row, lineno in zip(M, lines):
            if np.any(row <= 0) or math.fsum(row) >= 1:
                raise InputError(
                    f"{path}: line {lineno}: categorical eta must have positive entries summing to < 1")
    return M


def read_visible_distribution(path) -> np.ndarray:
    """``bitstring, probability`` rows; unlisted states get probability 0."""
    rows = _rows(path)
    if rows and rows[0][1] and not set(rows[0][1][0]) <= {"0", "1"}:
        rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no data rows")
    v = len(rows[0][1][0])
    if v == 0:
        raise InputError(f"{path}: line {rows[0][0]}: empty state bitstring")
    P = np.zeros(2 ** v)
    seen = set()
    for lineno, cells in rows:
        if len(cells) != 2:
            raise InputError(f"{path}: line {lineno}: expected 'bitstring, probability'")
        bits, prob = cells
        if len(bits) != v or not set(bits) <= {"0", "1"}:
            raise InputError(f"{path}: line {lineno}: state {bits!r} is not a {v}-bit string")
        if bits in seen:
            raise InputError(f"{path}: line {lineno}: duplicate state {bits}")
        seen.add(bits)
        try:
            pr = float(prob)
        except ValueError:
            raise InputError(f"{path}: line {lineno}, column 2: cannot parse {prob!r} as a number") from None
        if not (pr >= 0 and math.isfinite(pr)):
            raise InputError(f"{path}: line {lineno}, column 2: probability must be >= 0")
        P[int(bits, 2)] = pr
    s = math.fsum(P)
    if abs(s - 1.0) > ROW_SUM_TOL:
        raise InputError(f"{path}: probabilities sum to {s:.10g}, not 1 (tolerance {ROW_SUM_TOL:g})")
    return P / s


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def dumps_line(obj) -> str:
    return _encode(obj, 0, 0).replace("\n", "") + "\n"


def parse_input(subcommand: str, path, **options) -> np.ndarray:
    """Read and validate the input file of ``subcommand``.

    ``options`` passes ``fmt`` to the counts reader and ``family`` to the
    e-PCA reader.
    """
    if subcommand == "capacity":
        return read_channel(path)
    if subcommand == "bt-rank":
        return read_counts(path, options.get("fmt", "auto"))
    if subcommand in ("gmm", "mlr"):
        return read_matrix(path)
    if subcommand == "epca":
        return read_eta_points(path, options.get("family", "categorical"))
    if subcommand == "boltzmann":
        return read_visible_distribution(path)
    raise InputError(f"unknown subcommand {subcommand!r}")

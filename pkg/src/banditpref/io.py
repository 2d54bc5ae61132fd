"""Plain-text serialization for datasets, traces, curves and ODE trajectories.

All numbers are written with 17 significant digits and ``\\n`` line endings.
Dataset files start with a ``#`` header line of ``key=value`` pairs.
"""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .estimators import TrainTrace
from .policy import KlRewardPoint
from .preference_model import MultiwiseDataset, PairwiseDataset, generator_id

FLOAT_FMT = "%.17g"


def fmt(x) -> str:
    return FLOAT_FMT % x


def _write(path, text: str):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _header(**fields) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in fields.items()) + "\n"


def _parse_header(line: str) -> dict:
    if not line.startswith("#"):
        raise ConfigurationError("missing '#' header line")
    out = {}
    for tok in line[1:].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise ConfigurationError(f"malformed header token {tok!r}")
        out[key] = val
    return out


def _seed_str(seed):
    return "none" if seed is None else str(seed)


def _seed_val(s):
    return None if s in (None, "none") else int(s)


# ---------------------------------------------------------------------------
# datasets


def dumps_dataset(data: PairwiseDataset | MultiwiseDataset) -> str:
    buf = _io.StringIO()
    head = dict(K=data.K, n=data.n, seed=_seed_str(data.seed), generator=generator_id())
    if isinstance(data, MultiwiseDataset):
        head["M"] = data.M
        buf.write(_header(**head))
        for acts, sig in zip(data.actions, data.sigma):
            buf.write(",".join(map(str, acts)) + "|" + ",".join(map(str, sig)) + "\n")
    else:
        buf.write(_header(**head))
        for a, b, y in zip(data.first, data.second, data.y):
            buf.write(f"{a},{b},{int(y)}\n")
    return buf.getvalue()


def loads_dataset(text: str) -> PairwiseDataset | MultiwiseDataset:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigurationError("empty dataset file")
    head = _parse_header(lines[0])
    try:
        K = int(head["K"])
        n = int(head["n"])
    except (KeyError, ValueError) as exc:
        raise ConfigurationError("dataset header must carry integer K and n") from exc
    body = lines[1:]
    if len(body) != n:
        raise ConfigurationError(f"header says n={n} but file has {len(body)} records")
    seed = _seed_val(head.get("seed"))
    try:
        if body and "|" in body[0]:
            acts, sigs = zip(*(ln.split("|") for ln in body))
            actions = [[int(v) for v in s.split(",")] for s in acts]
            sigma = [[int(v) for v in s.split(",")] for s in sigs]
            return MultiwiseDataset(np.array(actions), np.array(sigma), K, seed)
        rows = np.array([[int(v) for v in ln.split(",")] for ln in body])
    except ValueError as exc:
        raise ConfigurationError(f"malformed record: {exc}") from exc
    if rows.ndim != 2 or rows.shape[1] != 3:
        raise ConfigurationError("pairwise records must have three fields a,a_prime,y")
    return PairwiseDataset(rows[:, 0], rows[:, 1], rows[:, 2], K, seed)


def write_dataset(path, data):
    _write(path, dumps_dataset(data))


def read_dataset(path):
    return loads_dataset(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# CSV tables


def _table(header, rows, comments=()) -> str:
    buf = _io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, (int, np.integer)) else fmt(v) for v in row])
    return buf.getvalue()


def _read_table(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    comments = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    rows = list(csv.reader(ln for ln in lines if ln and not ln.startswith("#")))
    return comments, rows[0], rows[1:]


def trace_header(K: int) -> list[str]:
    return ["epoch", "empirical_loss", "population_loss"] + [f"r_{k + 1}" for k in range(K)]


def write_trace(path, trace: TrainTrace, variant: str | None = None, **meta):
    comments = [" ".join(f"{k}={v}" for k, v in meta.items())] if meta else []
    if variant is not None:
        comments.append(f"variant={variant}")
    _write(path, _table(trace_header(trace.K), trace.rows(), comments))


def read_trace(path) -> TrainTrace:
    _, header, rows = _read_table(path)
    K = len(header) - 3
    trace = TrainTrace(K)
    for row in rows:
        vals = [float(v) for v in row]
        trace.append(int(row[0]), vals[1], vals[2], vals[3:])
    return trace


CURVE_HEADER = ["lambda", "kl", "true_reward", "proxy_reward"]


def write_curve(path, points: list[KlRewardPoint], **meta):
    comments = [" ".join(f"{k}={v}" for k, v in meta.items())] if meta else []
    rows = [(p.lam, p.kl, p.true_reward, p.proxy_reward) for p in points]
    _write(path, _table(CURVE_HEADER, rows, comments))


def read_curve(path) -> list[KlRewardPoint]:
    _, _, rows = _read_table(path)
    return [KlRewardPoint(*(float(v) for v in row)) for row in rows]


TRAJECTORY_HEADER = ["t", "d", "y", "sigma_d"]


def write_trajectory(path, traj, **meta):
    comments = [" ".join(f"{k}={v}" for k, v in meta.items())] if meta else []
    _write(path, _table(TRAJECTORY_HEADER, traj.rows(), comments))


def read_trajectory(path) -> np.ndarray:
    """Columns ``t, d, y, sigma_d`` as an ``(N, 4)`` array."""
    _, _, rows = _read_table(path)
    return np.array(rows, dtype=float).reshape(-1, 4)


def write_reward(path, reward):
    vals = np.asarray(reward, dtype=float)
    _write(path, _table([f"r_{k + 1}" for k in range(vals.size)], [vals]))

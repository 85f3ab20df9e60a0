"""
Result files: the per-iteration trace and the Monte-Carlo MSE curve as CSV,
and the run summary as JSON. Numbers are written with a fixed format so
identical runs produce byte-identical files.
"""

import csv
import json
import math
from pathlib import Path
from typing import Iterator, List, Mapping, Optional, Union

import numpy as np

from src.dynamics import Trace
from src.errors import InputError, OutputError
from src.monte_carlo import MonteCarloResult


def _num(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def trace_header(trace: Trace) -> List[str]:
    N, MF, ML = trace.n_followers, trace.follower_dim, trace.leader_dim
    header = ["k"]
    header += [f"x{n}_{d}" for n in range(N) for d in range(MF)]
    header += [f"y_{d}" for d in range(ML)]
    header += [f"e{n}" for n in range(N)] + ["e_leader"]
    header += [f"alpha{n}" for n in range(N)] + ["alpha_leader"]
    header += [f"inc{n}" for n in range(N)]
    header += ["max_staleness", "distance", "lyapunov"]
    return header


def trace_rows(trace: Trace) -> Iterator[List[str]]:
    """One row per recorded iteration k < horizon"""
    lyapunov = dict(trace.lyapunov)
    max_stale = trace.max_staleness()
    for index, k in enumerate(trace.snapshot_iterations):
        k = int(k)
        if k >= trace.horizon:
            break
        row = [str(k)]
        row += [_num(v) for v in trace.x_snapshots[index].ravel()]
        row += [_num(v) for v in trace.y[k]]
        row += [str(int(e)) for e in trace.activity[k]] + [str(int(trace.leader_active[k]))]
        row += [_num(a) for a in trace.step_sizes[k]]
        row += [_num(v) for v in trace.increments[k]]
        row.append(_num(max_stale[k]))
        row.append("" if trace.distance is None else _num(trace.distance[k]))
        row.append(_num(lyapunov.get(k)))
        yield row


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as e:
        raise OutputError(str(e), path) from e


def write_trace_csv(trace: Trace, path: Union[str, Path]) -> Path:
    path = Path(path)
    f = _open_for_write(path)
    try:
        with f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(trace_header(trace))
            writer.writerows(trace_rows(trace))
    except OSError as e:
        raise OutputError(str(e), path) from e
    return path


def write_mse_csv(result: MonteCarloResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    f = _open_for_write(path)
    try:
        with f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["k", "mse"])
            writer.writerows([str(k), _num(v)] for k, v in enumerate(result.mse))
    except OSError as e:
        raise OutputError(str(e), path) from e
    return path


def jsonable(value):
    """Plain JSON types; non-finite floats become null"""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_summary(summary: Mapping[str, object], path: Union[str, Path]) -> Path:
    path = Path(path)
    text = json.dumps(jsonable(summary), indent=4, sort_keys=True, allow_nan=False) + "\n"
    f = _open_for_write(path)
    try:
        with f:
            f.write(text)
    except OSError as e:
        raise OutputError(str(e), path) from e
    return path


def write_outputs(result: Union[Trace, MonteCarloResult, Mapping[str, object]], path: Union[str, Path]) -> Path:
    """Write a trace or MSE curve as CSV, or a summary mapping as JSON"""
    if isinstance(result, Trace):
        return write_trace_csv(result, path)
    if isinstance(result, MonteCarloResult):
        return write_mse_csv(result, path)
    if isinstance(result, Mapping):
        return write_summary(result, path)
    raise InputError(f"cannot write {type(result).__name__}")

"""Result serialization: summary JSON and delimited field/series tables.

CSV files use '.' decimals, ',' separators, a header row and 17 significant
digits, which round-trips IEEE doubles bit-exactly.
"""

import json
from pathlib import Path

import numpy as np


def _fmt(x):
    return format(float(x), ".17g")


def write_fields_csv(path, x, n, j, theta, phi):
    path = Path(path)
    columns = [np.asarray(c, dtype=float) for c in (x, n, j, theta, phi)]
    if len({len(c) for c in columns}) != 1:
        raise ValueError("field columns have unequal lengths")
    with path.open("w", encoding="utf-8") as fh:
        fh.write("x,n,j,theta,phi\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_fields_csv(path):
    """Inverse of write_fields_csv; returns a dict of float arrays."""
    with Path(path).open("r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.asarray(rows, dtype=float)
    return {name: data[:, k] for k, name in enumerate(header)}


def write_series_csv(path, times, series):
    """Per-step scalar series; columns are t followed by the dict keys."""
    path = Path(path)
    keys = list(series)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(["t"] + keys) + "\n")
        for k, t in enumerate(times):
            row = [t] + [series[key][k] for key in keys]
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_convergence_csv(path, eps_values, errors):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("eps,error\n")
        for e, err in zip(eps_values, errors):
            fh.write(f"{_fmt(e)},{_fmt(err)}\n")
    return path


def read_two_column_csv(path):
    with Path(path).open("r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.asarray(rows, dtype=float)
    return {name: data[:, k] for k, name in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_summary(path, summary_dict):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary_dict), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path

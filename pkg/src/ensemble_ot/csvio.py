"""CSV artifacts: measures, matrices, time series, plans and reach CDFs.

Floats are written with ``repr`` (shortest round-trip decimal), so reading a
file back reproduces the arrays bit for bit.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .measures import DiscreteMeasure


def _fmt(x) -> str:
    return repr(float(x))


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_rows(path):
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r if row]
    return header, np.asarray(data, dtype=float).reshape(len(data), len(header))


def write_matrix(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return write_rows(path, [f"c_{j + 1}" for j in range(M.shape[1])], [list(map(float, r)) for r in M])


def read_matrix(path) -> np.ndarray:
    return read_rows(path)[1]


def write_measure(path, mu: DiscreteMeasure):
    n = mu.dim
    header = [f"x_{i + 1}" for i in range(n)] + ["weight"]
    rows = [list(map(float, a)) + [float(w)] for a, w in zip(mu.atoms, mu.weights)]
    return write_rows(path, header, rows)


def read_measure(path) -> DiscreteMeasure:
    header, data = read_rows(path)
    if not header or header[-1] != "weight":
        raise ValueError(f"{path}: last column must be 'weight'")
    return DiscreteMeasure.from_unnormalized(data[:, :-1], data[:, -1])


def timeseries_header(n: int):
    return ["t"] + [f"v_{i + 1}" for i in range(n)] + [
        f"S_{i + 1}{j + 1}" for i in range(n) for j in range(n)
    ]


def write_timeseries(path, times, means, covs):
    n = means.shape[1]
    rows = [[float(t)] + list(map(float, m)) + list(map(float, S.ravel()))
            for t, m, S in zip(times, means, covs)]
    return write_rows(path, timeseries_header(n), rows)


def read_timeseries(path):
    header, data = read_rows(path)
    n = sum(1 for h in header if h.startswith("v_"))
    return data[:, 0], data[:, 1:1 + n], data[:, 1 + n:].reshape(-1, n, n)


def write_plan(path, plan_matrix, threshold: float = 0.0):
    i, j = np.nonzero(plan_matrix > threshold)
    return write_rows(path, ["i", "j", "mass"], [[int(a), int(b), float(plan_matrix[a, b])] for a, b in zip(i, j)])


def read_plan(path, shape) -> np.ndarray:
    _, data = read_rows(path)
    X = np.zeros(shape)
    for a, b, m in data:
        X[int(a), int(b)] = m
    return X


def write_cdf(path, cdf):
    return write_rows(path, ["t", "mass"], [[float(t), float(m)] for t, m in zip(cdf.times, cdf.masses)])

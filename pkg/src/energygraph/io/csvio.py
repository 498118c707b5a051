"""CSV output for trajectories, linear models and optimization histories; signal input."""

from __future__ import annotations

import csv

import numpy as np

from ..errors import ModelFileError
from ..simulate import SignalSchedule


def fmt(v):
    return format(float(v), ".17g")


def trajectory_header(traj):
    return ["time"] + list(traj.state_names) + list(traj.input_names) + list(traj.flow_names)


def write_trajectory(traj, path):
    """Columns: time, states, inputs, flow entries; one row per grid point."""
    data = np.column_stack([traj.times, traj.states, traj.inputs, traj.flows])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(traj))
        w.writerows([[fmt(v) for v in row] for row in data.tolist()])


def read_signals(path, kind="linear") -> SignalSchedule:
    """Read a signals CSV: first column time, other columns named inputs/disturbances."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ModelFileError(f"cannot read '{path}': {exc.strerror}") from None
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ModelFileError(f"{path}: signals file needs a header and at least one row")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise ModelFileError(f"{path}: {exc}") from None
    if data.shape[1] != len(header):
        raise ModelFileError(f"{path}: rows have {data.shape[1]} columns, header has {len(header)}")
    try:
        return SignalSchedule(data[:, 0], {h: data[:, k] for k, h in enumerate(header[1:], start=1)}, kind)
    except ValueError as exc:
        raise ModelFileError(f"{path}: {exc}") from None


def write_linear_model(lm, path):
    """Long format ``block,row,col,value``: A row-major, then B, then Z."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "row", "col", "value"])
        for name, M in (("A", lm.A), ("B", lm.B), ("Z", lm.Z.reshape(-1, 1))):
            for i in range(M.shape[0]):
                for j in range(M.shape[1]):
                    w.writerow([name, i + 1, j + 1, fmt(M[i, j])])


def read_linear_model(path):
    """Inverse of :func:`write_linear_model`; returns dict block -> array."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for block in ("A", "B", "Z"):
        entries = [(int(r["row"]), int(r["col"]), float(r["value"])) for r in rows if r["block"] == block]
        n = max((e[0] for e in entries), default=0)
        m = max((e[1] for e in entries), default=0)
        M = np.zeros((n, m))
        for i, j, v in entries:
            M[i - 1, j - 1] = v
        out[block] = M[:, 0] if block == "Z" else M
    return out


def write_history(result, path, gene_names=None):
    """Optimization history: evaluation, generation, J, best_J, genes."""
    hist = result.history
    n = len(hist[0].genes) if hist else 0
    names = list(gene_names or [f"gene{k + 1}" for k in range(n)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["evaluation", "generation", "J", "best_J"] + names)
        for h in hist:
            w.writerow([h.index + 1, h.generation, fmt(h.J), fmt(h.best_J)] + [fmt(v) for v in h.genes])

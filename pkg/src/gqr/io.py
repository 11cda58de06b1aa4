"""Reading data and group files for the command line."""

from __future__ import annotations

import csv
import json
import re

import numpy as np

from .design import GroupPartition


def read_table(path: str, response: str = "y"):
    """CSV with a header row. Returns (covariate names, covariate matrix, y)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header and at least one data row")
    header = [h.strip() for h in rows[0]]
    if response not in header:
        raise ValueError(f"{path}: response column {response!r} not found")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    j = header.index(response)
    names = [h for i, h in enumerate(header) if i != j]
    return names, np.delete(data, j, axis=1), data[:, j]


def read_groups(path: str, n_columns: int) -> GroupPartition:
    """One label per covariate column, separated by whitespace, commas or newlines.

    Columns sharing a label form a group; groups are ordered by first
    appearance. The intercept is prepended as group 1 and shifts every
    covariate column by one.
    """
    with open(path) as fh:
        labels = [t for t in re.split(r"[\s,]+", fh.read()) if t]
    if len(labels) != n_columns:
        raise ValueError(f"{path}: {len(labels)} labels for {n_columns} covariate columns")
    order = {}
    for j, lab in enumerate(labels):
        order.setdefault(lab, []).append(j + 1)
    return GroupPartition(tuple([np.array([0])] + [np.array(v) for v in order.values()]))


def with_intercept(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    return np.column_stack([np.ones(Z.shape[0]), Z])


def write_json(path: str, obj) -> None:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        raise TypeError(f"cannot serialize {type(o).__name__}")

    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=default)

"""CSV artifacts: fixed-column tables and row-major grids, floats at 17 significant digits.

A grid file starts with one header line::

    # srmc-grid bounds=x0,x1,y0,y1 shape=m,n axes=x,t

followed by ``m`` rows of ``n`` comma-separated values; row ``i`` holds the
samples at the ``i``-th first coordinate.
"""

from __future__ import annotations

import os

import numpy as np

from .minimizer import GridField

HEADER = "# srmc-grid"


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def write_table(path, columns, rows) -> None:
    """Write a header line and one line per row; numbers use 17 significant digits."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise ValueError("row length does not match the columns")
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_table(path):
    with open(path) as fh:
        columns = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return columns, rows


def write_grid(path, field: GridField) -> None:
    m, n = field.shape
    bounds = ",".join(fmt(b) for b in field.bounds)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{HEADER} bounds={bounds} shape={m},{n} axes={','.join(field.axes)}\n")
        for row in field.values:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_grid(path) -> GridField:
    """Inverse of :func:`write_grid`; raises ``ValueError`` on malformed files."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith(HEADER):
            raise ValueError(f"{path}: missing '{HEADER}' header")
        meta = dict(item.split("=", 1) for item in header[len(HEADER):].split())
        try:
            bounds = tuple(float(b) for b in meta["bounds"].split(","))
            m, n = (int(k) for k in meta["shape"].split(","))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}: bad grid header") from exc
        axes = tuple(meta.get("axes", "x,t").split(","))
        values = np.array([[float(v) for v in line.split(",")] for line in fh if line.strip()])
    if len(bounds) != 4 or values.shape != (m, n):
        raise ValueError(f"{path}: expected shape {(m, n)}, found {values.shape}")
    return GridField(values, bounds, axes)

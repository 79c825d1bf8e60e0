"""Plain-text field and curve files, written atomically.

Field files hold a header ``# hjsc-field v1, dim=<d>, spacing=<h>[;<hy>],
residual=<r>, iterations=<n>`` followed by ``x[,y],u`` rows in node order
(exterior nodes carry ``nan``). Floats use 17 significant digits, so a field
read back is bit-identical to the one written.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from .curves import MinimizingCurve
from .errors import HJSCError
from .solver import Grid, ValueField


class FieldFormatError(HJSCError, ValueError):
    pass


def atomic_write(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: float) -> str:
    return "inf" if v == math.inf else ("nan" if math.isnan(v) else repr(float(v)))


def write_field(path, u: ValueField) -> None:
    grid = u.grid
    spacing = ";".join(repr(float(h)) for h in grid.spacing)
    lines = [
        f"# hjsc-field v1, dim={grid.dimension}, spacing={spacing}, "
        f"residual={_fmt(u.residual)}, iterations={u.iterations}"
    ]
    for pt, val in zip(grid.points, u.values):
        lines.append(",".join([*(repr(float(c)) for c in pt), _fmt(val)]))
    atomic_write(path, "\n".join(lines) + "\n")


def read_field_header(path) -> dict:
    with open(path) as fh:
        first = fh.readline().strip()
    if not first.startswith("# hjsc-field v1"):
        raise FieldFormatError(f"{path} is not an hjsc field file")
    meta = {}
    for part in first[1:].split(",")[1:]:
        key, _, val = part.strip().partition("=")
        meta[key] = val
    try:
        return {
            "dim": int(meta["dim"]),
            "spacing": tuple(float(h) for h in meta["spacing"].split(";")),
            "residual": float(meta.get("residual", "nan")),
            "iterations": int(meta.get("iterations", "0")),
        }
    except (KeyError, ValueError) as exc:
        raise FieldFormatError(f"bad field header in {path}: {first}") from exc


def read_field(path, grid: Grid) -> ValueField:
    """Load values onto ``grid``; node coordinates must match exactly."""
    meta = read_field_header(path)
    if meta["dim"] != grid.dimension:
        raise FieldFormatError(f"{path} is {meta['dim']}D, grid is {grid.dimension}D")
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape != (len(grid.points), grid.dimension + 1):
        raise FieldFormatError(f"{path} has {data.shape[0]} rows, the grid has {len(grid.points)} nodes")
    if not np.array_equal(data[:, :-1], grid.points):
        raise FieldFormatError(f"node coordinates in {path} do not match the configured grid")
    values = data[:, -1].copy()
    values[~grid.admissible] = np.nan
    return ValueField(grid, values, meta["residual"], meta["iterations"])


def write_curve(path, curve: MinimizingCurve) -> None:
    d = curve.dim
    names = ["x", "y"][:d]
    cols = ["s", *names, *(f"v{n}" for n in names), *(f"eta_{n}" for n in names), "cost"]
    lines = [f"# hitting_time={_fmt(curve.hitting_time)}", ",".join(cols)]
    table = np.column_stack([curve.times, curve.positions, curve.velocities, curve.costate, curve.running_cost])
    lines.extend(",".join(repr(float(v)) for v in row) for row in table)
    atomic_write(path, "\n".join(lines) + "\n")


def read_curve(path) -> tuple:
    """Returns ``(hitting_time, column names, table)``."""
    with open(path) as fh:
        head = fh.readline().strip()
        cols = fh.readline().strip().split(",")
    if not head.startswith("# hitting_time="):
        raise FieldFormatError(f"{path} is not a curve file")
    table = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    return float(head.partition("=")[2]), cols, table


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")

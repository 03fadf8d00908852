from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


def write_table(path: str | Path, names: list[str], columns: np.ndarray) -> None:
    """Write a table as CSV with one header line.

    Accepted layout ::

        t,min_wx,argmin_x
        0.0,-100.0,0.0
        ...

    `columns` has one column per name; values are written with full double precision.
    """
    data = np.asarray(columns, dtype=float).reshape(-1, len(names))
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def read_table(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a table written by :func:`write_table`, returning names and a 2D array."""
    path = Path(path)
    with path.open() as f:
        header = f.readline().strip()
    if not header or header[0].isdigit() or header[0] in "+-.":
        msg = f"{path} does not start with a header line"
        raise RuntimeError(msg)
    names = header.split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(names))
    if data.shape[1] != len(names):
        msg = f"{path}: {data.shape[1]} columns for {len(names)} names"
        raise RuntimeError(msg)
    return names, data


def to_jsonable(obj):
    """Convert records, NumPy values and non-finite floats to plain JSON types.

    Named tuples become objects, arrays become lists and ``nan``/``inf`` become ``null``.
    """
    if hasattr(obj, "_asdict"):
        return {k: to_jsonable(v) for k, v in obj._asdict().items()}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    return str(obj)


def write_json(path: str | Path, obj) -> None:
    with Path(path).open("w") as f:
        json.dump(to_jsonable(obj), f, indent=2, allow_nan=False)
        f.write("\n")


def read_json(path: str | Path):
    with Path(path).open() as f:
        return json.load(f)


def write_records(
    path: str | Path, records: list, names: list[str] | None = None, missing: str = ""
) -> None:
    """Write named tuples or dicts as CSV rows, with `missing` for absent or non-finite values."""
    rows = [to_jsonable(r) for r in records]
    if names is None:
        names = list(rows[0]) if rows else []
    with Path(path).open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=names, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: missing if row.get(k) is None else row[k] for k in names})

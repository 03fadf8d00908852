from __future__ import annotations

import csv
import math
from typing import NamedTuple

import numpy as np
import pytest

from hpcblowup.utils import read_json, read_table, to_jsonable, write_json, write_records, write_table


class Row(NamedTuple):
    cid: str
    margin: float


def test_table(tmp_path):
    path = tmp_path / "table.csv"
    columns = np.column_stack([np.linspace(0, 1, 5), np.pi * np.arange(5)])
    write_table(path, ["t", "value"], columns)
    assert path.read_text().splitlines()[0] == "t,value"

    names, data = read_table(path)
    assert names == ["t", "value"]
    assert np.array_equal(data, columns)


def test_table_single_row(tmp_path):
    path = tmp_path / "one.csv"
    write_table(path, ["a", "b", "c"], np.array([1.0, 2.0, 3.0]))
    _, data = read_table(path)
    assert data.shape == (1, 3)


def test_table_errors(tmp_path):
    path = tmp_path / "bare.csv"
    path.write_text("1,2\n3,4\n")
    with pytest.raises(RuntimeError, match="header"):
        read_table(path)

    path.write_text("a,b,c\n1,2\n")
    with pytest.raises(RuntimeError, match="columns"):
        read_table(path)


def test_to_jsonable():
    obj = {
        "row": Row("x", np.float64(0.5)),
        "array": np.array([1.0, np.nan]),
        "inf": math.inf,
        "int": np.int64(3),
        "none": None,
    }
    assert to_jsonable(obj) == {
        "row": {"cid": "x", "margin": 0.5},
        "array": [1.0, None],
        "inf": None,
        "int": 3,
        "none": None,
    }


def test_json(tmp_path):
    path = tmp_path / "summary.json"
    write_json(path, {"t": np.float64(1.5), "failed": ("a", "b"), "gap": np.nan})
    assert read_json(path) == {"t": 1.5, "failed": ["a", "b"], "gap": None}


def test_records(tmp_path):
    path = tmp_path / "margins.csv"
    write_records(path, [Row("a", 0.5), Row("b", np.nan)])
    with path.open() as f:
        rows = list(csv.DictReader(f))
    assert rows == [{"cid": "a", "margin": "0.5"}, {"cid": "b", "margin": ""}]

    write_records(path, [{"value": 1.0}], ["value", "status"], missing="nan")
    with path.open() as f:
        assert list(csv.DictReader(f)) == [{"value": "1.0", "status": "nan"}]

    write_records(path, [])
    assert path.read_text().strip() == ""

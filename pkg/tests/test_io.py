import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pirough.io import InputError, dumps, read_csv_path, read_json, write_csv_path, write_json
from pirough.path import SampledPath


def test_csv_round_trip(tmp_path, rng):
    sp = SampledPath(np.linspace(0, 1, 5), rng.normal(size=(5, 3)))
    p = tmp_path / "x.csv"
    write_csv_path(p, sp)
    back = read_csv_path(p)
    np.testing.assert_array_equal(back.times, sp.times)
    np.testing.assert_array_equal(back.values, sp.values)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "x,y\n0,1\n1,2\n",
        "t,x1\n0,1\n",
        "t,x1\n0,1\n1,abc\n",
        "t,x1\n0,1\n1,2,3\n",
        "t,x1\n0,1\n1,nan\n",
        "t,x1\n0,1\n0,2\n",
    ],
)
def test_csv_rejects(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(InputError):
        read_csv_path(p)


def test_missing_files(tmp_path):
    with pytest.raises(InputError):
        read_csv_path(tmp_path / "none.csv")
    with pytest.raises(InputError):
        read_json(tmp_path / "none.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(InputError):
        read_json(tmp_path / "bad.json")
    assert isinstance(InputError("x"), OSError)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_precision_round_trips(x):
    assert json.loads(dumps({"v": x}))["v"] == x


def test_dumps_layout():
    obj = {"b": [1, 2.5, None, True], "a": {"nested": [[1.0, 2.0], [3.0, 4.0]]}, "inf": math.inf}
    text = dumps(obj)
    assert text.index('"b"') < text.index('"a"')
    assert "Infinity" in text
    assert json.loads(text)["a"]["nested"] == [[1.0, 2.0], [3.0, 4.0]]
    assert dumps(obj) == text
    assert dumps(0.1) == "0.10000000000000001\n"


def test_write_json(tmp_path):
    p = tmp_path / "o.json"
    write_json(p, {"x": np.float64(1.5), "y": np.arange(3)})
    assert read_json(p) == {"x": 1.5, "y": [0, 1, 2]}
    with pytest.raises(InputError):
        write_json(tmp_path / "missing" / "o.json", {})

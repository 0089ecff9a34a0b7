import numpy as np
import pytest

from rtlab.io import load_config, read_csv, read_field, write_csv, write_field, write_json


def test_field_roundtrip(tmp_path, rng):
    a = rng.standard_normal((5, 7))
    write_field(tmp_path, "rho", a, {"t": 0.5, "grid": "5x7"})
    b, meta = read_field(tmp_path, "rho")
    assert np.array_equal(a, b)
    assert meta["shape"] == "5 7" and meta["t"] == "0.5" and meta["dtype"] == "float64-le"
    assert (tmp_path / "rho.bin").stat().st_size == 5 * 7 * 8


def test_csv_keeps_full_precision(tmp_path):
    x = 0.1 + 0.2
    write_csv(tmp_path / "t.csv", [{"a": x, "b": 3}])
    row = read_csv(tmp_path / "t.csv")[0]
    assert float(row["a"]) == x and row["b"] == "3"


def test_json_handles_numpy_and_nonfinite(tmp_path):
    import json
    p = write_json(tmp_path / "x.json", {"a": np.float64(1.5), "b": np.arange(3), "c": float("inf")})
    d = json.loads(p.read_text())
    assert d == {"a": 1.5, "b": [0, 1, 2], "c": "inf"}


def test_load_config(tmp_path):
    (tmp_path / "c.yaml").write_text("physics:\n  mu: 0.2\n")
    assert load_config(tmp_path / "c.yaml") == {"physics": {"mu": 0.2}}
    (tmp_path / "bad.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ValueError):
        load_config(tmp_path / "bad.yaml")

"""Reading configs and writing tables, verdicts and field snapshots."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import yaml


def load_config(path: str | Path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return data


def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, Mapping):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def write_json(path: str | Path, data: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path: str | Path, rows: Iterable[Mapping], columns: list[str] | None = None) -> Path:
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])
    return path


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_field(directory: str | Path, name: str, data: np.ndarray, meta: Mapping) -> Path:
    """Write ``name.bin`` (float64, row-major) and a ``name.hdr`` key = value header."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(np.asarray(data, dtype="<f8"))
    (directory / f"{name}.bin").write_bytes(arr.tobytes(order="C"))
    lines = [f"field = {name}", "dtype = float64-le", "layout = row-major",
             "shape = " + " ".join(str(s) for s in arr.shape)]
    lines += [f"{k} = {v}" for k, v in meta.items()]
    (directory / f"{name}.hdr").write_text("\n".join(lines) + "\n")
    return directory / f"{name}.bin"


def read_field(directory: str | Path, name: str) -> tuple[np.ndarray, dict]:
    directory = Path(directory)
    meta = {}
    for line in (directory / f"{name}.hdr").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    shape = tuple(int(s) for s in meta["shape"].split())
    arr = np.frombuffer((directory / f"{name}.bin").read_bytes(), dtype="<f8").reshape(shape)
    return arr.copy(), meta

"""Panel, tensor and result files."""

from __future__ import annotations

import csv
import datetime as _dt
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .moments import ThirdCumulantTensor

SCHEMA_VERSION = "1.0"


class PanelFormatError(ValueError):
    """Malformed panel CSV; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def write_panel_csv(path, y) -> None:
    """
    Header ``y1,...,yT`` then one row per observation. Values use
    ``repr(float)``, the shortest string that parses back to the same double.
    """
    y = np.asarray(y, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"y{t}" for t in range(1, y.shape[1] + 1)) + "\n")
        for row in y:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_panel_csv(path, T: Optional[int] = None) -> np.ndarray:
    """Read a panel written by :func:`write_panel_csv`; checks the header against ``T``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError("empty file", 1) from None
        want = [f"y{t}" for t in range(1, len(header) + 1)]
        if [h.strip() for h in header] != want:
            raise PanelFormatError(f"header must be y1..yT, got {','.join(header)}", 1)
        if T is not None and len(header) != T:
            raise PanelFormatError(f"panel has {len(header)} columns but the model has T = {T}", 1)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise PanelFormatError(f"expected {len(header)} fields, got {len(row)}", line)
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise PanelFormatError(f"non-numeric field ({exc})", line) from None
            if not all(np.isfinite(vals)):
                raise PanelFormatError("non-finite value", line)
            rows.append(vals)
    if not rows:
        raise PanelFormatError("panel has no observations")
    return np.array(rows, dtype=float)


def write_matrix_csv(path, M, prefix: str = "c") -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"{prefix}{j}" for j in range(1, M.shape[1] + 1)) + "\n")
        for row in M:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def write_tensor_csv(path, K) -> None:
    """Long format ``r,s,t,value`` in r-major order (then s, then t), indices 1-based."""
    K = K.K if isinstance(K, ThirdCumulantTensor) else np.asarray(K, dtype=float)
    T = K.shape[0]
    with open(path, "w", newline="") as fh:
        fh.write("r,s,t,value\n")
        for r in range(T):
            for s in range(T):
                for t in range(T):
                    fh.write(f"{r + 1},{s + 1},{t + 1},{float(K[r, s, t])!r}\n")


def read_tensor_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    T = int(round(len(data) ** (1 / 3)))
    if T**3 != len(data):
        raise ValueError(f"{path}: {len(data)} rows is not a cube")
    K = np.empty((T,) * 3)
    for r, s, t, v in data:
        K[int(r) - 1, int(s) - 1, int(t) - 1] = v
    return K


def write_conditioning_csv(path, points, modulus) -> None:
    """Diagnostic grid of cf arguments ``s1..sT`` and ``|phi(s)|``."""
    points = np.atleast_2d(points)
    with open(path, "w", newline="") as fh:
        fh.write(",".join([f"s{t}" for t in range(1, points.shape[1] + 1)] + ["modulus"]) + "\n")
        for s, m in zip(points, modulus):
            fh.write(",".join(repr(float(x)) for x in list(s) + [m]) + "\n")


def write_curve_csv(path, result) -> None:
    """Criterion curve(s) of an estimate: ``curve,c1..cq,criterion``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        rows = []
        width = 1
        for key, c in result.criterion_curve.items():
            cand = np.asarray(c["candidate"], dtype=float).reshape(len(c["criterion"]), -1)
            width = max(width, cand.shape[1])
            for x, v in zip(cand, c["criterion"]):
                rows.append([key] + [repr(float(z)) for z in x] + [repr(float(v))])
        w.writerow(["curve"] + [f"c{j}" for j in range(1, width + 1)] + ["criterion"])
        w.writerows(rows)


def manifest(command: str, config_path=None, inputs=(), outputs=(), seed=None) -> dict:
    from . import __version__

    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_path": str(config_path) if config_path is not None else None,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": seed,
        "version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def write_json(path, payload: dict, man: dict) -> None:
    from .identify.common import _jsonable

    Path(path).write_text(json.dumps(_jsonable({"manifest": man, **payload}), indent=2))


def write_manifest_sidecar(path, man: dict) -> Path:
    """CSV outputs cannot embed JSON cleanly, so their manifest goes in ``<path>.manifest.json``."""
    side = Path(str(path) + ".manifest.json")
    side.write_text(json.dumps(man, indent=2))
    return side

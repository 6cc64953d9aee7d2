"""Plain-text artifacts: CSV tables and a JSON-lines manifest.

Numbers are written with 17 significant digits so that files round-trip
exactly and reruns with the same inputs are byte-identical.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest string that round-trips
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def read_csv(path):
    """Return ``(header, float array)``; non-numeric cells become nan."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]

    def num(s):
        try:
            return float(s)
        except ValueError:
            return {"true": 1.0, "false": 0.0}.get(s, np.nan)

    return header, np.array([[num(s) for s in r] for r in rows[1:]], dtype=float)


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _coord_columns(chart):
    cols = np.meshgrid(*chart.axes, indexing="ij")
    return [c.ravel() for c in cols], [f"x{k + 1}" for k in range(chart.dim)]


def _components(name, a, d):
    """Flatten a (d, ...) or (d, d, ...) field into named columns."""
    if a.ndim == d:
        return [name], [a.ravel()]
    if a.ndim == d + 1:
        return [f"{name}{i + 1}" for i in range(a.shape[0])], [a[i].ravel() for i in range(a.shape[0])]
    names, cols = [], []
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            names.append(f"{name}{i + 1}{j + 1}")
            cols.append(a[i, j].ravel())
    return names, cols


def write_grid(path, chart, fields: dict) -> Path:
    """Grid dump: coordinates, ``sqrt_g`` and every field (vectors/tensors split per component)."""
    cols, header = _coord_columns(chart)
    header = header + ["sqrt_g"]
    cols = cols + [chart.sqrt_g.ravel()]
    for name, a in fields.items():
        n, c = _components(name, np.asarray(a), chart.dim)
        header += n
        cols += c
    return write_csv(path, header, zip(*cols))


def write_density(path, chart, rho) -> Path:
    return write_grid(path, chart, {"rho": rho})


def write_ensemble(path, ens) -> Path:
    from .sde import frame_residual

    res = frame_residual(ens.chart, ens.positions, ens.frames)
    header = ["walker_id"] + [f"x{k + 1}" for k in range(ens.chart.dim)] + ["e_residual", "active"]
    rows = ([int(i)] + list(x) + [r, bool(a)] for i, x, r, a in zip(ens.ids, ens.positions, res, ens.active))
    return write_csv(path, header, rows)


def write_state(path, state) -> Path:
    from . import qhd

    st = qhd.stress_tensor(state)
    return write_grid(path, state.chart, {
        "rho_M": state.rho,
        "v": state.v,
        "quantum_force": qhd.quantum_force(state.rho, state.chart, state.hbar, state.mass),
        "qc_force": qhd.qc_force(state.rho, state.chart, state.hbar, state.mass),
        "T": st.total,
    })


def write_wavefield(path, w) -> Path:
    from .nlse import unwrapped_phase

    return write_grid(path, w.chart, {
        "re_phi": w.phi.real,
        "im_phi": w.phi.imag,
        "abs_phi_sq": w.density,
        "theta": unwrapped_phase(w.chart, w.phi),
    })


def write_series(path, columns: dict) -> Path:
    """Time series: ``columns`` maps header names to equal-length sequences."""
    return write_csv(path, list(columns), zip(*columns.values()))


class Manifest:
    """Append-only JSON-lines record of a run."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("")

    def add(self, record: str, **fields):
        with open(self.path, "a") as fh:
            fh.write(json.dumps({"record": record, **_jsonable(fields)}, sort_keys=True) + "\n")

    def records(self, kind=None) -> list:
        return read_manifest(self.path, kind)


def read_manifest(path, kind=None) -> list:
    out = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    return [r for r in out if kind is None or r["record"] == kind]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, Path):
        return str(x)
    return x

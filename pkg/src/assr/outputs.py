"""Deterministic CSV/JSON writers for run outputs."""

from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    """Shortest round-tripping text for a number; integers stay integers."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_json(path: Path, obj):
    write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def slug(label: str) -> str:
    """File-name-safe form of a method label, e.g. ``spiking-exp(1)`` -> ``spiking-exp_1``."""
    return re.sub(r"[^A-Za-z0-9.-]+", "_", label).strip("_")


def codes_csv(codes: dict) -> str:
    """``method,neuron,value`` for each recovered code."""
    rows = [(label, i, v) for label, code in codes.items() for i, v in enumerate(code)]
    return csv_text(["method", "neuron", "value"], rows)


def trajectory_csv(traj) -> str:
    """Auxiliary samples as ``time,i,u,a,energy``."""
    rows = []
    for k, t in enumerate(np.asarray(traj.times).tolist()):
        e = float(traj.energy[k])
        for i in range(traj.u.shape[1]):
            rows.append((t, i, float(traj.u[k, i]), float(traj.a[k, i]), e))
    return csv_text(["time", "i", "u", "a", "energy"], rows)


def curve_csv(table: dict) -> str:
    labels = [k for k in table if k != "time"]
    rows = [(t, *[float(table[k][j]) for k in labels])
            for j, t in enumerate(np.asarray(table["time"]).tolist())]
    return csv_text(["time", *labels], rows)

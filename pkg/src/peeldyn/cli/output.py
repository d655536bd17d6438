"""Artifact writers: CSV tables, the JSON report and a plotting script."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


def format_number(v: float) -> str:
    """17 significant digits; ``nan``/``inf`` spelled out."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == 0:
        return "0"
    return f"{v:.17g}"


def write_csv(path: Path, columns: Mapping[str, Sequence[float]]) -> Path:
    """Comma-separated table with a header row and LF line endings."""
    names = list(columns)
    arrays = [np.asarray(columns[n], float).ravel() for n in names]
    n = arrays[0].size if arrays else 0
    if any(a.size != n for a in arrays):
        raise ValueError("CSV columns differ in length")
    lines = [",".join(names)]
    for row in zip(*arrays):
        lines.append(",".join(format_number(v) for v in row))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_report(path: Path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


PLOT_TEMPLATE = '''"""Plots for the artifacts in this directory (needs matplotlib)."""
import csv
import glob
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(HERE, name)) as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    return {{h: [float(r[i]) for r in body] for i, h in enumerate(head)}}


panels = {panels!r}
fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 4), squeeze=False)
for ax, (fname, x, ys) in zip(axes[0], panels):
    if fname.endswith("*"):
        for f in sorted(glob.glob(os.path.join(HERE, fname))):
            d = read(os.path.basename(f))
            ax.plot(d[x], d[ys[0]], label=os.path.basename(f))
    else:
        d = read(fname)
        for y in ys:
            ax.plot(d[x], d[y], label=y)
    ax.set_xlabel(x)
    ax.set_title(fname)
    ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, "summary.png"), dpi=120)
'''


def write_plot_script(out_dir: Path, files: Sequence[str]) -> Path:
    panels = []
    if "front.csv" in files:
        panels.append(("front.csv", "t", ["ell", "ell_dot"]))
    if "energy.csv" in files:
        panels.append(("energy.csv", "t", ["E", "T", "balance_residual"]))
    if any(f.startswith("field_t") for f in files):
        panels.append(("field_t*", "x", ["u"]))
    if "oracle.csv" in files:
        panels.append(("oracle.csv", "t", ["l2", "sup"]))
    path = Path(out_dir) / "plot.py"
    with open(path, "w", newline="\n") as fh:
        fh.write(PLOT_TEMPLATE.format(panels=panels))
    return path

"""Deterministic CSV/JSON writers and gnuplot script generation."""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """Round-trip decimal text: 17 significant digits for floats."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def clean(obj):
    """Convert numpy types and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, complex):
        return [clean(obj.real), clean(obj.imag)]
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


OUT_ENV = "TAMEGEOM_OUT"


def output_dir(default) -> Path:
    """Output directory, overridden by the ``TAMEGEOM_OUT`` environment variable."""
    return Path(os.environ.get(OUT_ENV) or default)


_PLOTS = {
    "convex-path": ("set logscale y\nset xlabel 's'\nset ylabel 'relative error'\n"
                    "plot '{csv}' using 1:{col} with points title 'formula vs direct'\n",
                    "rel_err"),
    "inj-estimate": ("set xlabel 's'\nset ylabel 'injectivity estimate'\n"
                     "plot '{csv}' using 1:{col} with linespoints title 'lower bound'\n",
                     "lower_bound"),
    "polar-path": ("set xlabel 't'\nset ylabel '1/lambda'\n"
                   "plot '{csv}' using 1:3 with points title 'measured', \\\n"
                   "     '{csv}' using 1:7 with lines title 'lower', \\\n"
                   "     '{csv}' using 1:8 with lines title 'upper'\n", None),
    "curvature-scan": ("set xlabel 'x0'\nset ylabel 'x1'\n"
                       "plot '{csv}' using 1:2:{col} with points palette title '|R|'\n",
                       "norm_R"),
    "ift-certify": ("set xlabel 'base point'\nset ylabel 'R3'\n"
                    "plot '{csv}' using 0:{col} with points title 'R3'\n", "R3"),
}


def plot_script(command: str, csv_name: str, header) -> str:
    """Gnuplot commands for the main CSV of a command."""
    template, colname = _PLOTS[command]
    col = list(header).index(colname) + 1 if colname else 0
    head = (f"# {command}\nset datafile separator ','\nset key autotitle columnhead\n"
            f"set terminal pngcairo size 900,600\nset output '{Path(csv_name).stem}.png'\n")
    return head + template.format(csv=csv_name, col=col)


def write_plot_script(path, command: str, csv_name: str, header) -> Path:
    path = Path(path)
    path.write_text(plot_script(command, csv_name, header))
    return path

"""Reading and writing run artifacts: arrays as CSV, scalars and metadata as JSON.

The parameter file stores ``alpha`` together with a header describing its
layout, so that a file cannot silently be applied to a different
parameterization:

.. code-block:: json

    {"layout": {"order": "carrier,spline,component",
                "index": "(carrier * splines_per_carrier + spline) * 2 + component",
                "components": ["cos", "sin"],
                "n_carriers": 3, "splines_per_carrier": 10,
                "carriers_rad_per_ns": [0.0, -1.381, -2.762],
                "duration_ns": 100.0, "units": "rad/ns"},
     "alpha": [...]}
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .controls import ControlParameterization

ORDER = "carrier,spline,component"


class LayoutError(ValueError):
    """Parameter file does not match the configured controls."""


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


def layout_header(controls: ControlParameterization) -> dict:
    return {
        "order": ORDER,
        "index": "(carrier * splines_per_carrier + spline) * 2 + component",
        "components": ["cos", "sin"],
        "n_carriers": controls.n_carriers,
        "splines_per_carrier": controls.grid.D1,
        "carriers_rad_per_ns": list(controls.carriers.as_array),
        "duration_ns": controls.T,
        "units": "rad/ns",
    }


def save_alpha(path, controls: ControlParameterization, alpha) -> None:
    alpha = controls._check_alpha(alpha)
    write_json(path, {"layout": layout_header(controls), "alpha": alpha})


def load_alpha(path, controls: ControlParameterization) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"parameter file not found: {path}")
    data = json.loads(path.read_text())
    if isinstance(data, list):
        raise LayoutError(f"{path}: missing layout header")
    lay = data.get("layout")
    if not isinstance(lay, dict):
        raise LayoutError(f"{path}: missing layout header")
    want = layout_header(controls)
    if lay.get("order") != ORDER:
        raise LayoutError(f"{path}: ordering {lay.get('order')!r} differs from {ORDER!r}")
    for key in ("n_carriers", "splines_per_carrier"):
        if lay.get(key) != want[key]:
            raise LayoutError(f"{path}: {key} = {lay.get(key)} but the controls have {want[key]}")
    got = np.asarray(lay.get("carriers_rad_per_ns", []), dtype=float)
    if got.shape != (controls.n_carriers,) or not np.allclose(got, want["carriers_rad_per_ns"], rtol=1e-12, atol=1e-12):
        raise LayoutError(f"{path}: carrier frequencies differ from the configuration")
    if not math.isclose(float(lay.get("duration_ns", np.nan)), controls.T, rel_tol=1e-12):
        raise LayoutError(f"{path}: duration {lay.get('duration_ns')} differs from {controls.T}")
    alpha = np.asarray(data.get("alpha", []), dtype=float)
    if alpha.shape != (controls.num_params,):
        raise LayoutError(f"{path}: {alpha.size} parameters, expected {controls.num_params}")
    return alpha

"""JSON and CSV emission. Output is a pure function of the report contents.

CSV schema (version 1): first line ``# config_hash=<sha256> schema=1``,
second line the column names, then one row per record. Floats are written
with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .config import SCHEMA_VERSION

CONVERGENCE_COLUMNS = (
    "eps",
    "steps",
    "fbar_L2",
    "fbar_Linf",
    "theta_L2",
    "theta_Linf",
    "u_L2",
    "u_Linf",
    "rho_L2",
    "rho_Linf",
    "fbar_L2_windowed_max",
    "theta_L2_windowed_max",
    "remainder_max_Linf",
    "remainder_windowed_max_Linf",
    "flux_residual_L2",
    "drift_mass",
    "drift_momentum_rad",
    "drift_energy_total",
)
LAYER_COLUMNS = ("eps", "t", "tau", "remainder_Linf", "remainder_L2", "flux_residual_L2")


def _clean(obj):
    """Replace NaN/inf by None so the JSON is strict."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _clean(obj.tolist())
    return obj


def to_json(payload: dict) -> str:
    return json.dumps(_clean(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(columns, rows, config_hash: str) -> str:
    lines = [f"# config_hash={config_hash} schema={SCHEMA_VERSION}", ",".join(columns)]
    lines.extend(",".join(_fmt(row[c]) for c in columns) for row in rows)
    return "\n".join(lines) + "\n"


def convergence_rows(report) -> list[dict]:
    rows = []
    for m in report.members:
        e = m["errors"]
        rows.append(
            {
                "eps": m["eps"],
                "steps": m["steps"],
                **{f"{n}_{norm}": e[n][norm] for n in ("fbar", "theta", "u", "rho") for norm in ("L2", "Linf")},
                "fbar_L2_windowed_max": e["fbar"]["L2_windowed_max"],
                "theta_L2_windowed_max": e["theta"]["L2_windowed_max"],
                "remainder_max_Linf": m["remainder"]["max_Linf"],
                "remainder_windowed_max_Linf": m["remainder"]["windowed_max_Linf"],
                "flux_residual_L2": m["flux_residual_L2"],
                **{f"drift_{k}": v for k, v in m["drift"].items()},
            }
        )
    return rows


def write_convergence(report, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = report.provenance["config_hash"]
    js = out / "convergence.json"
    js.write_text(to_json(report.as_dict()))
    cs = out / "convergence.csv"
    cs.write_text(csv_text(CONVERGENCE_COLUMNS, convergence_rows(report), h))
    return [js, cs]


def write_layer(report, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = report.provenance["config_hash"]
    js = out / "layer.json"
    js.write_text(to_json(report.as_dict()))
    cs = out / "layer.csv"
    rows = [r for m in report.members for r in m["rows"]]
    cs.write_text(csv_text(LAYER_COLUMNS, rows, h))
    return [js, cs]


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(payload))
    return path


def read_csv(path) -> tuple[dict, list[str], list[list[float]]]:
    """Parse a CSV written by this module: (header metadata, columns, rows)."""
    lines = Path(path).read_text().splitlines()
    meta = dict(item.split("=", 1) for item in lines[0].lstrip("# ").split())
    columns = lines[1].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[2:] if line]
    return meta, columns, rows

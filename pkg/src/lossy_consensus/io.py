"""JSON and CSV artifacts with a provenance header."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from . import __version__
from .ggp import RateAllocation
from .graph import Topology, WeightMatrix
from .heuristic import IntegerSchedule
from .state_evolution import DistortionSchedule


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, default=_default, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def metadata(seed=None, config=None) -> dict:
    return {"version": __version__, "seed": seed, "config_hash": config_hash(config or {})}


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(payload: dict, meta: dict | None = None) -> str:
    doc = {"metadata": meta or metadata()} | payload
    return json.dumps(doc, indent=2, default=_default) + "\n"


def write_json(path, payload: dict, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload, meta))
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def csv_text(rows: list[dict], meta: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (meta or metadata()).items():
        buf.write(f"# {k}: {v}\n")
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def write_csv(path, rows: list[dict], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(rows, meta))
    return path


def read_csv(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def topology_to_dict(topo: Topology, weights: WeightMatrix | None = None) -> dict:
    d = {
        "m": topo.m,
        "rho_c": topo.rho_c,
        "seed": topo.seed,
        "positions": topo.positions,
        "edges": topo.edges,
        "degrees": topo.degrees,
    }
    if weights is not None:
        d["weights"] = {"scheme": weights.scheme, "alpha": weights.alpha, "W": weights.W}
    return d


def topology_from_dict(d: dict) -> tuple[Topology, np.ndarray | None]:
    pos = d.get("positions")
    topo = Topology.from_edges(
        int(d["m"]),
        [tuple(e) for e in d["edges"]],
        positions=None if pos is None else np.array(pos, dtype=float),
        rho_c=float("nan") if d.get("rho_c") is None else float(d["rho_c"]),
        seed=d.get("seed"),
    )
    w = d.get("weights")
    return topo, None if w is None else np.array(w["W"], dtype=float)


def allocation_to_dict(a: RateAllocation) -> dict:
    return {
        "kind": "rate-allocation",
        "mode": a.distortions.mode,
        "model": {"kind": a.model.kind, "r_c": a.model.r_c, "d_max": a.model.d_max, "delta": a.model.delta},
        "T": a.T,
        "mse_target": a.mse_target,
        "distortions": a.distortions.values,
        "rates": a.rates,
        "aggregate_rate": a.aggregate_rate,
        "predicted_mse": a.predicted_mse,
        "status": a.solver_status,
        "iterations": a.iterations,
        "timing_s": a.solve_time,
    }


def integer_schedule_to_dict(s: IntegerSchedule) -> dict:
    return {"kind": "integer-schedule", "T": s.T} | s.to_dict()


def load_schedule(path):
    """A DistortionSchedule or the rate list of an IntegerSchedule from a JSON artifact."""
    d = read_json(path)
    kind = d.get("kind")
    if kind == "rate-allocation":
        vals = np.array(d["distortions"], dtype=float)
        if d["mode"] == "constant":
            return DistortionSchedule.constant(vals), d
        return DistortionSchedule.variable(vals), d
    if kind == "integer-schedule":
        return [int(r) for r in d["rates"]], d
    raise ValueError(f"{path}: not a schedule artifact (kind={kind!r})")

# app/exports.py
"""
File writers for every command.

Each file carries the toolkit version, the run-config digest and the case
digest: CSV files as leading ``#`` lines (read back with
``pandas.read_csv(path, comment="#")``), JSON files under ``provenance``,
DOT files as a comment. Output is deterministic: sorted JSON keys and a
fixed float format.
"""

import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import pandas as pd

from app import __version__
from app.schemas.analysis import InertiaProfile, PartitionResult
from app.schemas.grid import Snapshot
from app.schemas.regional import DeviceSweep, MinInertiaResult, ReactanceSweep, RegionalReport
from app.schemas.run import RunConfig
from app.schemas.simulation import SimResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
TOOLKIT = "regional-inertia"
DOT_COLORS = 9


def provenance(config: RunConfig, snapshot: Snapshot) -> Dict[str, str]:
    case_bytes = Path(config.case_path).read_bytes()
    return {
        "toolkit": TOOLKIT,
        "version": __version__,
        "command": config.command.value,
        "config_digest": config.digest(),
        "case_sha256": hashlib.sha256(case_bytes).hexdigest(),
        "snapshot": " | ".join(snapshot.provenance),
    }


def jsonable(value: Any) -> Any:
    """Plain JSON tree: arrays to lists, NaN to null, infinities to strings."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": jsonable(float(value.real)), "im": jsonable(float(value.imag))}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def write_json(payload: Dict[str, Any], path: Path, prov: Dict[str, str]) -> Path:
    body = dict(payload)
    body["provenance"] = prov
    path.write_text(json.dumps(jsonable(body), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def write_table(frame: pd.DataFrame, path: Path, prov: Dict[str, str], fmt: str = "csv") -> Path:
    """CSV with provenance comment lines, or JSON records under ``rows``."""
    if fmt == "json":
        path = path.with_suffix(".json")
        records = frame.to_dict(orient="records")
        return write_json({"columns": list(frame.columns), "rows": records}, path, prov)
    header = "".join(f"# {key}={prov[key]}\n" for key in sorted(prov))
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    path.write_text(header + body, encoding="utf-8")
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


# ----------------------------------------------------------------------
# inertia
# ----------------------------------------------------------------------
def inertia_frame(profile: InertiaProfile) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "bus_id": profile.bus_ids,
            "h_seconds": profile.h,
            "damping_per_s": np.diag(profile.R),
            "isolated": [b in profile.isolated_buses for b in profile.bus_ids],
        }
    )


def write_inertia(profile: InertiaProfile, out: Path, prov: Dict[str, str], fmt: str = "csv") -> List[Path]:
    table = write_table(inertia_frame(profile), out / "inertia.csv", prov, fmt)
    audit = {
        "bus_ids": profile.bus_ids,
        "source_keys": profile.source_keys,
        "source_H": profile.source_H,
        "source_D": profile.source_D,
        "isolated_buses": profile.isolated_buses,
        "h": profile.h,
        "D_div": profile.divider.matrix,
        "delta_S": profile.spc.matrix,
        "B_equivalent": profile.spc.equivalent_susceptance,
        "K": profile.K,
        "K_h": profile.K_h,
        "F": profile.F,
        "F_h": profile.F_h,
        "R_diagonal": np.diag(profile.R),
    }
    return [table, write_json(audit, out / "inertia_audit.json", prov)]


# ----------------------------------------------------------------------
# partition and regions
# ----------------------------------------------------------------------
def partition_frame(partition: PartitionResult) -> pd.DataFrame:
    buses = sorted(partition.labels)
    return pd.DataFrame({"bus_id": buses, "region": [partition.labels[b] for b in buses]})


def partition_dot(partition: PartitionResult, snapshot: Snapshot, prov: Dict[str, str]) -> str:
    lines = [f'graph "{snapshot.case.system.name}" {{']
    lines += [f"  // {key}={prov[key]}" for key in sorted(prov)]
    lines.append(f"  node [style=filled, colorscheme=set1{DOT_COLORS}];")
    for bus in sorted(partition.labels):
        region = partition.labels[bus]
        color = (region - 1) % DOT_COLORS + 1
        lines.append(f'  "{bus}" [region={region}, fillcolor={color}];')
    graph = snapshot.case.graph()
    for a, b in sorted(tuple(sorted(edge)) for edge in graph.edges()):
        lines.append(f'  "{a}" -- "{b}" [susceptance={graph[a][b]["susceptance"]:.10g}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_partition(
    partition: PartitionResult,
    report: RegionalReport,
    snapshot: Snapshot,
    out: Path,
    prov: Dict[str, str],
    fmt: str = "csv",
) -> List[Path]:
    paths = [write_table(partition_frame(partition), out / "partition.csv", prov, fmt)]
    diagnostics = {
        "r": partition.r,
        "selected_r": partition.selected_r,
        "k": partition.k,
        "mode": partition.mode,
        "seed": partition.seed,
        "silhouette": partition.silhouette,
        "silhouette_by_r": {str(r): s for r, s in sorted(partition.silhouette_by_r.items())},
        "eigengaps": partition.eigengaps,
        "magnitudes": partition.magnitudes,
        "repaired_fragments": partition.repaired_fragments,
        "regions": {str(r): partition.members(r) for r in partition.regions()},
    }
    paths.append(write_json(diagnostics, out / "partition_diagnostics.json", prov))
    dot = out / "partition.dot"
    dot.write_text(partition_dot(partition, snapshot, prov), encoding="utf-8")
    paths.append(dot)
    paths.append(write_table(report.to_frame(), out / "regional.csv", prov, fmt))
    return paths


# ----------------------------------------------------------------------
# what-if
# ----------------------------------------------------------------------
def write_device_sweep(
    sweep: DeviceSweep, crossing: Optional[float], out: Path, prov: Dict[str, str], fmt: str = "csv"
) -> List[Path]:
    j = sweep.bus_ids.index(sweep.bus)
    summary = {
        "bus": sweep.bus,
        "h_base_seconds": float(sweep.base_h[j]),
        "crossing_h_device_seconds": crossing,
        "h_at_bus": dict(zip((f"{h:g}" for h in sweep.h_grid), sweep.at_bus(sweep.bus).tolist())),
    }
    return [
        write_table(sweep.to_frame(), out / "device_sweep.csv", prov, fmt),
        write_json(summary, out / "device_sweep_summary.json", prov),
    ]


def write_min_h(result: MinInertiaResult, out: Path, prov: Dict[str, str]) -> List[Path]:
    payload = result.model_dump(mode="json")
    payload["feasible"] = result.feasible
    return [write_json(payload, out / "min_h.json", prov)]


def write_line_sweep(sweep: ReactanceSweep, out: Path, prov: Dict[str, str], fmt: str = "csv") -> List[Path]:
    return [write_table(sweep.to_frame(), out / "line_sweep.csv", prov, fmt)]


# ----------------------------------------------------------------------
# simulation
# ----------------------------------------------------------------------
def write_simulation(
    results: Dict[str, SimResult],
    regional: Dict[str, Dict[int, np.ndarray]],
    out: Path,
    prov: Dict[str, str],
    fmt: str = "csv",
    spreads: Optional[Dict[str, Dict[str, float]]] = None,
) -> List[Path]:
    frames = []
    for name in sorted(results):
        frame = results[name].to_frame()
        frame.insert(0, "scenario", name)
        frames.append(frame)
    paths = [write_table(pd.concat(frames, ignore_index=True), out / "simulation.csv", prov, fmt)]

    if regional:
        rows = []
        for name in sorted(regional):
            time = results[name].time
            for region in sorted(regional[name]):
                trace = regional[name][region]
                rows.append(pd.DataFrame({"scenario": name, "region": region, "time_s": time, "frequency_pu": trace}))
        paths.append(write_table(pd.concat(rows, ignore_index=True), out / "simulation_regions.csv", prov, fmt))

    summary = {}
    for name in sorted(results):
        result = results[name]
        k = result.step_index
        entry = {
            "bus": result.bus,
            "delta_p_pu": result.delta_p,
            "dt_s": result.dt,
            "t_step_s": result.t_step,
            "initial_rocof_pu_per_s": dict(zip((str(b) for b in result.bus_ids), result.initial_rocof())),
        }
        if name in regional:
            entry["regional_initial_rocof_pu_per_s"] = {
                str(region): float((trace[k + 1] - trace[k]) / result.dt) if k + 1 < trace.size else None
                for region, trace in sorted(regional[name].items())
            }
        if spreads and name in spreads:
            entry["speed_spread_pu"] = spreads[name]
        summary[name] = entry
    paths.append(write_json({"runs": summary}, out / "simulation_summary.json", prov))
    return paths

# app/models/grid.py
"""
Grid Model Module

Loading, saving and what-if mutation of network cases.

- load_case / parse_case: JSON case file -> validated GridCase
- serialize_case / save_case: the inverse (angles back to degrees)
- compute_internal_emf: classical-model initialization -> Snapshot
- attach_device, drop_device, replace_machine, scale_branch_reactance,
  apply_scenario: return new snapshots, never touching their input
"""

import json
import logging
import math
from collections import Counter
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from pydantic import ValidationError

from app.core.errors import (
    CaseInvariantError,
    CaseParseError,
    CaseReferenceError,
    InvalidParameterError,
    UnknownBranchError,
)
from app.models.device import device_from_record
from app.schemas.grid import GridCase, InertialDevice, Scenario, Snapshot

logger = logging.getLogger(__name__)

LOSSY_BRANCH_KEYS = ("resistance", "charging", "tap")
REQUIRED_SECTIONS = ("buses", "branches")
INVARIANT_ERROR_TYPES = {
    "greater_than",
    "greater_than_equal",
    "less_than",
    "less_than_equal",
    "value_error",
    "too_short",
}
MACHINE_DERIVED = {"emf_mag", "rotor_angle"}
DEVICE_DERIVED = {"emf_mag", "internal_angle"}


# ----------------------------------------------------------------------
# Parsing and serialization
# ----------------------------------------------------------------------
def _validation_to_error(exc: ValidationError, source: str) -> Exception:
    details = []
    for err in exc.errors()[:5]:
        loc = ".".join(str(part) for part in err["loc"])
        details.append(f"{loc}: {err['msg']}")
    message = "; ".join(details)
    if all(err["type"] in INVARIANT_ERROR_TYPES for err in exc.errors()):
        return CaseInvariantError(message, context=source)
    return CaseParseError(message, context=source)


def _bus_record(record: Dict[str, Any]) -> Dict[str, Any]:
    record = dict(record)
    if "voltage_ang_deg" in record:
        deg = record.pop("voltage_ang_deg")
        if not isinstance(deg, (int, float)):
            raise CaseParseError(f"bus {record.get('id')}: voltage_ang_deg must be a number")
        record["voltage_ang"] = math.radians(deg)
    return record


def _strip_lossy(branches: Iterable[Dict[str, Any]]) -> list:
    dropped: Counter = Counter()
    clean = []
    for record in branches:
        record = dict(record)
        for key in LOSSY_BRANCH_KEYS:
            if key in record:
                if record.pop(key):
                    dropped[key] += 1
        clean.append(record)
    for key, count in sorted(dropped.items()):
        logger.warning("dropped nonzero branch '%s' on %d branch(es); the network is treated as lossless", key, count)
    return clean


def _scenario_record(record: Dict[str, Any]) -> Dict[str, Any]:
    record = dict(record)
    record["attach"] = [device_from_record(d) for d in record.get("attach", [])]
    replacements = []
    for item in record.get("replace_machines", []):
        item = dict(item)
        if item.get("device") is not None:
            item["device"] = device_from_record(item["device"])
        replacements.append(item)
    record["replace_machines"] = replacements
    return record


def parse_case(tree: Any, source: str = "<memory>") -> GridCase:
    """
    Validate a decoded case tree.

    Angles are read in degrees (``voltage_ang_deg``) and stored in radians.
    Branch resistance, charging and tap entries are dropped with a warning.
    """
    if not isinstance(tree, dict):
        raise CaseParseError("case root must be an object", context=source)
    missing = [name for name in REQUIRED_SECTIONS if name not in tree]
    if missing:
        raise CaseParseError(f"missing section(s): {', '.join(missing)}", context=source)
    for name in ("buses", "branches", "machines", "devices", "scenarios"):
        if name in tree and not isinstance(tree[name], list):
            raise CaseParseError(f"section '{name}' must be a list", context=source)

    try:
        record = {
            "system": tree.get("system", {}),
            "buses": [_bus_record(b) for b in tree["buses"]],
            "branches": _strip_lossy(tree["branches"]),
            "machines": tree.get("machines", []),
            "devices": [device_from_record(d) for d in tree.get("devices", [])],
            "scenarios": [_scenario_record(s) for s in tree.get("scenarios", [])],
        }
        case = GridCase.model_validate(record)
    except ValidationError as exc:
        raise _validation_to_error(exc, source) from exc
    except (TypeError, AttributeError, ValueError) as exc:
        raise CaseParseError(f"malformed entry: {exc}", context=source) from exc

    logger.info(
        "loaded case '%s': %d buses, %d branches, %d machines, %d devices",
        case.system.name, len(case.buses), len(case.branches), len(case.machines), len(case.devices),
    )
    return case


def load_case(path: Union[str, Path]) -> GridCase:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CaseParseError(f"cannot read case file: {exc.strerror or exc}", context=str(path)) from exc
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}", context=str(path)) from exc
    return parse_case(tree, source=str(path))


def _device_dump(device: InertialDevice) -> Dict[str, Any]:
    return device.model_dump(mode="json", exclude=DEVICE_DERIVED, exclude_none=True)


def serialize_case(case: GridCase) -> Dict[str, Any]:
    """JSON tree that ``parse_case`` turns back into an equal case (derived EMFs omitted)."""
    buses = []
    for bus in case.buses:
        record = bus.model_dump(exclude={"voltage_ang"})
        record["voltage_ang_deg"] = math.degrees(bus.voltage_ang)
        buses.append(record)
    scenarios = []
    for scenario in case.scenarios:
        scenarios.append(
            {
                "name": scenario.name,
                "description": scenario.description,
                "attach": [_device_dump(d) for d in scenario.attach],
                "replace_machines": [
                    {
                        "machine_id": r.machine_id,
                        **({"device": _device_dump(r.device)} if r.device else {}),
                    }
                    for r in scenario.replace_machines
                ],
                "scale_branches": [s.model_dump() for s in scenario.scale_branches],
            }
        )
    return {
        "system": case.system.model_dump(mode="json"),
        "buses": buses,
        "branches": [br.model_dump() for br in case.branches],
        "machines": [m.model_dump(exclude=MACHINE_DERIVED) for m in case.machines],
        "devices": [_device_dump(d) for d in case.devices],
        "scenarios": scenarios,
    }


def save_case(case: GridCase, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(serialize_case(case), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ----------------------------------------------------------------------
# Operating point
# ----------------------------------------------------------------------
def _terminal_phasor(vm: float, va: float, owner: str) -> complex:
    if vm <= 1e-9:
        raise CaseInvariantError(f"{owner} sits at a bus with zero terminal voltage")
    return complex(vm * math.cos(va), vm * math.sin(va))


def _emf_behind(v: complex, p: float, q: float, x: float) -> complex:
    current = (complex(p, q) / v).conjugate()
    return v + 1j * x * current


def compute_internal_emf(case: GridCase, provenance: Iterable[str] = ()) -> Snapshot:
    """
    Initialize every source's internal EMF at the case operating point.

    Machines and devices without an EMF setpoint: E = V + j x I with
    I = conj((P + jQ) / V). Devices with a setpoint E keep its magnitude and
    take the angle that delivers p_inject through the coupling reactance.
    Grid-following devices have no EMF.
    """
    buses = {b.id: b for b in case.buses}

    machines = []
    for m in case.machines:
        bus = buses[m.bus]
        v = _terminal_phasor(bus.voltage_mag, bus.voltage_ang, f"machine {m.id}")
        e = _emf_behind(v, m.p_gen, m.q_gen, m.xd_prime)
        machines.append(m.model_copy(update={"emf_mag": abs(e), "rotor_angle": math.atan2(e.imag, e.real)}))

    devices = []
    for d in case.devices:
        if not d.is_inertial:
            devices.append(d.model_copy(update={"emf_mag": None, "internal_angle": None}))
            continue
        bus = buses[d.bus]
        v = _terminal_phasor(bus.voltage_mag, bus.voltage_ang, f"device {d.id}")
        if d.emf_setpoint is not None:
            ratio = d.p_inject * d.coupling_reactance / (d.emf_setpoint * bus.voltage_mag)
            if abs(ratio) > 1:
                raise CaseInvariantError(
                    f"device {d.id}: p_inject {d.p_inject} exceeds the transfer limit of "
                    f"E={d.emf_setpoint} behind x={d.coupling_reactance}"
                )
            update = {"emf_mag": d.emf_setpoint, "internal_angle": bus.voltage_ang + math.asin(ratio)}
        else:
            e = _emf_behind(v, d.p_inject, d.q_inject, d.coupling_reactance)
            update = {"emf_mag": abs(e), "internal_angle": math.atan2(e.imag, e.real)}
        devices.append(d.model_copy(update=update))

    initialized = case.model_copy(update={"machines": tuple(machines), "devices": tuple(devices)})
    return Snapshot(case=initialized, provenance=tuple(provenance))


def build_snapshot(path: Union[str, Path], scenarios: Iterable[str] = ()) -> Snapshot:
    """Load a case file, initialize it, and apply the named scenarios in order."""
    snapshot = compute_internal_emf(load_case(path), provenance=(f"load:{Path(path).name}",))
    for name in scenarios:
        snapshot = apply_scenario(snapshot, name)
    return snapshot


# ----------------------------------------------------------------------
# What-if mutations
# ----------------------------------------------------------------------
def _rebuild(snapshot: Snapshot, step: str, **changes) -> Snapshot:
    case = snapshot.case
    record = {
        "system": case.system,
        "buses": case.buses,
        "branches": case.branches,
        "machines": case.machines,
        "devices": case.devices,
        "scenarios": case.scenarios,
    }
    record.update(changes)
    try:
        new_case = GridCase(**record)
    except ValidationError as exc:
        raise _validation_to_error(exc, step) from exc
    initialized = compute_internal_emf(new_case)
    return snapshot.with_step(initialized.case, step)


def attach_device(snapshot: Snapshot, device: InertialDevice) -> Snapshot:
    """New snapshot with ``device`` added behind its coupling reactance."""
    logger.debug("attaching %s device %d at bus %d", device.kind.value, device.id, device.bus)
    return _rebuild(
        snapshot,
        f"attach:{device.kind.value}:{device.id}@{device.bus}:H={device.inertia_H:g}",
        devices=snapshot.case.devices + (device,),
    )


def drop_device(snapshot: Snapshot, device_id: int) -> Snapshot:
    remaining = tuple(d for d in snapshot.case.devices if d.id != device_id)
    if len(remaining) == len(snapshot.case.devices):
        raise CaseReferenceError(f"unknown device {device_id}")
    return _rebuild(snapshot, f"drop:device:{device_id}", devices=remaining)


def replace_machine(
    snapshot: Snapshot, machine_id: int, device: Optional[InertialDevice] = None
) -> Snapshot:
    """
    Remove a machine and optionally put ``device`` at the same bus.

    The device's bus is forced to the machine's bus.
    """
    machine = next((m for m in snapshot.case.machines if m.id == machine_id), None)
    if machine is None:
        raise CaseReferenceError(f"unknown machine {machine_id}")
    machines = tuple(m for m in snapshot.case.machines if m.id != machine_id)
    devices = snapshot.case.devices
    step = f"replace:machine:{machine_id}"
    if device is not None:
        devices = devices + (device.model_copy(update={"bus": machine.bus}),)
        step += f"->{device.kind.value}:{device.id}"
    return _rebuild(snapshot, step, machines=machines, devices=devices)


def scale_branch_reactance(snapshot: Snapshot, from_bus: int, to_bus: int, alpha: float) -> Snapshot:
    """
    New snapshot with every branch between the two buses scaled by ``alpha``.

    Raises:
        InvalidParameterError: alpha not a positive finite number
        UnknownBranchError: no branch joins the two buses
    """
    if not isinstance(alpha, (int, float)) or not math.isfinite(alpha) or alpha <= 0:
        raise InvalidParameterError(f"reactance scale factor must be positive, got {alpha}")
    hits = [n for n, br in enumerate(snapshot.case.branches) if br.joins(from_bus, to_bus)]
    if not hits:
        raise UnknownBranchError(f"no branch between buses {from_bus} and {to_bus}")
    branches = list(snapshot.case.branches)
    for n in hits:
        branches[n] = branches[n].model_copy(update={"reactance": branches[n].reactance * alpha})
    return _rebuild(
        snapshot,
        f"scale:{from_bus}-{to_bus}:alpha={alpha:g}",
        branches=tuple(branches),
    )


def apply_scenario(snapshot: Snapshot, scenario: Union[Scenario, str]) -> Snapshot:
    """Apply replacements, then attachments, then branch scalings; one provenance step each."""
    if isinstance(scenario, str):
        scenario = snapshot.case.scenario(scenario)
    result = snapshot
    for item in scenario.replace_machines:
        result = replace_machine(result, item.machine_id, item.device)
    for device in scenario.attach:
        result = attach_device(result, device)
    for item in scenario.scale_branches:
        result = scale_branch_reactance(result, item.from_bus, item.to_bus, item.alpha)
    logger.info("applied scenario '%s' (%d step(s))", scenario.name, len(result.provenance) - len(snapshot.provenance))
    return result.with_step(result.case, f"scenario:{scenario.name}")

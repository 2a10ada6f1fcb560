"""
Grid Schemas Module

Pydantic models for the static network description and the frozen operating
point every analytic works from:

- Bus, Branch: the lossless network (angles in radians in memory)
- SyncMachine, InertialDevice: the inertial sources
- Scenario: a named batch of what-if mutations stored alongside a case
- GridCase: the validated case with all cross references resolved
- Snapshot: a GridCase with internal EMFs populated plus a provenance trail

All models are frozen. Mutations in ``app.models.grid`` always return new
objects.
"""

import hashlib
from enum import Enum
from typing import Optional, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.errors import CaseInvariantError, CaseReferenceError, DuplicateIdError

FROZEN = ConfigDict(frozen=True, extra="forbid")


class DeviceKind(str, Enum):
    """
    Kind of an inertial device.

    The kind only affects reporting and which physical parameters populate H
    and D; every inertial device is modelled as an EMF behind a reactance.
    """
    SYNCHRONOUS_CONDENSER = "synchronous_condenser"
    SYNCHRONOUS_MOTOR = "synchronous_motor"
    GRID_FORMING = "grid_forming"
    GRID_FOLLOWING = "grid_following"


class Bus(BaseModel):
    id: int
    name: str = ""
    voltage_mag: float = Field(..., gt=0, description="Voltage magnitude, p.u.")
    voltage_ang: float = Field(0.0, description="Voltage angle, radians")
    p_load: float = 0.0
    q_load: float = 0.0

    model_config = FROZEN


class Branch(BaseModel):
    from_bus: int
    to_bus: int
    reactance: float = Field(..., gt=0, description="Series reactance, p.u.")
    status: bool = True

    model_config = FROZEN

    @model_validator(mode="after")
    def check_endpoints(self) -> "Branch":
        if self.from_bus == self.to_bus:
            raise ValueError(f"branch {self.from_bus}-{self.to_bus} connects a bus to itself")
        return self

    @property
    def susceptance(self) -> float:
        return 1.0 / self.reactance

    def joins(self, a: int, b: int) -> bool:
        return {self.from_bus, self.to_bus} == {a, b}


class SyncMachine(BaseModel):
    """Synchronous machine in the classical model (EMF behind x'd)."""
    id: int
    bus: int
    inertia_H: float = Field(..., gt=0, description="Seconds on system base")
    damping_D: float = Field(0.0, ge=0)
    xd_prime: float = Field(..., gt=0)
    p_gen: float = 0.0
    q_gen: float = 0.0
    # derived by compute_internal_emf
    emf_mag: Optional[float] = Field(None, gt=0)
    rotor_angle: Optional[float] = None

    model_config = FROZEN

    @property
    def key(self) -> str:
        return f"machine:{self.id}"


class InertialDevice(BaseModel):
    """
    Device that adds inertia (or, for grid-following units, only power) at a bus.

    ``emf_setpoint`` is the user-chosen internal voltage magnitude (E_GFM for a
    grid-forming unit). When it is absent the EMF is derived from the
    injections like a machine's.
    """
    id: int
    bus: int
    kind: DeviceKind
    inertia_H: float = Field(0.0, ge=0)
    damping_D: float = Field(0.0, ge=0)
    coupling_reactance: float = Field(..., gt=0)
    p_inject: float = 0.0
    q_inject: float = 0.0
    emf_setpoint: Optional[float] = Field(None, gt=0)
    # derived by compute_internal_emf
    emf_mag: Optional[float] = Field(None, gt=0)
    internal_angle: Optional[float] = None

    model_config = FROZEN

    @model_validator(mode="after")
    def check_kind(self) -> "InertialDevice":
        if self.kind == DeviceKind.GRID_FOLLOWING and self.inertia_H != 0:
            raise ValueError("a grid-following device has no inertia (inertia_H must be 0)")
        return self

    @property
    def is_inertial(self) -> bool:
        return self.inertia_H > 0

    @property
    def key(self) -> str:
        return f"device:{self.id}"


class SystemInfo(BaseModel):
    name: str = "case"
    base_mva: float = Field(100.0, gt=0)
    frequency_hz: float = Field(60.0, gt=0)
    inertia_base: str = Field(
        "system",
        description="Base the inertia constants are expressed on",
    )
    reference_load_step: Optional[float] = Field(
        None, description="Load step (p.u.) used by the case's reference studies"
    )
    reference_step_bus: Optional[int] = None
    allow_islands: bool = False
    notes: str = ""

    model_config = FROZEN


class MachineReplacement(BaseModel):
    machine_id: int
    device: Optional[InertialDevice] = None

    model_config = FROZEN


class BranchScaling(BaseModel):
    from_bus: int
    to_bus: int
    alpha: float = Field(..., gt=0)

    model_config = FROZEN


class Scenario(BaseModel):
    name: str = Field(..., min_length=1)
    description: str = ""
    attach: Tuple[InertialDevice, ...] = ()
    replace_machines: Tuple[MachineReplacement, ...] = ()
    scale_branches: Tuple[BranchScaling, ...] = ()

    model_config = FROZEN


class GridCase(BaseModel):
    """
    Validated network case.

    Buses, machines and devices are stored sorted by id so that analyses are
    independent of file ordering. Branch order is kept as given.
    """
    system: SystemInfo = SystemInfo()
    buses: Tuple[Bus, ...]
    branches: Tuple[Branch, ...]
    machines: Tuple[SyncMachine, ...] = ()
    devices: Tuple[InertialDevice, ...] = ()
    scenarios: Tuple[Scenario, ...] = ()

    model_config = FROZEN

    @field_validator("buses", "machines", "devices", mode="after")
    @classmethod
    def sort_by_id(cls, v):
        return tuple(sorted(v, key=lambda item: item.id))

    @model_validator(mode="after")
    def check_references(self) -> "GridCase":
        for label, items in (("bus", self.buses), ("machine", self.machines), ("device", self.devices)):
            ids = [item.id for item in items]
            if len(ids) != len(set(ids)):
                dupes = sorted({i for i in ids if ids.count(i) > 1})
                raise DuplicateIdError(f"duplicate {label} id(s): {dupes}")

        bus_ids = {b.id for b in self.buses}
        for n, branch in enumerate(self.branches):
            for end in (branch.from_bus, branch.to_bus):
                if end not in bus_ids:
                    raise CaseReferenceError(
                        f"branch {branch.from_bus}-{branch.to_bus} refers to unknown bus {end}",
                        context=f"branches.{n}",
                    )
        for label, items in (("machine", self.machines), ("device", self.devices)):
            for item in items:
                if item.bus not in bus_ids:
                    raise CaseReferenceError(
                        f"{label} {item.id} sits at unknown bus {item.bus}",
                        context=f"{label}s",
                    )

        names = [s.name for s in self.scenarios]
        if len(names) != len(set(names)):
            raise DuplicateIdError(f"duplicate scenario names: {names}")
        return self

    @model_validator(mode="after")
    def check_topology(self) -> "GridCase":
        if not self.machines and not any(d.is_inertial for d in self.devices):
            raise CaseInvariantError("case has no inertial source (no machine and no device with H > 0)")

        graph = self.graph()
        if not self.system.allow_islands and not nx.is_connected(graph):
            parts = sorted(sorted(c) for c in nx.connected_components(graph))
            raise CaseInvariantError(
                f"network over in-service branches is not connected: {len(parts)} components, "
                f"smallest starts at bus {min(parts, key=len)[0]}"
            )
        return self

    # ------------------------------------------------------------------
    # lookups
    # ------------------------------------------------------------------
    @property
    def bus_ids(self) -> Tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    def bus_index(self) -> dict[int, int]:
        return {b.id: n for n, b in enumerate(self.buses)}

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise CaseReferenceError(f"unknown bus {bus_id}")

    def scenario(self, name: str) -> Scenario:
        for s in self.scenarios:
            if s.name == name:
                return s
        known = ", ".join(s.name for s in self.scenarios) or "none"
        raise CaseReferenceError(f"unknown scenario '{name}' (known: {known})")

    def in_service(self) -> Tuple[Branch, ...]:
        return tuple(br for br in self.branches if br.status)

    def graph(self) -> nx.Graph:
        """Bus graph over in-service branches; parallel branches merge into one edge."""
        graph = nx.Graph()
        graph.add_nodes_from(self.bus_ids)
        for br in self.in_service():
            if graph.has_edge(br.from_bus, br.to_bus):
                graph[br.from_bus][br.to_bus]["susceptance"] += br.susceptance
            else:
                graph.add_edge(br.from_bus, br.to_bus, susceptance=br.susceptance)
        return graph

    def total_load(self) -> float:
        return sum(b.p_load for b in self.buses)


class Snapshot(BaseModel):
    """
    A case frozen at its operating point.

    Every machine and inertial device carries its internal EMF. The
    provenance trail records the source file and each mutation applied.
    """
    case: GridCase
    provenance: Tuple[str, ...] = ()

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_initialized(self) -> "Snapshot":
        for m in self.case.machines:
            if m.emf_mag is None or m.rotor_angle is None:
                raise CaseInvariantError(f"machine {m.id} has no internal EMF")
        for d in self.case.devices:
            if d.is_inertial and (d.emf_mag is None or d.internal_angle is None):
                raise CaseInvariantError(f"device {d.id} has no internal EMF")
        return self

    def digest(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()

    def with_step(self, case: GridCase, step: str) -> "Snapshot":
        return Snapshot(case=case, provenance=self.provenance + (step,))

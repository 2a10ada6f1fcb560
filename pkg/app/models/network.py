# app/models/network.py
"""
Susceptance network views of a snapshot.

The augmented network stacks the buses and one internal node per inertial
source (behind its x'd or coupling reactance). All matrices use the
Laplacian sign convention: B[i, i] = sum of connected susceptances,
B[i, k] = -b_ik.
"""

import logging
from typing import Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from app.operations.linalg import kron_reduce
from app.schemas.analysis import readonly
from app.schemas.grid import GridCase, Snapshot

logger = logging.getLogger(__name__)


class InertialSource(BaseModel):
    """A machine or inertial device seen as an EMF behind a reactance."""
    key: str
    kind: str
    id: int
    bus: int
    inertia_H: float
    damping_D: float
    reactance: float
    emf_mag: float
    angle: float

    model_config = ConfigDict(frozen=True)


def inertial_sources(snapshot: Snapshot) -> Tuple[InertialSource, ...]:
    """Machines by id, then devices with H > 0 by id. Zero-inertia devices are left out."""
    case = snapshot.case
    sources = [
        InertialSource(
            key=m.key,
            kind="machine",
            id=m.id,
            bus=m.bus,
            inertia_H=m.inertia_H,
            damping_D=m.damping_D,
            reactance=m.xd_prime,
            emf_mag=m.emf_mag,
            angle=m.rotor_angle,
        )
        for m in case.machines
    ]
    sources += [
        InertialSource(
            key=d.key,
            kind=d.kind.value,
            id=d.id,
            bus=d.bus,
            inertia_H=d.inertia_H,
            damping_D=d.damping_D,
            reactance=d.coupling_reactance,
            emf_mag=d.emf_mag,
            angle=d.internal_angle,
        )
        for d in case.devices
        if d.is_inertial
    ]
    return tuple(sources)


def bus_susceptance(case: GridCase) -> np.ndarray:
    """Bus susceptance matrix over in-service branches; parallel branches add up."""
    index = case.bus_index()
    B = np.zeros((len(index), len(index)))
    for br in case.in_service():
        i, k = index[br.from_bus], index[br.to_bus]
        b = br.susceptance
        B[i, k] -= b
        B[k, i] -= b
        B[i, i] += b
        B[k, k] += b
    return B


class AugmentedNetwork(BaseModel):
    """
    Buses (indices 0..n-1) plus source internal nodes (n..n+m-1).

    ``energized`` marks buses with an electrical path to at least one source;
    the remaining buses are left out of every reduction.
    """
    bus_ids: Tuple[int, ...]
    sources: Tuple[InertialSource, ...]
    matrix: np.ndarray
    voltage: np.ndarray
    angle: np.ndarray
    energized: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("matrix", "voltage", "angle", "energized")
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)

    @property
    def n_bus(self) -> int:
        return len(self.bus_ids)

    @property
    def n_src(self) -> int:
        return len(self.sources)

    @property
    def source_keys(self) -> Tuple[str, ...]:
        return tuple(s.key for s in self.sources)

    def source_nodes(self) -> np.ndarray:
        return np.arange(self.n_bus, self.n_bus + self.n_src)

    def energized_buses(self) -> np.ndarray:
        return np.flatnonzero(self.energized)

    def reduce_onto(self, bus_positions) -> np.ndarray:
        """
        Kron-reduce the energized network onto the sources plus ``bus_positions``.

        Rows/columns of the result: sources in order, then the given buses.
        """
        live = np.concatenate([self.energized_buses(), self.source_nodes()])
        sub = self.matrix[np.ix_(live, live)]
        position = {int(node): n for n, node in enumerate(live)}
        keep = [position[int(s)] for s in self.source_nodes()]
        keep += [position[int(b)] for b in bus_positions]
        return kron_reduce(sub, keep)


def augmented_network(snapshot: Snapshot) -> AugmentedNetwork:
    case = snapshot.case
    sources = inertial_sources(snapshot)
    index = case.bus_index()
    n, m = len(index), len(sources)

    Y = np.zeros((n + m, n + m))
    Y[:n, :n] = bus_susceptance(case)
    for s, src in enumerate(sources):
        b = 1.0 / src.reactance
        i, g = index[src.bus], n + s
        Y[i, i] += b
        Y[g, g] += b
        Y[i, g] -= b
        Y[g, i] -= b

    graph = case.graph()
    source_buses = {src.bus for src in sources}
    energized = np.zeros(n, dtype=bool)
    for component in nx.connected_components(graph):
        if component & source_buses:
            energized[[index[b] for b in component]] = True
    if not energized.all():
        isolated = [b for b in case.bus_ids if not energized[index[b]]]
        logger.warning("%d bus(es) have no path to an inertial source: %s", len(isolated), isolated)

    return AugmentedNetwork(
        bus_ids=case.bus_ids,
        sources=sources,
        matrix=Y,
        voltage=np.array([b.voltage_mag for b in case.buses]),
        angle=np.array([b.voltage_ang for b in case.buses]),
        energized=energized,
    )

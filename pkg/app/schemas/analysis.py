"""
Analysis result schemas: linear-algebra pairs, frequency divider, synchronizing
power coefficients, nodal inertia profile, network Laplacian, spectral
embedding and partition.

Arrays are numpy arrays stored read-only; bus and source labels travel with
them so results can be audited without the snapshot at hand.
"""

from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

ARRAYS = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def readonly(value) -> np.ndarray:
    arr = np.array(value, copy=True)
    arr.flags.writeable = False
    return arr


class EigenPair(BaseModel):
    value: complex
    vector: np.ndarray

    model_config = ARRAYS

    @field_validator("vector")
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)


class FreqDivider(BaseModel):
    """Maps source rotor-speed deviations to bus frequency deviations (n_bus x n_src)."""
    bus_ids: Tuple[int, ...]
    source_keys: Tuple[str, ...]
    matrix: np.ndarray

    model_config = ARRAYS

    @field_validator("matrix")
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)

    def row(self, bus_id: int) -> np.ndarray:
        return self.matrix[self.bus_ids.index(bus_id)]


class SpcMatrix(BaseModel):
    """
    Synchronizing power coefficients (n_src x n_bus).

    Column j is the share of a power step at bus j picked up by each source.
    ``equivalent_susceptance`` holds the Kron-reduced source-to-bus
    susceptances the coefficients are built from.
    """
    bus_ids: Tuple[int, ...]
    source_keys: Tuple[str, ...]
    matrix: np.ndarray
    coefficients: np.ndarray
    equivalent_susceptance: np.ndarray

    model_config = ARRAYS

    @field_validator("matrix", "coefficients", "equivalent_susceptance")
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)

    def column(self, bus_id: int) -> np.ndarray:
        return self.matrix[:, self.bus_ids.index(bus_id)]


class InertiaProfile(BaseModel):
    """
    Nodal inertia of every bus plus the intermediate matrices.

    ``h`` is NaN on buses with no electrical path to an inertial source; those
    ids are listed in ``isolated_buses``.
    """
    bus_ids: Tuple[int, ...]
    source_keys: Tuple[str, ...]
    source_H: np.ndarray
    source_D: np.ndarray
    h: np.ndarray
    K: np.ndarray
    K_h: np.ndarray
    F: np.ndarray
    F_h: np.ndarray
    R: np.ndarray
    divider: FreqDivider
    spc: SpcMatrix
    isolated_buses: Tuple[int, ...] = ()

    model_config = ARRAYS

    @field_validator("source_H", "source_D", "h", "K", "K_h", "F", "F_h", "R")
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)

    def h_at(self, bus_id: int) -> float:
        return float(self.h[self.bus_ids.index(bus_id)])

    def as_dict(self) -> Dict[int, float]:
        return {b: float(v) for b, v in zip(self.bus_ids, self.h)}


class NetworkLaplacian(BaseModel):
    bus_ids: Tuple[int, ...]
    L: np.ndarray

    model_config = ARRAYS

    @field_validator("L")
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)


class EmbeddingMode(str, Enum):
    UNDAMPED_PENCIL = "undamped_pencil"
    DAMPED_QEP = "damped_qep"


class SpectralEmbedding(BaseModel):
    """
    First k nontrivial modes of the inertia-weighted network.

    ``magnitudes`` are |lambda| of the candidate modes (trivial mode excluded)
    and ``eigengaps`` the relative gaps between consecutive magnitudes.
    """
    bus_ids: Tuple[int, ...]
    mode: EmbeddingMode
    k: int
    vectors: np.ndarray
    eigenvalues: Tuple[complex, ...]
    magnitudes: Tuple[float, ...]
    eigengaps: Tuple[float, ...]

    model_config = ARRAYS

    @field_validator("vectors")
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)


class PartitionResult(BaseModel):
    """
    Coherent regions of a network.

    ``labels`` maps bus id to a region number in 1..r, numbered by descending
    region size with ties to the lowest bus id. ``selected_r`` and ``silhouette`` describe
    the winning clustering; ``r`` can exceed ``selected_r`` when the connectivity
    repair had to split off a fragment with no neighbouring region.
    """
    labels: Dict[int, int]
    r: int
    selected_r: int
    silhouette: float
    k: int
    mode: EmbeddingMode
    seed: int
    silhouette_by_r: Dict[int, Optional[float]]
    eigengaps: Tuple[float, ...]
    magnitudes: Tuple[float, ...]
    repaired_fragments: Tuple[Tuple[int, ...], ...] = ()

    model_config = ConfigDict(frozen=True)

    def regions(self) -> Tuple[int, ...]:
        return tuple(range(1, self.r + 1))

    def members(self, region: int) -> Tuple[int, ...]:
        return tuple(sorted(b for b, lab in self.labels.items() if lab == region))


class ClusterResult(BaseModel):
    """k-means output; ``history`` is the objective after each assignment step."""
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    history: Tuple[float, ...]
    n_iter: int

    model_config = ARRAYS

    @field_validator("labels", "centroids")
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)

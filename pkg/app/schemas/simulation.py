"""
Simulation Schemas Module

The linearized classical multi-machine model and the trajectories it produces.
"""

from typing import Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.schemas.analysis import readonly

ARRAYS = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class ClassicalModel(BaseModel):
    """
    Swing equations linearized at a snapshot's operating point.

    ``M`` holds 2H per source and ``D`` its damping. ``K_s`` is the
    synchronizing-coefficient matrix of the Kron-reduced source network
    (zero row sums). ``injection`` (n_src x n_bus) distributes a power step
    at a bus over the sources, and ``divider`` maps source speeds to bus
    frequencies.
    """
    bus_ids: Tuple[int, ...]
    source_keys: Tuple[str, ...]
    source_buses: Tuple[int, ...]
    M: np.ndarray
    D: np.ndarray
    K_s: np.ndarray
    injection: np.ndarray
    divider: np.ndarray
    omega_s: float = Field(..., gt=0, description="Synchronous speed, rad/s")

    model_config = ARRAYS

    @field_validator("M", "D", "K_s", "injection", "divider")
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)

    @property
    def n_sources(self) -> int:
        return len(self.source_keys)


class SimResult(BaseModel):
    """
    Trajectories of a load-step run.

    Speeds and frequencies are per-unit deviations. ``bus_rocof`` holds the
    integrator's first-stage slope at every grid time mapped to the buses, in
    p.u./s; index ``step_index`` is the value just after the step.
    """
    bus_ids: Tuple[int, ...]
    source_keys: Tuple[str, ...]
    source_buses: Tuple[int, ...]
    bus: int
    delta_p: float
    t_step: float
    dt: float
    time: np.ndarray
    rotor_angle: np.ndarray
    rotor_speed: np.ndarray
    bus_frequency: np.ndarray
    bus_rocof: np.ndarray
    source_acceleration: np.ndarray

    model_config = ARRAYS

    @field_validator(
        "time", "rotor_angle", "rotor_speed", "bus_frequency", "bus_rocof", "source_acceleration"
    )
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)

    @property
    def step_index(self) -> int:
        return int(np.searchsorted(self.time, self.t_step - 0.5 * self.dt))

    def initial_rocof(self) -> np.ndarray:
        return self.bus_rocof[self.step_index]

    def bus_trace(self, bus_id: int) -> np.ndarray:
        return self.bus_frequency[:, self.bus_ids.index(bus_id)]

    def to_frame(self) -> pd.DataFrame:
        """Long format: time, bus_id, frequency_pu, rocof_pu_per_s."""
        n_t, n_b = self.bus_frequency.shape
        return pd.DataFrame(
            {
                "time_s": np.repeat(self.time, n_b),
                "bus_id": np.tile(np.asarray(self.bus_ids), n_t),
                "frequency_pu": self.bus_frequency.ravel(),
                "rocof_pu_per_s": self.bus_rocof.ravel(),
            }
        )

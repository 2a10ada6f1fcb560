"""
Regional Schemas Module

Results of the regional metrics and what-if studies: per-region effective
and conventional inertia, the minimum-inertia criterion for a new device, and
the two sweep tables.
"""

from enum import Enum
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.schemas.analysis import readonly


class RegionInertia(BaseModel):
    region: int
    members: Tuple[int, ...]
    h_eff: float = Field(..., description="Mean nodal inertia of the member buses, s")
    h_conv: float = Field(..., description="Sum of 2H over the sources in the region, s")
    delta_h_eff: Optional[float] = None
    delta_h_conv: Optional[float] = None

    model_config = ConfigDict(frozen=True)


class RegionalReport(BaseModel):
    name: str = "base"
    base_name: Optional[str] = None
    regions: Tuple[RegionInertia, ...]

    model_config = ConfigDict(frozen=True)

    def region(self, number: int) -> RegionInertia:
        for item in self.regions:
            if item.region == number:
                return item
        raise KeyError(number)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "region": item.region,
                "n_buses": len(item.members),
                "members": " ".join(str(b) for b in item.members),
                "h_eff_seconds": item.h_eff,
                "h_conv_seconds": item.h_conv,
                "delta_h_eff_seconds": item.delta_h_eff,
                "delta_h_conv_seconds": item.delta_h_conv,
            }
            for item in self.regions
        ]
        return pd.DataFrame(rows)


class MinInertiaStatus(str, Enum):
    FINITE = "finite"
    NO_FINITE_H = "no_finite_h"


class FTerms(BaseModel):
    """
    Weights entering the minimum-inertia bound at one bus.

    ``F`` holds D_div[j, k] * dS[k, j] per existing source before the device is
    attached, ``F_prime`` the same after, and ``F_device`` the device's own term.
    """
    source_keys: Tuple[str, ...]
    source_H: Tuple[float, ...]
    F: Tuple[float, ...]
    F_prime: Tuple[float, ...]
    F_device: float

    model_config = ConfigDict(frozen=True)


class MinInertiaResult(BaseModel):
    bus: int
    status: MinInertiaStatus
    h_min: Optional[float] = Field(None, description="Smallest device H keeping h_j from dropping, s")
    h_old: float
    denominator: float
    f_terms: FTerms
    note: str = ""

    model_config = ConfigDict(frozen=True)

    @property
    def feasible(self) -> bool:
        return self.status == MinInertiaStatus.FINITE


class DeviceSweep(BaseModel):
    """Nodal inertia at every bus for each device inertia on the grid."""
    bus: int
    bus_ids: Tuple[int, ...]
    h_grid: Tuple[float, ...]
    h: np.ndarray
    base_h: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("h", "base_h")
    @classmethod
    def freeze_arrays(cls, v):
        return readonly(v)

    def at_bus(self, bus_id: int) -> np.ndarray:
        return self.h[:, self.bus_ids.index(bus_id)]

    def to_frame(self) -> pd.DataFrame:
        """Long format: one row per (grid point, bus)."""
        rows = []
        for n, h_device in enumerate(self.h_grid):
            for m, bus_id in enumerate(self.bus_ids):
                rows.append(
                    {
                        "h_device_seconds": h_device,
                        "bus_id": bus_id,
                        "h_seconds": self.h[n, m],
                        "h_base_seconds": self.base_h[m],
                    }
                )
        return pd.DataFrame(rows)


class ReactanceSweep(BaseModel):
    from_bus: int
    to_bus: int
    region: int
    alphas: Tuple[float, ...]
    h_eff: Tuple[float, ...]
    h_conv: Tuple[float, ...]

    model_config = ConfigDict(frozen=True)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "alpha": self.alphas,
                "region": [self.region] * len(self.alphas),
                "h_eff_seconds": self.h_eff,
                "h_conv_seconds": self.h_conv,
            }
        )

"""
Run configuration assembled by the command line from flags and settings.
"""

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class CommandName(str, Enum):
    INERTIA = "inertia"
    PARTITION = "partition"
    DEVICE_SWEEP = "whatif device-sweep"
    MIN_H = "whatif min-h"
    LINE_SWEEP = "whatif line-sweep"
    SIMULATE = "simulate"


class RunConfig(BaseModel):
    case_path: Path
    command: CommandName
    seed: int = 42
    r_min: int = Field(2, ge=2)
    r_max: int = Field(10, ge=2)
    include_damping: bool = False
    h_grid: Tuple[float, ...] = ()
    alpha_grid: Tuple[float, ...] = ()
    bus: Optional[int] = None
    branch: Optional[Tuple[int, int]] = None
    region: Optional[int] = None
    delta_p: Optional[float] = None
    dt: Optional[float] = Field(None, gt=0)
    horizon: Optional[float] = Field(None, gt=0)
    t_step: float = Field(0.0, ge=0)
    scenarios: Tuple[str, ...] = ()
    compare: Tuple[str, ...] = ()
    device: Optional[dict] = None
    output_dir: Path = Path("out")
    output_format: str = "csv"

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_range(self) -> "RunConfig":
        if self.r_min > self.r_max:
            raise ValueError(f"r range is empty: [{self.r_min}, {self.r_max}]")
        return self

    def digest(self) -> str:
        """SHA-256 of everything that determines the outputs (output directory excluded)."""
        payload = self.model_dump(mode="json", exclude={"output_dir"})
        payload["case_path"] = Path(self.case_path).name
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

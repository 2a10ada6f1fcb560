# app/schemas/__init__.py
from .grid import (
    Branch,
    BranchScaling,
    Bus,
    DeviceKind,
    GridCase,
    InertialDevice,
    MachineReplacement,
    Scenario,
    Snapshot,
    SyncMachine,
    SystemInfo,
)
from .analysis import (
    ClusterResult,
    EigenPair,
    EmbeddingMode,
    FreqDivider,
    InertiaProfile,
    NetworkLaplacian,
    PartitionResult,
    SpcMatrix,
    SpectralEmbedding,
)
from .regional import (
    DeviceSweep,
    FTerms,
    MinInertiaResult,
    MinInertiaStatus,
    ReactanceSweep,
    RegionalReport,
    RegionInertia,
)
from .simulation import ClassicalModel, SimResult
from .run import CommandName, RunConfig

__all__ = [
    'Branch',
    'BranchScaling',
    'Bus',
    'DeviceKind',
    'GridCase',
    'InertialDevice',
    'MachineReplacement',
    'Scenario',
    'Snapshot',
    'SyncMachine',
    'SystemInfo',
    'ClusterResult',
    'EigenPair',
    'EmbeddingMode',
    'FreqDivider',
    'InertiaProfile',
    'NetworkLaplacian',
    'PartitionResult',
    'SpcMatrix',
    'SpectralEmbedding',
    'DeviceSweep',
    'FTerms',
    'MinInertiaResult',
    'MinInertiaStatus',
    'ReactanceSweep',
    'RegionalReport',
    'RegionInertia',
    'ClassicalModel',
    'SimResult',
    'CommandName',
    'RunConfig',
]

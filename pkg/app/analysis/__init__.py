# app/analysis/__init__.py
"""
Inertia analytics on initialized snapshots.

- inertia: frequency divider, synchronizing power coefficients, nodal inertia
- partitioning: inertia-weighted spectral embedding and coherent regions
- regional: regional metrics and what-if studies
- simulation: linear classical swing-equation model and load-step runs
"""

from .inertia import build_frequency_divider, build_spc, damping_distribution, nodal_inertia
from .partitioning import build_laplacian, partition, repair_connectivity, spectral_modes
from .regional import (
    device_h_sweep,
    min_device_inertia,
    reactance_sweep,
    regional_inertia,
    sweep_crossing,
)
from .simulation import (
    assemble_model,
    coherency_spreads,
    regional_average_frequency,
    simulate_load_step,
    state_matrix,
)

__all__ = [
    'build_frequency_divider',
    'build_spc',
    'damping_distribution',
    'nodal_inertia',
    'build_laplacian',
    'partition',
    'repair_connectivity',
    'spectral_modes',
    'device_h_sweep',
    'min_device_inertia',
    'reactance_sweep',
    'regional_inertia',
    'sweep_crossing',
    'assemble_model',
    'coherency_spreads',
    'regional_average_frequency',
    'simulate_load_step',
    'state_matrix',
]

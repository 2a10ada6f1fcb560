# app/analysis/regional.py
"""
Regional inertia metrics and what-if studies.

- regional_inertia: effective (mean nodal h) and conventional (sum of source
  2H) inertia per region, optionally against a base report
- min_device_inertia: smallest device H that does not lower h at its bus
- device_h_sweep / sweep_crossing: h at every bus as the device H varies
- reactance_sweep: regional metrics as one corridor's reactance is scaled

Partitions are held fixed across every study so regions stay comparable.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional, Sequence

import numpy as np

from app.analysis.inertia import build_frequency_divider, build_spc, inertia_terms, nodal_inertia
from app.core.config import get_settings
from app.core.errors import InvalidParameterError
from app.models.grid import attach_device, scale_branch_reactance
from app.models.network import augmented_network
from app.schemas.analysis import InertiaProfile, PartitionResult
from app.schemas.grid import DeviceKind, InertialDevice, Snapshot
from app.schemas.regional import (
    DeviceSweep,
    FTerms,
    MinInertiaResult,
    MinInertiaStatus,
    ReactanceSweep,
    RegionalReport,
    RegionInertia,
)

logger = logging.getLogger(__name__)

# Device H used while only the topology matters; divider and SPC do not depend on it.
PLACEHOLDER_H = 1.0


def conventional_inertia(snapshot: Snapshot, buses: Iterable[int]) -> float:
    """
    Sum of 2H over machines and devices located at ``buses``.

    2H is the inertia coefficient a lone machine contributes to nodal h, so
    the two metrics share a unit.
    """
    members = set(buses)
    total = sum(2.0 * m.inertia_H for m in snapshot.case.machines if m.bus in members)
    total += sum(2.0 * d.inertia_H for d in snapshot.case.devices if d.bus in members)
    return float(total)


def regional_inertia(
    profile: InertiaProfile,
    partition: PartitionResult,
    snapshot: Snapshot,
    base: Optional[RegionalReport] = None,
    name: str = "base",
) -> RegionalReport:
    """Effective and conventional inertia of every region, sorted by region number."""
    if profile.bus_ids != snapshot.case.bus_ids or set(partition.labels) != set(profile.bus_ids):
        raise InvalidParameterError("profile, partition and snapshot must describe the same buses")

    h = np.asarray(profile.h)
    position = {b: n for n, b in enumerate(profile.bus_ids)}
    regions = []
    for region in partition.regions():
        members = partition.members(region)
        h_eff = float(np.mean(h[[position[b] for b in members]]))
        h_conv = conventional_inertia(snapshot, members)
        delta_eff = delta_conv = None
        if base is not None:
            ref = base.region(region)
            delta_eff, delta_conv = h_eff - ref.h_eff, h_conv - ref.h_conv
        regions.append(
            RegionInertia(
                region=region,
                members=members,
                h_eff=h_eff,
                h_conv=h_conv,
                delta_h_eff=delta_eff,
                delta_h_conv=delta_conv,
            )
        )
    return RegionalReport(name=name, base_name=base.name if base else None, regions=tuple(regions))


def _place(snapshot: Snapshot, bus: int, template: InertialDevice) -> InertialDevice:
    if template.kind == DeviceKind.GRID_FOLLOWING:
        raise InvalidParameterError("a grid-following template adds no inertia")
    snapshot.case.bus(bus)
    used = {d.id for d in snapshot.case.devices}
    device_id = template.id if template.id not in used else max(used) + 1
    return template.model_copy(update={"bus": bus, "id": device_id})


def _with_device_topology(snapshot: Snapshot, bus: int, template: InertialDevice):
    """Divider and SPC of the snapshot with the device attached at a placeholder H."""
    device = _place(snapshot, bus, template)
    attached = attach_device(snapshot, device.model_copy(update={"inertia_H": PLACEHOLDER_H}))
    net = augmented_network(attached)
    return device, net, build_frequency_divider(attached, net), build_spc(attached, net)


def _bus_weights(divider: np.ndarray, spc: np.ndarray, j: int) -> np.ndarray:
    return divider[j] * spc[:, j]


def min_device_inertia(
    snapshot: Snapshot,
    bus: int,
    device_template: InertialDevice,
    base_profile: Optional[InertiaProfile] = None,
) -> MinInertiaResult:
    """
    Smallest device H that keeps h at ``bus`` from dropping.

    With F_k = D_div[j, k] dS[k, j] before attachment, F'_k after, and F_dev
    the device's own weight, h_new >= h_old holds iff
    H_dev >= F_dev / sum_k (F_k - F'_k) / H_k. A nonpositive denominator means
    no finite H meets the condition.
    """
    base = base_profile or nodal_inertia(snapshot)
    j = base.bus_ids.index(bus) if bus in base.bus_ids else None
    if j is None or bus in base.isolated_buses:
        raise InvalidParameterError(f"bus {bus} is unknown or has no inertia")

    device, net, divider, spc = _with_device_topology(snapshot, bus, device_template)
    F_old = _bus_weights(base.divider.matrix, base.spc.matrix, j)
    weights = _bus_weights(divider.matrix, spc.matrix, net.bus_ids.index(bus))
    new_keys = list(divider.source_keys)
    F_new = np.array([weights[new_keys.index(key)] for key in base.source_keys])
    F_device = float(weights[new_keys.index(device.key)])

    H = np.asarray(base.source_H)
    denominator = float(np.sum((F_old - F_new) / H))
    h_old = float(base.h[j])
    terms = FTerms(
        source_keys=base.source_keys,
        source_H=tuple(float(x) for x in H),
        F=tuple(float(x) for x in F_old),
        F_prime=tuple(float(x) for x in F_new),
        F_device=F_device,
    )

    if denominator <= 0 or F_device <= 0:
        logger.warning("bus %d: no finite device inertia keeps h from dropping (denominator %.3e)", bus, denominator)
        return MinInertiaResult(
            bus=bus,
            status=MinInertiaStatus.NO_FINITE_H,
            h_min=None,
            h_old=h_old,
            denominator=denominator,
            f_terms=terms,
            note="no finite H improves h_j: the device takes weight from sources without "
                 "lowering their combined inverse inertia",
        )

    h_min = F_device / denominator
    logger.info("bus %d: H_min = %.4g s (h_old = %.4g s)", bus, h_min, h_old)
    return MinInertiaResult(
        bus=bus,
        status=MinInertiaStatus.FINITE,
        h_min=h_min,
        h_old=h_old,
        denominator=denominator,
        f_terms=terms,
    )


def _check_positive(values: Sequence[float], name: str) -> tuple:
    values = tuple(float(v) for v in values)
    if not values or any(not np.isfinite(v) or v <= 0 for v in values):
        raise InvalidParameterError(f"{name} must be a non-empty list of positive numbers")
    return values


def device_h_sweep(
    snapshot: Snapshot,
    bus: int,
    device_template: InertialDevice,
    h_grid: Sequence[float],
    base_profile: Optional[InertiaProfile] = None,
) -> DeviceSweep:
    """Nodal inertia at every bus for each device H on ``h_grid``."""
    h_grid = _check_positive(h_grid, "H grid")
    base = base_profile or nodal_inertia(snapshot)
    device, net, divider, spc = _with_device_topology(snapshot, bus, device_template)
    position = divider.source_keys.index(device.key)
    H_sources = np.array([s.inertia_H for s in net.sources])

    def evaluate(h_device: float) -> np.ndarray:
        H = H_sources.copy()
        H[position] = h_device
        return inertia_terms(divider.matrix, spc.coefficients, H)[3]

    with ThreadPoolExecutor(max_workers=max(1, get_settings().MAX_WORKERS)) as pool:
        rows = list(pool.map(evaluate, h_grid))

    return DeviceSweep(
        bus=bus,
        bus_ids=net.bus_ids,
        h_grid=h_grid,
        h=np.vstack(rows),
        base_h=np.asarray(base.h),
    )


def sweep_crossing(sweep: DeviceSweep, bus: Optional[int] = None) -> Optional[float]:
    """
    Device H at which h at ``bus`` (default: the connection bus) reaches its
    base value, linearly interpolated on the grid. None if it never does.
    """
    bus = sweep.bus if bus is None else bus
    j = sweep.bus_ids.index(bus)
    diff = sweep.at_bus(bus) - sweep.base_h[j]
    grid = np.asarray(sweep.h_grid)
    if diff[0] >= 0:
        return float(grid[0])
    for n in range(1, diff.size):
        if diff[n] >= 0:
            frac = -diff[n - 1] / (diff[n] - diff[n - 1])
            return float(grid[n - 1] + frac * (grid[n] - grid[n - 1]))
    return None


def reactance_sweep(
    snapshot: Snapshot,
    branch: Sequence[int],
    alpha_grid: Sequence[float],
    partition: PartitionResult,
    region: int,
) -> ReactanceSweep:
    """Effective and conventional inertia of ``region`` as the branch reactance is scaled."""
    from_bus, to_bus = int(branch[0]), int(branch[1])
    alphas = _check_positive(alpha_grid, "alpha grid")
    if region not in partition.regions():
        raise InvalidParameterError(f"region {region} not in partition (1..{partition.r})")

    def evaluate(alpha: float):
        scaled = scale_branch_reactance(snapshot, from_bus, to_bus, alpha)
        report = regional_inertia(nodal_inertia(scaled), partition, scaled, name=f"alpha={alpha:g}")
        item = report.region(region)
        return item.h_eff, item.h_conv

    with ThreadPoolExecutor(max_workers=max(1, get_settings().MAX_WORKERS)) as pool:
        results = list(pool.map(evaluate, alphas))

    return ReactanceSweep(
        from_bus=from_bus,
        to_bus=to_bus,
        region=region,
        alphas=alphas,
        h_eff=tuple(r[0] for r in results),
        h_conv=tuple(r[1] for r in results),
    )

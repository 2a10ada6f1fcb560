# tests/integration/test_regional.py

import numpy as np
import pytest

from app.analysis.inertia import nodal_inertia
from app.analysis.partitioning import partition
from app.analysis.regional import (
    conventional_inertia,
    device_h_sweep,
    min_device_inertia,
    reactance_sweep,
    regional_inertia,
    sweep_crossing,
)
from app.core.errors import CaseReferenceError, InvalidParameterError, UnknownBranchError
from app.models.grid import apply_scenario, attach_device
from app.schemas.grid import DeviceKind, InertialDevice
from app.schemas.regional import MinInertiaStatus


def condenser(H: float = 1.0, x: float = 0.1, device_id: int = 900) -> InertialDevice:
    return InertialDevice(
        id=device_id, bus=1, kind=DeviceKind.SYNCHRONOUS_CONDENSER, inertia_H=H, coupling_reactance=x
    )


@pytest.fixture
def two_area_regions(two_area):
    profile = nodal_inertia(two_area)
    return profile, partition(two_area, profile, r_range=(2, 2), seed=42)


# ---------------------------------------------
# Regional metrics
# ---------------------------------------------

def test_regional_inertia_two_areas(two_area, two_area_regions):
    profile, regions = two_area_regions
    report = regional_inertia(profile, regions, two_area)
    h = profile.as_dict()
    first, second = report.region(1), report.region(2)
    assert first.h_eff == pytest.approx(np.mean([h[1], h[2], h[3]]))
    assert second.h_eff == pytest.approx(np.mean([h[4], h[5], h[6]]))
    assert (first.h_conv, second.h_conv) == (12.0, 8.0), "Conventional inertia sums 2H"
    assert first.delta_h_eff is None


def test_regional_deltas_against_base(two_area, two_area_regions):
    profile, regions = two_area_regions
    base = regional_inertia(profile, regions, two_area)
    changed = apply_scenario(two_area, "condenser_at_5")
    report = regional_inertia(nodal_inertia(changed), regions, changed, base=base, name="condenser")
    assert report.base_name == "base"
    assert report.region(2).delta_h_conv == pytest.approx(6.0)
    assert report.region(1).delta_h_conv == pytest.approx(0.0)
    assert report.region(2).delta_h_eff is not None
    assert report.region(2).h_conv == pytest.approx(14.0)


def test_conventional_inertia_counts_devices(two_area):
    changed = apply_scenario(two_area, "condenser_at_5")
    assert conventional_inertia(changed, [4, 5, 6]) == pytest.approx(14.0)
    assert conventional_inertia(changed, []) == 0.0


def test_regional_report_frame(two_area, two_area_regions):
    profile, regions = two_area_regions
    frame = regional_inertia(profile, regions, two_area).to_frame()
    assert list(frame["region"]) == [1, 2]
    assert list(frame["n_buses"]) == [3, 3]


def test_regional_inertia_rejects_mismatched_profile(two_area_regions, wscc9):
    profile, regions = two_area_regions
    with pytest.raises(InvalidParameterError):
        regional_inertia(nodal_inertia(wscc9), regions, wscc9)


# ---------------------------------------------
# Minimum device inertia
# ---------------------------------------------

def test_min_inertia_radial_closed_form(radial):
    """
    Machine path 0.2 p.u. (b = 5), device path 0.1 p.u. (b = 10): F' = 1/9,
    F_dev = 4/9, denominator (1 - 1/9) / 5, so H_min = 2.5 s.
    """
    result = min_device_inertia(radial, 2, condenser())
    assert result.status == MinInertiaStatus.FINITE and result.feasible
    assert result.h_old == pytest.approx(10.0)
    assert result.f_terms.F == pytest.approx((1.0,))
    assert result.f_terms.F_prime == pytest.approx((1.0 / 9.0,))
    assert result.f_terms.F_device == pytest.approx(4.0 / 9.0)
    assert result.h_min == pytest.approx(2.5)


def test_min_inertia_restores_h(wscc9):
    result = min_device_inertia(wscc9, 8, condenser())
    assert result.feasible, f"Expected a finite bound at bus 8, got {result.status}"
    sweep = device_h_sweep(wscc9, 8, condenser(), [result.h_min])
    assert sweep.at_bus(8)[0] == pytest.approx(result.h_old, rel=1e-9)


def test_min_inertia_independent_of_template_h(radial):
    low = min_device_inertia(radial, 2, condenser(H=0.5))
    high = min_device_inertia(radial, 2, condenser(H=50.0))
    assert low.h_min == pytest.approx(high.h_min)


def test_min_inertia_rejects_grid_following(radial):
    gfl = InertialDevice(id=3, bus=2, kind=DeviceKind.GRID_FOLLOWING, coupling_reactance=0.1)
    with pytest.raises(InvalidParameterError):
        min_device_inertia(radial, 2, gfl)


def test_min_inertia_unknown_bus(radial):
    with pytest.raises(InvalidParameterError):
        min_device_inertia(radial, 9, condenser())


# ---------------------------------------------
# Device sweep
# ---------------------------------------------

def test_device_sweep_monotone_and_crossing(radial):
    grid = [0.5, 1.0, 2.0, 3.0, 4.0]
    sweep = device_h_sweep(radial, 2, condenser(), grid)
    at_bus = sweep.at_bus(2)
    assert np.all(np.diff(at_bus) > 0), "h at the device bus grows with the device H"
    assert at_bus[2] < 10.0 < at_bus[3]
    crossing = sweep_crossing(sweep)
    assert 2.0 < crossing < 3.0


def test_device_sweep_frame(radial):
    sweep = device_h_sweep(radial, 2, condenser(), [1.0, 2.0])
    frame = sweep.to_frame()
    assert len(frame) == 4
    assert list(frame.columns) == ["h_device_seconds", "bus_id", "h_seconds", "h_base_seconds"]


def test_device_sweep_no_crossing(radial):
    sweep = device_h_sweep(radial, 2, condenser(), [0.1, 0.2])
    assert sweep_crossing(sweep) is None


def test_device_sweep_reuses_free_id(radial):
    template = condenser(device_id=900)
    with_device = attach_device(radial, template)
    sweep = device_h_sweep(with_device, 2, template, [1.0])
    assert sweep.h.shape == (1, 2)


@pytest.mark.parametrize("grid", [[], [1.0, -1.0], [0.0]], ids=["empty", "negative", "zero"])
def test_device_sweep_rejects_grid(radial, grid):
    with pytest.raises(InvalidParameterError):
        device_h_sweep(radial, 2, condenser(), grid)


def test_device_sweep_unknown_bus(radial):
    with pytest.raises(CaseReferenceError):
        device_h_sweep(radial, 7, condenser(), [1.0])


# ---------------------------------------------
# Reactance sweep
# ---------------------------------------------

def test_reactance_sweep_unit_alpha_matches_base(two_area, two_area_regions):
    profile, regions = two_area_regions
    base = regional_inertia(profile, regions, two_area)
    sweep = reactance_sweep(two_area, (3, 4), [1.0, 2.0, 5.0], regions, 1)
    assert sweep.h_eff[0] == pytest.approx(base.region(1).h_eff)
    assert sweep.h_conv == (12.0, 12.0, 12.0), "Conventional inertia ignores the network"
    frame = sweep.to_frame()
    assert list(frame["alpha"]) == [1.0, 2.0, 5.0]


def test_reactance_sweep_errors(two_area, two_area_regions):
    _, regions = two_area_regions
    with pytest.raises(UnknownBranchError):
        reactance_sweep(two_area, (1, 6), [2.0], regions, 1)
    with pytest.raises(InvalidParameterError):
        reactance_sweep(two_area, (3, 4), [2.0], regions, 9)
    with pytest.raises(InvalidParameterError):
        reactance_sweep(two_area, (3, 4), [0.0], regions, 1)


def test_conventional_inertia_shares_the_nodal_unit(radial):
    assert conventional_inertia(radial, [1, 2]) == pytest.approx(nodal_inertia(radial).h_at(1))


def test_weakening_a_tie_pulls_effective_towards_conventional(ieee39):
    regions = partition(ieee39, nodal_inertia(ieee39))
    region = regions.labels[19]
    sweep = reactance_sweep(ieee39, (16, 19), [1.0, 2.0, 5.0, 10.0, 20.0], regions, region)
    gap = np.abs(np.asarray(sweep.h_eff) - np.asarray(sweep.h_conv))
    assert np.all(np.diff(gap) <= 0.0), f"|H_eff - H_conv| must not grow, got {gap}"
    assert len(set(sweep.h_conv)) == 1, "H_conv depends on the sources only"

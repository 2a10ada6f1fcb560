# tests/integration/test_simulation.py

import json

import numpy as np
import pytest

from app.analysis.inertia import nodal_inertia
from app.analysis.partitioning import partition
from app.analysis.simulation import (
    assemble_model,
    coherency_spreads,
    regional_average_frequency,
    simulate_load_step,
    state_matrix,
)
from app.core.config import Settings
from app.core.errors import InvalidParameterError, SimulationDivergedError
from app.operations.linalg import eig_qep
from tests.conftest import bus, case_tree, line, machine, snapshot_of


@pytest.fixture
def radial_model(radial):
    return assemble_model(radial)


# ---------------------------------------------
# Model assembly
# ---------------------------------------------

def test_single_machine_model(radial_model):
    assert radial_model.M.tolist() == [10.0]
    assert radial_model.K_s == pytest.approx(np.zeros((1, 1)))
    assert radial_model.injection == pytest.approx(np.ones((1, 2)))
    assert radial_model.omega_s == pytest.approx(2 * np.pi * 60.0)


@pytest.mark.parametrize("case_name", ["wscc9", "ieee39"], ids=["wscc9", "ieee39"])
def test_synchronizing_matrix(case_name, request):
    model = assemble_model(request.getfixturevalue(case_name))
    assert np.allclose(model.K_s, model.K_s.T, atol=1e-10)
    assert np.allclose(model.K_s.sum(axis=1), 0.0, atol=1e-9), "K_s rows must sum to zero"
    assert np.allclose(model.injection.sum(axis=0), 1.0, atol=1e-9), "A step is fully shared"


def test_state_matrix_is_stable(wscc9):
    model = assemble_model(wscc9)
    A = state_matrix(model)
    m = model.n_sources
    assert A.shape == (2 * m, 2 * m)
    eigenvalues = np.linalg.eigvals(A)
    assert np.all(eigenvalues.real <= 1e-8), f"Unstable modes: {eigenvalues[eigenvalues.real > 1e-8]}"


# ---------------------------------------------
# Load-step response
# ---------------------------------------------

def test_single_machine_matches_closed_form(radial_model):
    """One machine: omega(t) = -dP / D (1 - exp(-D t / M)) with M = 2H."""
    dp, D, M = 0.1, 2.0, 10.0
    result = simulate_load_step(radial_model, 2, dp, horizon=2.0, dt=0.01)
    expected = -dp / D * (1.0 - np.exp(-D * result.time / M))
    assert np.allclose(result.bus_trace(2), expected, atol=1e-9)
    assert result.initial_rocof() == pytest.approx([-dp / M, -dp / M])


@pytest.mark.parametrize("case_name", ["wscc9", "ieee39"], ids=["wscc9", "ieee39"])
def test_initial_rocof_equals_step_over_nodal_inertia(case_name, request):
    snapshot = request.getfixturevalue(case_name)
    profile = nodal_inertia(snapshot)
    model = assemble_model(snapshot)
    target = snapshot.case.system.reference_step_bus
    result = simulate_load_step(model, target, 0.1, horizon=0.1, dt=0.01)
    j = result.bus_ids.index(target)
    assert result.initial_rocof()[j] == pytest.approx(-0.1 / profile.h[j], rel=1e-9)


@pytest.mark.parametrize("case_name", ["wscc9", "ieee39", "ieee68"], ids=["wscc9", "ieee39", "ieee68"])
def test_nodal_inertia_predicts_initial_rocof_at_random_buses(case_name, request):
    snapshot = request.getfixturevalue(case_name)
    profile = nodal_inertia(snapshot)
    model = assemble_model(snapshot)
    rng = np.random.default_rng(2024)
    buses = rng.choice(profile.bus_ids, size=min(10, len(profile.bus_ids)), replace=False)
    dp = 0.01
    for target in buses.tolist():
        result = simulate_load_step(model, target, dp, horizon=0.01, dt=1e-3)
        j = result.bus_ids.index(target)
        ratio = profile.h[j] * -result.initial_rocof()[j] / dp
        assert abs(ratio - 1.0) < 0.01, f"Bus {target}: h * RoCoF / dP = {ratio:.6f}"


def test_centre_of_inertia_drifts_linearly_without_damping(wscc9_path):
    tree = json.loads(wscc9_path.read_text(encoding="utf-8"))
    for record in tree["machines"]:
        record["damping_D"] = 0.0
    model = assemble_model(snapshot_of(tree))
    dp = 0.1
    result = simulate_load_step(model, 5, dp, horizon=1.0, dt=1e-3)
    momentum = result.rotor_speed @ model.M
    expected = -dp * result.time
    assert np.max(np.abs(momentum - expected)) <= 1e-3 * dp * result.time[-1]


@pytest.mark.parametrize("case_name", ["wscc9", "ieee39"], ids=["wscc9", "ieee39"])
def test_swing_modes_match_state_matrix(case_name, request):
    """Eigenvalues of lambda^2 M + lambda D - omega_s K_s are those of the state matrix."""
    model = assemble_model(request.getfixturevalue(case_name))
    pairs = eig_qep(np.diag(model.M), np.diag(model.D), -model.omega_s * model.K_s)
    from_qep = np.array([p.value for p in pairs])
    from_state = np.linalg.eigvals(state_matrix(model))
    scale = max(1.0, float(np.abs(from_state).max()))
    for value in from_qep:
        assert np.min(np.abs(from_state - value)) < 1e-6 * scale, f"{value} missing from the state matrix"
    for value in from_state:
        assert np.min(np.abs(from_qep - value)) < 1e-6 * scale, f"{value} missing from the quadratic problem"
    oscillatory = sorted(v.imag for v in from_qep if v.imag > 1e-6)
    assert len(oscillatory) == model.n_sources - 1, "One swing mode per machine pair"


def test_step_waits_for_t_step(radial_model):
    result = simulate_load_step(radial_model, 2, 0.1, horizon=1.0, dt=0.01, t_step=0.5)
    assert result.step_index == 50
    assert result.t_step == pytest.approx(0.5)
    assert np.all(result.bus_frequency[:51] == 0.0)
    assert result.bus_frequency[51, 0] < 0.0


def test_zero_step_gives_flat_traces(wscc9):
    result = simulate_load_step(assemble_model(wscc9), 8, 0.0, horizon=0.2, dt=0.01)
    assert np.all(result.bus_frequency == 0.0)
    assert np.all(result.bus_rocof == 0.0)


def test_halving_dt_converges(wscc9):
    model = assemble_model(wscc9)
    coarse = simulate_load_step(model, 8, 0.1, horizon=0.5, dt=0.01)
    fine = simulate_load_step(model, 8, 0.1, horizon=0.5, dt=0.005)
    assert np.allclose(coarse.initial_rocof(), fine.initial_rocof(), atol=1e-4)
    assert np.allclose(coarse.bus_frequency[-1], fine.bus_frequency[-1], atol=1e-4)


def test_result_frame(radial_model):
    result = simulate_load_step(radial_model, 2, 0.1, horizon=0.1, dt=0.05)
    frame = result.to_frame()
    assert list(frame.columns) == ["time_s", "bus_id", "frequency_pu", "rocof_pu_per_s"]
    assert len(frame) == 3 * 2


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dt": 0.0},
        {"dt": -0.01},
        {"horizon": 0.0},
        {"horizon": 100.0},
        {"horizon": 0.01, "dt": 0.1},
        {"bus": 99},
    ],
    ids=["zero_dt", "negative_dt", "zero_horizon", "horizon_over_limit", "dt_over_horizon", "unknown_bus"],
)
def test_simulation_rejects(radial_model, kwargs):
    arguments = {"bus": 2, "delta_p": 0.1, "horizon": 1.0, "dt": 0.01, **kwargs}
    with pytest.raises(InvalidParameterError):
        simulate_load_step(radial_model, **arguments)


def test_step_at_isolated_bus():
    snapshot = snapshot_of(
        case_tree(
            [bus(1), bus(2), bus(3), bus(4)],
            [line(1, 2, 0.1), line(3, 4, 0.1)],
            [machine(1, 1, H=5.0)],
            allow_islands=True,
        )
    )
    with pytest.raises(InvalidParameterError, match="no path"):
        simulate_load_step(assemble_model(snapshot), 4, 0.1, horizon=0.1, dt=0.01)


def test_blow_up_is_reported(radial_model, monkeypatch):
    tight = Settings(_env_file=None, SIM_BLOWUP_THRESHOLD=1e-6)
    monkeypatch.setattr("app.analysis.simulation.get_settings", lambda: tight)
    with pytest.raises(SimulationDivergedError):
        simulate_load_step(radial_model, 2, 0.1, horizon=1.0, dt=0.01)


# ---------------------------------------------
# Regional traces
# ---------------------------------------------

@pytest.fixture
def two_area_run(two_area):
    regions = partition(two_area, nodal_inertia(two_area), r_range=(2, 2), seed=42)
    result = simulate_load_step(assemble_model(two_area), 6, 0.2, horizon=2.0, dt=0.01)
    return result, regions


def test_regional_average_frequency(two_area_run):
    result, regions = two_area_run
    average = regional_average_frequency(result, regions, 2)
    expected = np.mean([result.bus_trace(b) for b in (4, 5, 6)], axis=0)
    assert np.allclose(average, expected)
    assert average.shape == result.time.shape


def test_regional_average_unknown_region(two_area_run):
    result, regions = two_area_run
    with pytest.raises(InvalidParameterError):
        regional_average_frequency(result, regions, 7)


def test_coherency_spreads(two_area_run):
    result, regions = two_area_run
    spreads = coherency_spreads(result, regions)
    assert spreads["within"] == 0.0, "Each area holds one machine"
    assert spreads["across"] > 0.0


@pytest.mark.parametrize(
    "case_name, step_bus",
    [("wscc9", 8), ("ieee39", 10), ("ieee68", 37)],
    ids=["wscc9", "ieee39", "ieee68"],
)
def test_machines_in_one_region_swing_together(case_name, step_bus, request):
    snapshot = request.getfixturevalue(case_name)
    regions = partition(snapshot, nodal_inertia(snapshot))
    result = simulate_load_step(assemble_model(snapshot), step_bus, 0.1, horizon=1.0, dt=1e-3)
    spreads = coherency_spreads(result, regions)
    assert spreads["within"] < spreads["across"], f"Spreads {spreads} after a step at bus {step_bus}"

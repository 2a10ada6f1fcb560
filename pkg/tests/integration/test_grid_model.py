# tests/integration/test_grid_model.py

import cmath
import json
import logging
import math

import pytest

from app.core.errors import (
    CaseInvariantError,
    CaseParseError,
    CaseReferenceError,
    DuplicateIdError,
    InvalidParameterError,
    UnknownBranchError,
)
from app.models.grid import (
    apply_scenario,
    attach_device,
    build_snapshot,
    compute_internal_emf,
    drop_device,
    load_case,
    parse_case,
    replace_machine,
    save_case,
    scale_branch_reactance,
    serialize_case,
)
from app.schemas.grid import DeviceKind, InertialDevice
from tests.conftest import bus, case_tree, line, machine, snapshot_of


def condenser(device_id=900, at=2, H=2.5, x=0.1) -> InertialDevice:
    return InertialDevice(
        id=device_id, bus=at, kind=DeviceKind.SYNCHRONOUS_CONDENSER, inertia_H=H, coupling_reactance=x
    )


# ---------------------------------------------
# Loading
# ---------------------------------------------

def test_load_wscc9(wscc9_path):
    case = load_case(wscc9_path)
    assert len(case.buses) == 9 and len(case.branches) == 9 and len(case.machines) == 3
    assert case.bus(2).voltage_ang == pytest.approx(math.radians(9.28)), "Angles are stored in radians"
    assert case.system.reference_step_bus == 8
    assert [s.name for s in case.scenarios] == ["condenser_bus8"]


def test_shipped_cases_parse(ieee39_path, ieee68_path):
    case39 = load_case(ieee39_path)
    case68 = load_case(ieee68_path)
    assert (len(case39.buses), len(case39.branches), len(case39.machines)) == (39, 46, 10)
    assert (len(case68.buses), len(case68.machines)) == (68, 16)
    assert {s.name for s in case68.scenarios} == {"gfl_replaces_g11", "gfm_nyps"}


def test_lossy_fields_dropped_with_warning(wscc9_path, caplog):
    with caplog.at_level(logging.WARNING, logger="app.models.grid"):
        load_case(wscc9_path)
    assert "resistance" in caplog.text and "charging" in caplog.text


def test_entities_sorted_by_id(radial_tree):
    radial_tree["buses"] = list(reversed(radial_tree["buses"]))
    case = parse_case(radial_tree)
    assert case.bus_ids == (1, 2)


@pytest.mark.parametrize(
    "mutate, error",
    [
        (lambda t: t.pop("buses"), CaseParseError),
        (lambda t: t.update(branches={"a": 1}), CaseParseError),
        (lambda t: t["buses"].append(dict(t["buses"][0])), DuplicateIdError),
        (lambda t: t["branches"].append(line(1, 99, 0.1)), CaseReferenceError),
        (lambda t: t["machines"][0].update(bus=42), CaseReferenceError),
        (lambda t: t["branches"][0].update(reactance=-0.1), CaseInvariantError),
        (lambda t: t["branches"].append(line(2, 2, 0.1)), CaseInvariantError),
        (lambda t: t["machines"][0].update(inertia_H=0.0), CaseInvariantError),
        (lambda t: t["buses"].append(bus(3)), CaseInvariantError),
        (lambda t: t.update(machines=[]), CaseInvariantError),
        (lambda t: t["buses"][0].update(voltage_ang_deg="north"), CaseParseError),
        (lambda t: t["buses"][0].update(colour="red"), CaseParseError),
    ],
    ids=[
        "missing_buses",
        "branches_not_a_list",
        "duplicate_bus_id",
        "branch_to_unknown_bus",
        "machine_at_unknown_bus",
        "negative_reactance",
        "self_loop",
        "zero_inertia_machine",
        "disconnected_bus",
        "no_inertial_source",
        "non_numeric_angle",
        "unknown_field",
    ],
)
def test_parse_rejects(radial_tree, mutate, error):
    mutate(radial_tree)
    with pytest.raises(error):
        parse_case(radial_tree)


def test_islands_allowed_when_declared(radial_tree):
    radial_tree["buses"] += [bus(3), bus(4)]
    radial_tree["branches"].append(line(3, 4, 0.2))
    radial_tree["system"]["allow_islands"] = True
    case = parse_case(radial_tree)
    assert len(case.buses) == 4


def test_load_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"buses": [\n', encoding="utf-8")
    with pytest.raises(CaseParseError, match="line"):
        load_case(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(CaseParseError):
        load_case(tmp_path / "absent.json")


def test_save_and_reload(tmp_path, wscc9_path):
    case = load_case(wscc9_path)
    path = save_case(case, tmp_path / "copy.json")
    again = load_case(path)
    assert again.bus_ids == case.bus_ids
    for a, b in zip(case.buses, again.buses):
        assert b.voltage_ang == pytest.approx(a.voltage_ang, abs=1e-12)
        assert (b.voltage_mag, b.p_load, b.q_load) == (a.voltage_mag, a.p_load, a.q_load)
    assert again.branches == case.branches
    assert again.machines == case.machines
    assert again.scenarios == case.scenarios
    assert "emf_mag" not in json.dumps(serialize_case(case)), "Derived fields are not written"


@pytest.mark.parametrize(
    "path_fixture",
    ["wscc9_path", "ieee39_path", "ieee68_path"],
    ids=["wscc9", "ieee39", "ieee68"],
)
def test_serialize_parse_round_trip(path_fixture, request):
    case = load_case(request.getfixturevalue(path_fixture))
    again = parse_case(json.loads(json.dumps(serialize_case(case))))
    assert again.system == case.system
    assert again.bus_ids == case.bus_ids
    for a, b in zip(case.buses, again.buses):
        assert b.voltage_ang == pytest.approx(a.voltage_ang, abs=1e-12)
        assert (b.voltage_mag, b.p_load, b.q_load) == (a.voltage_mag, a.p_load, a.q_load)
    assert again.branches == case.branches
    assert again.machines == case.machines
    assert again.devices == case.devices
    assert again.scenarios == case.scenarios


# ---------------------------------------------
# Operating point
# ---------------------------------------------

def test_machine_emf_reproduces_terminal_power(wscc9):
    for m in wscc9.case.machines:
        b = wscc9.case.bus(m.bus)
        v = cmath.rect(b.voltage_mag, b.voltage_ang)
        e = cmath.rect(m.emf_mag, m.rotor_angle)
        current = (e - v) / (1j * m.xd_prime)
        s_terminal = v * current.conjugate()
        s_internal = e * current.conjugate()
        assert s_terminal.real == pytest.approx(m.p_gen, abs=1e-12)
        assert s_terminal.imag == pytest.approx(m.q_gen, abs=1e-12)
        assert s_internal.imag == pytest.approx(m.q_gen + m.xd_prime * abs(current) ** 2, abs=1e-12)


def test_device_emf_setpoint(radial_tree):
    radial_tree["buses"][1].update(voltage_mag=1.02, voltage_ang_deg=-5.0)
    radial_tree["devices"] = [
        {"id": 3, "bus": 2, "kind": "grid_forming", "inertia_H": 10.0, "coupling_reactance": 0.05,
         "p_inject": 1.0, "emf_setpoint": 1.05}
    ]
    device = snapshot_of(radial_tree).case.devices[0]
    theta = math.radians(-5.0)
    assert device.emf_mag == 1.05
    transfer = 1.05 * 1.02 * math.sin(device.internal_angle - theta) / 0.05
    assert transfer == pytest.approx(1.0, rel=1e-12)


def test_device_emf_setpoint_beyond_transfer_limit(radial_tree):
    radial_tree["devices"] = [
        {"id": 3, "bus": 2, "kind": "grid_forming", "inertia_H": 10.0, "coupling_reactance": 0.5,
         "p_inject": 5.0, "emf_setpoint": 1.0}
    ]
    with pytest.raises(CaseInvariantError):
        snapshot_of(radial_tree)


def test_grid_following_device_has_no_emf(radial_tree):
    radial_tree["devices"] = [
        {"id": 3, "bus": 2, "kind": "grid_following", "coupling_reactance": 0.05, "p_inject": 1.0}
    ]
    device = snapshot_of(radial_tree).case.devices[0]
    assert device.emf_mag is None and device.internal_angle is None


def test_snapshot_provenance(wscc9_path):
    snapshot = build_snapshot(wscc9_path, ["condenser_bus8"])
    assert snapshot.provenance[0] == "load:wscc9.json"
    assert snapshot.provenance[-1] == "scenario:condenser_bus8"
    assert len(snapshot.provenance) == 3


# ---------------------------------------------
# What-if mutations
# ---------------------------------------------

def test_attach_leaves_input_untouched(radial):
    digest = radial.digest()
    attached = attach_device(radial, condenser())
    assert radial.digest() == digest
    assert len(attached.case.devices) == 1 and attached.case.devices[0].emf_mag == pytest.approx(1.0)
    assert attached.provenance[:-1] == radial.provenance


def test_attach_at_unknown_bus(radial):
    with pytest.raises(CaseReferenceError):
        attach_device(radial, condenser(at=99))


def test_attach_duplicate_device_id(radial):
    once = attach_device(radial, condenser())
    with pytest.raises(DuplicateIdError):
        attach_device(once, condenser())


def test_drop_device(radial):
    attached = attach_device(radial, condenser())
    dropped = drop_device(attached, 900)
    assert dropped.case.devices == ()
    with pytest.raises(CaseReferenceError):
        drop_device(dropped, 900)


def test_replace_machine_moves_device_to_machine_bus(symmetric):
    replaced = replace_machine(symmetric, 2, condenser(device_id=10, at=2, H=4.0))
    assert [m.id for m in replaced.case.machines] == [1]
    assert replaced.case.devices[0].bus == 3


def test_replace_last_machine_without_device(radial):
    with pytest.raises(CaseInvariantError):
        replace_machine(radial, 1)


def test_replace_unknown_machine(radial):
    with pytest.raises(CaseReferenceError):
        replace_machine(radial, 5)


def test_scale_branch_hits_parallel_circuits():
    snapshot = snapshot_of(
        case_tree([bus(1), bus(2)], [line(1, 2, 0.2), line(2, 1, 0.4)], [machine(1, 1, H=3.0)])
    )
    scaled = scale_branch_reactance(snapshot, 1, 2, 2.0)
    assert [br.reactance for br in scaled.case.branches] == pytest.approx([0.4, 0.8])


@pytest.mark.parametrize("alpha", [0.0, -1.0, float("inf")], ids=["zero", "negative", "infinite"])
def test_scale_branch_rejects_alpha(radial, alpha):
    with pytest.raises(InvalidParameterError):
        scale_branch_reactance(radial, 1, 2, alpha)


def test_scale_unknown_branch(symmetric):
    with pytest.raises(UnknownBranchError):
        scale_branch_reactance(symmetric, 1, 3, 2.0)


def test_apply_scenario_by_name(two_area):
    applied = apply_scenario(two_area, "condenser_at_5")
    assert [d.id for d in applied.case.devices] == [50]
    with pytest.raises(CaseReferenceError):
        apply_scenario(two_area, "no_such_scenario")


def test_compute_internal_emf_is_idempotent(wscc9):
    again = compute_internal_emf(wscc9.case)
    assert again.case == wscc9.case

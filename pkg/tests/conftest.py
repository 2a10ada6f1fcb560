import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import pytest
from faker import Faker

from app.models.grid import build_snapshot, compute_internal_emf, parse_case
from app.schemas.grid import Snapshot

# ======================================================================================
# Logging Configuration
# ======================================================================================
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

CASES_DIR = Path(__file__).resolve().parent.parent / "app" / "data" / "cases"

fake = Faker()
Faker.seed(12345)


# ======================================================================================
# Helper Functions
# ======================================================================================
def bus(bus_id: int, vm: float = 1.0, ang_deg: float = 0.0, p_load: float = 0.0, q_load: float = 0.0) -> Dict[str, Any]:
    """Bus record with a generated name."""
    return {
        "id": bus_id,
        "name": fake.city(),
        "voltage_mag": vm,
        "voltage_ang_deg": ang_deg,
        "p_load": p_load,
        "q_load": q_load,
    }


def line(a: int, b: int, x: float, **extra) -> Dict[str, Any]:
    return {"from_bus": a, "to_bus": b, "reactance": x, **extra}


def machine(machine_id: int, at: int, H: float, xd: float = 0.1, D: float = 2.0,
            p: float = 0.0, q: float = 0.0) -> Dict[str, Any]:
    return {"id": machine_id, "bus": at, "inertia_H": H, "damping_D": D,
            "xd_prime": xd, "p_gen": p, "q_gen": q}


def case_tree(buses: List[Dict], branches: List[Dict], machines: List[Dict],
              devices: Optional[List[Dict]] = None, scenarios: Optional[List[Dict]] = None,
              **system) -> Dict[str, Any]:
    return {
        "system": {"name": system.pop("name", "synthetic"), **system},
        "buses": buses,
        "branches": branches,
        "machines": machines,
        "devices": devices or [],
        "scenarios": scenarios or [],
    }


def snapshot_of(tree: Dict[str, Any]) -> Snapshot:
    return compute_internal_emf(parse_case(tree), provenance=("test",))


# ======================================================================================
# Synthetic Case Fixtures
# ======================================================================================
@pytest.fixture
def radial_tree() -> Dict[str, Any]:
    """One machine (H = 5 s behind 0.1 p.u.) feeding bus 2 over 0.1 p.u., flat profile."""
    return case_tree(
        [bus(1), bus(2)],
        [line(1, 2, 0.1)],
        [machine(1, 1, H=5.0, xd=0.1, D=2.0)],
        name="radial",
    )


@pytest.fixture
def radial(radial_tree) -> Snapshot:
    return snapshot_of(radial_tree)


@pytest.fixture
def symmetric() -> Snapshot:
    """Two identical machines at the ends of a 3-bus line."""
    return snapshot_of(
        case_tree(
            [bus(1), bus(2), bus(3)],
            [line(1, 2, 0.1), line(2, 3, 0.1)],
            [machine(1, 1, H=5.0), machine(2, 3, H=5.0)],
            name="symmetric",
        )
    )


@pytest.fixture
def two_area_tree() -> Dict[str, Any]:
    """Two tightly meshed triangles joined by one weak tie (3-4)."""
    return case_tree(
        [bus(b, p_load=0.2) for b in range(1, 7)],
        [
            line(1, 2, 0.01), line(2, 3, 0.01), line(1, 3, 0.01),
            line(4, 5, 0.01), line(5, 6, 0.01), line(4, 6, 0.01),
            line(3, 4, 1.0),
        ],
        [machine(1, 1, H=6.0, xd=0.05), machine(2, 6, H=4.0, xd=0.05)],
        scenarios=[
            {
                "name": "condenser_at_5",
                "attach": [{"id": 50, "bus": 5, "kind": "synchronous_condenser",
                            "inertia_H": 3.0, "coupling_reactance": 0.1}],
            }
        ],
        name="two_area",
    )


@pytest.fixture
def two_area(two_area_tree) -> Snapshot:
    return snapshot_of(two_area_tree)


# ======================================================================================
# Shipped Case Fixtures
# ======================================================================================
@pytest.fixture(scope="session")
def wscc9_path() -> Path:
    return CASES_DIR / "wscc9.json"


@pytest.fixture(scope="session")
def ieee39_path() -> Path:
    return CASES_DIR / "ieee39.json"


@pytest.fixture(scope="session")
def ieee68_path() -> Path:
    return CASES_DIR / "ieee68.json"


@pytest.fixture(scope="session")
def wscc9(wscc9_path) -> Snapshot:
    return build_snapshot(wscc9_path)


@pytest.fixture(scope="session")
def ieee39(ieee39_path) -> Snapshot:
    logger.info("Loading the 39-bus case...")
    return build_snapshot(ieee39_path)


@pytest.fixture(scope="session")
def ieee68(ieee68_path) -> Snapshot:
    logger.info("Loading the 68-bus case...")
    return build_snapshot(ieee68_path)


# ======================================================================================
# Pytest Command-Line Options
# ======================================================================================
def pytest_addoption(parser):
    """
    Add custom command line options:
      --run-slow  : Run tests marked as 'slow'
    """
    parser.addoption("--run-slow", action="store_true", help="Run tests marked as slow")


def pytest_collection_modifyitems(config, items):
    """
    Skip tests marked as 'slow' unless --run-slow is given.
    """
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="use --run-slow to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)

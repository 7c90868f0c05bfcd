import shutil
from pathlib import Path

import pytest
from loguru import logger

from ristl.logging_setup import configure_logging
from ristl.scenario import load_scenario
from ristl.sim import determinize_scenario, run_scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session", autouse=True)
def setup_test_logging():
    """Keep test output quiet; warnings and errors still show."""
    configure_logging("warning")
    logger.debug("Test logging configured")
    yield


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    """Directory of the shipped scenario files."""
    if not SCENARIO_DIR.exists():
        raise FileNotFoundError(f"scenario directory missing: {SCENARIO_DIR}")
    return SCENARIO_DIR


@pytest.fixture(scope="session")
def example2_scenario(scenario_dir):
    return load_scenario(scenario_dir / "example2.toml")


@pytest.fixture(scope="session")
def mission_scenario(scenario_dir):
    return load_scenario(scenario_dir / "mission.toml")


@pytest.fixture(scope="session")
def mission_determinization(mission_scenario):
    """Thresholds for the mission scenario, synthesized once per session."""
    return determinize_scenario(mission_scenario)


@pytest.fixture
def workspace(tmp_path, scenario_dir) -> Path:
    """Temporary directory holding copies of the corridor traces."""
    for name in ("corridor_trace1.csv", "corridor_trace2.csv"):
        shutil.copy(scenario_dir / name, tmp_path / name)
    return tmp_path


@pytest.fixture(scope="session")
def mission_run(mission_scenario, mission_determinization):
    """The nominal closed-loop mission, simulated once per session."""
    return run_scenario(mission_scenario, mission_determinization)

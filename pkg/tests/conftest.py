from pathlib import Path

import numpy as np
import pytest

from effort_audit.data import GERMAN_GRAPH, generate_synthetic, load_german_credit, synthetic_graph

ROOT = Path(__file__).resolve().parents[1]
GERMAN_PATH = ROOT / "data" / "german.data"
CONFIGS = ROOT / "configs"


@pytest.fixture(scope="session")
def synth2():
    return generate_synthetic(1000, 2.0, 0)


@pytest.fixture(scope="session")
def synth_graph2():
    return synthetic_graph(2.0)


@pytest.fixture(scope="session")
def german():
    if not GERMAN_PATH.is_file():
        pytest.skip("german.data not available")
    return load_german_credit(GERMAN_PATH)


@pytest.fixture(scope="session")
def german_graph():
    return GERMAN_GRAPH


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rlab import ExportPanel, split_actors
from rlab.synthetic import WorldConfig, generate_world

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(
        f"[{criterion}] {'PASS' if passed else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_world():
    """Small world for fast functional tests (not the acceptance default)."""
    cfg = WorldConfig(n_blocks=4, products_per_block=10, n_firms=300,
                      mean_firms_per_country=30, n_years=10, lag=3,
                      activation_rate=0.25)
    return generate_world(cfg, seed=11)


@pytest.fixture(scope="session")
def tiny_split(tiny_world):
    panel = tiny_world.firm_panel
    return split_actors(panel.actors, (120, 80, 100), seed=11)


@pytest.fixture()
def hand_panel():
    """3 actors x 2 products x years 2000..2003, designed for hand math."""
    triples = [
        ("X", "0202", 2000, 10.0),
        ("Y", "0101", 2000, 10.0),
        ("Z", "0202", 2000, 30.0),
        ("X", "0101", 2001, 100.0),
        ("Y", "0101", 2001, 50.0),
        ("Y", "0202", 2001, 50.0),
        ("X", "0101", 2003, 100.0),
        ("X", "0202", 2003, 10.0),
        ("Y", "0101", 2003, 50.0),
        ("Y", "0202", 2003, 50.0),
        ("Z", "0101", 2003, 100.0),
    ]
    return ExportPanel.from_triples(triples)


def rand_binary(rng, n, m, p=0.4):
    return (rng.random((n, m)) < p).astype(float)

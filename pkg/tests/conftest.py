import math
import time

import pytest
from hypothesis import settings

from qmarket.experiments import run_experiment
from qmarket.market import MarketConfig

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

RUNS = 40
_verdicts = []


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(ok: bool, label: str, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
        _verdicts.append((request.node.name, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_verdicts):
        terminalreporter.write_line(line)


class Timed:
    def __init__(self, config, runs=RUNS):
        start = time.perf_counter()
        self.experiment = run_experiment(config, runs)
        self.seconds = time.perf_counter() - start


# Full 40 x 1000 experiments on the default seed; shared by every test in the session.

@pytest.fixture(scope="session")
def classical_market():
    return Timed(MarketConfig(mode="classical"))


@pytest.fixture(scope="session")
def quantum_markets():
    return {g: Timed(MarketConfig(mode="quantum", gamma=g)) for g in (0.0, math.pi / 4, math.pi / 2)}

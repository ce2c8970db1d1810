import numpy as np
import pytest

from nsdfm.montecarlo import gen_params, simulate_panel
from nsdfm.rng import stream

_VERDICTS = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict():
    """Record and assert one acceptance criterion: ``verdict(number, checks)``.

    ``checks`` maps a short description to a boolean; the criterion passes
    when all of them hold.
    """

    def _verdict(number: int, checks: dict):
        ok = all(bool(v) for v in checks.values())
        failed = [k for k, v in checks.items() if not v]
        detail = "; ".join(checks) if ok else "failed: " + "; ".join(failed)
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append((number, line))
        print(line)
        assert ok, line

    return _verdict


@pytest.fixture(scope="session")
def sim100():
    """One replication of the simulation design at T = n = 100, m = 50."""
    params = gen_params(100, 4, 3, 3, seed=0)
    return simulate_panel(params, 100, 50, horizon=20, rng=stream(0, "fixture", 100))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

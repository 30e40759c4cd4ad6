import pytest

from mimo_aoi.channel import ChannelConfig
from mimo_aoi.mdp import MdpSpec, make_spec


def spec_from_outage(*outage, delta_max=10):
    """MdpSpec with P_e(k) given directly for k = 1..K."""
    return MdpSpec((0.0, *outage), delta_max)


@pytest.fixture
def reference_point():
    """K = N = 3, d = 3, 20 dB, delta_max = 50."""
    return make_spec(ChannelConfig(3, 3, 100.0, 3.0), 50)


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])

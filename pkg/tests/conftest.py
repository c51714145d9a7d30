import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dgne.game import scalar_quadratic_game
from dgne.topology import Topology, ring

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Two players with Metropolis weights average completely (sigma = 0), which
# leaves the stepsize certificate empty, so the fixture uses a lazier W.
TWO_PLAYER_W = [[0.75, 0.25], [0.25, 0.75]]


@pytest.fixture
def two_player_game():
    """f_i = (x_i - c_i)^2, c = (3, 2), x_1 + x_2 <= 4 split as b_i = 2."""
    return scalar_quadratic_game([3.0, 2.0], [2.0, 2.0])


@pytest.fixture
def two_player_topology():
    return Topology.from_weights(TWO_PLAYER_W)


@pytest.fixture
def ring5_game():
    """Five scalar players, targets (3,2,1,4,5), shared bound sum x <= 10."""
    return scalar_quadratic_game([3.0, 2.0, 1.0, 4.0, 5.0], [2.0] * 5)


@pytest.fixture
def ring5_topology():
    return Topology.from_adjacency(ring(5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report ---------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record and print a ``PASS``/``FAIL`` line for an acceptance criterion."""

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

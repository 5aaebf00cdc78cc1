import pytest

from prt_evm.city import build_ring, load_city
from prt_evm.network import shortest_distances

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def city():
    return load_city()


@pytest.fixture(scope="session")
def city_table(city):
    return shortest_distances(city)


@pytest.fixture
def ring3():
    """Three stations and a capacitor on a one-way loop."""
    return build_ring([("A", "station"), ("B", "station"), ("C", "station"), ("G", "capacitor")],
                      [100, 200, 300, 400])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import pytest
from hypothesis import strategies as st

from cerank.mechanism import Advertiser
from cerank.model import Entity


@st.composite
def entities(draw, min_size=1, max_size=6, max_utility=5.0):
    n = draw(st.integers(min_size, max_size))
    out = []
    for i in range(n):
        c = draw(st.floats(0.0, 1.0))
        g = draw(st.floats(0.0, 1.0)) * (1.0 - c)
        u = draw(st.floats(0.0, max_utility))
        out.append(Entity(f"e{i}", u, c, g))
    return out


@st.composite
def advertisers(draw, min_size=1, max_size=6):
    n = draw(st.integers(min_size, max_size))
    out = []
    for i in range(n):
        c = draw(st.floats(0.01, 1.0))
        g = draw(st.floats(0.0, 1.0)) * (1.0 - c)
        out.append(Advertiser(f"a{i}", draw(st.floats(0.0, 10.0)), c, g))
    return out


@pytest.fixture
def pair():
    """Two entities whose CE order differs from their listed order."""
    return [Entity("A", 1.0, 0.4, 0.1), Entity("B", 2.0, 0.3, 0.2)]


@pytest.fixture
def worked_ads():
    return [Advertiser("a1", 10.0, 0.5, 0.5), Advertiser("a2", 4.0, 0.3, 0.3)]


_acceptance_lines: list[str] = []


@pytest.fixture
def acceptance_log():
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    return _acceptance_lines.append


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)

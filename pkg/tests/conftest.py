import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from kingman_erosion.partitions import Partition

ORACLES = json.loads((Path(__file__).parent / "oracles" / "oracles.json").read_text())


@st.composite
def partitions(draw, min_n=1, max_n=12):
    n = draw(st.integers(min_n, max_n))
    labels = draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    return Partition.from_labels(labels)


def erosion_oracle(n, d):
    """Frozen exact stationary law, keyed by Partition."""
    raw = ORACLES["erosion_stationary"][f"{n}|{float(d)}"]
    return {Partition(json.loads(k)): float(Fraction(v)) for k, v in raw.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

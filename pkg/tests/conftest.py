from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def separable_examples(m=60, seed=3, margin=0.1):
    """Linearly separable points in 3-D labelled by a fixed direction."""
    gen = np.random.default_rng(seed)
    w = np.array([1.0, -2.0, 0.5])
    out = []
    while len(out) < m:
        x = gen.uniform(-1, 1, 3)
        s = float(x @ w)
        if abs(s) >= margin:
            out.append((x, int(s > 0)))
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest
from hypothesis import strategies as st

from jeffrey import Channel, Dist

FIXTURE_C = [[0.9, 0.1], [0.2, 0.8]]


@pytest.fixture
def fixture_channel():
    return Channel(FIXTURE_C)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_simplex(rng, n, floor=0.0):
    w = rng.dirichlet(np.ones(n)) + floor
    return w / w.sum()


def random_positive_channel(rng, n, m, floor=0.01):
    """Strictly positive channel with every entry at least ``floor``."""
    return floor + (1.0 - m * floor) * rng.dirichlet(np.ones(m), size=n)


@st.composite
def simplex(draw, n, min_weight=0.0):
    vals = draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n))
    w = np.array(vals) + min_weight
    return Dist(w / w.sum())


@st.composite
def positive_channel(draw, n, m):
    rows = draw(st.lists(st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m), min_size=n, max_size=n))
    a = np.array(rows)
    return Channel(a / a.sum(axis=1, keepdims=True))


@st.composite
def problem(draw, max_n=6, max_m=6):
    """A strictly positive channel with a full-support prior and an arbitrary-support tau."""
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    c = draw(positive_channel(n, m))
    theta = draw(simplex(n))
    tau_raw = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m)))
    if tau_raw.sum() == 0:
        tau_raw[0] = 1.0
    return c, theta, Dist(tau_raw / tau_raw.sum())


def sparse_instance(rng, n, m, zero_frac=0.5):
    """Sparse channel and tau where every column has a positive entry and every
    row reaches some output that tau charges."""
    tau_w = rng.dirichlet(np.ones(m)) * (rng.random(m) < 0.7)
    if tau_w.sum() == 0:
        tau_w[rng.integers(m)] = 1.0
    charged = np.flatnonzero(tau_w > 0)
    mask = rng.random((n, m)) >= zero_frac
    mask[rng.integers(n, size=m), np.arange(m)] = True
    for x in range(n):
        if not mask[x, charged].any():
            mask[x, rng.choice(charged)] = True
    mat = np.where(mask, rng.random((n, m)) + 0.05, 0.0)
    return Channel(mat / mat.sum(axis=1, keepdims=True)), Dist(tau_w / tau_w.sum())


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

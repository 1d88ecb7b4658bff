import numpy as np
import pytest

from stfnet.config import parse_config

# A miniature network: three short pipelines, kd=1, ts=4. With len=256 it
# gives per-scale lengths (3, 7, 7) and FE = 33.
MINI = {
    "dwcs_pipelines": [
        [[16, 4, "valid"], [4, 2, "valid"], [4, 1, "same"], [8, 1, "same"]],
        [[8, 2, "valid"], [4, 2, "valid"], [4, 1, "same"], [8, 1, "same"]],
        [[4, 2, "valid"], [2, 2, "valid"], [4, 1, "same"], [8, 1, "same"]],
    ],
    "dwcs_pools": {"0": 2, "1": 2, "3": 2},
    "kd": 1,
    "ts": 4,
    "n_windows": 3,
    "fs": 6,
    "fl": 5,
    "fg": 4,
    "heads": 2,
    "gt_channels": 2,
    "head_hidden": 6,
    "domain_hidden": 5,
}

CYCLE4 = np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]], dtype=float)

ACCEPTANCE_LINES = []


def mini_config(**changes):
    data = dict(MINI)
    data.update(changes)
    return parse_config(data)


def cycle_adjacency(v):
    adj = np.zeros((v, v))
    for i in range(v):
        adj[i, (i + 1) % v] = adj[(i + 1) % v, i] = 1.0
    np.fill_diagonal(adj, 0.0)
    return adj


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import re

import numpy as np
import pytest

from uav_aoi.dp import count_action_sequences
from uav_aoi.env import make_spec


def random_micro_spec(rng, max_grid=3, max_nodes=2, max_quanta=6, max_aoi=6, max_horizon=6):
    """Random instance inside the micro envelope (grid <= 3x3, M <= 2, ...)."""
    nx, ny = (int(v) for v in rng.integers(1, max_grid + 1, 2))
    if nx * ny == 1:
        nx = 2
    M = int(rng.integers(1, max_nodes + 1))
    horizon = int(rng.integers(1, max_horizon + 1))
    cells = [(x, y) for x in range(nx) for y in range(ny)]
    while True:
        start = cells[int(rng.integers(len(cells)))]
        final = cells[int(rng.integers(len(cells)))]
        if start != final and abs(start[0] - final[0]) + abs(start[1] - final[1]) <= horizon:
            break
        horizon = min(max_horizon, horizon + 1)
    node_cells = [(int(rng.integers(nx)), int(rng.integers(ny))) for _ in range(M)]
    quanta = [int(rng.integers(0, max_quanta + 1)) for _ in range(M)]
    aoi_cap = int(rng.integers(1, max_aoi + 1))
    return make_spec(
        (nx, ny),
        node_cells,
        quanta,
        horizon,
        start,
        final,
        aoi_cap=aoi_cap,
        spacing=float(rng.choice([50.0, 100.0])),
        initial_aoi=tuple(int(rng.integers(1, aoi_cap + 1)) for _ in range(M)),
        initial_quanta=tuple(int(rng.integers(0, q + 1)) for q in quanta),
    )


def micro_instances(count, seed=2024, max_sequences=20_000):
    """``count`` random micro instances whose feasible sequences are enumerable."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        spec = random_micro_spec(rng)
        if count_action_sequences(spec) <= max_sequences:
            out.append(spec)
    return out


@pytest.fixture(scope="session")
def criterion4_instances():
    return micro_instances(24)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", nodeid)
            if m and getattr(rep, "when", "call") == "call":
                lines.append((int(m.group(1)), m.group(2), "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for num, name, status in sorted(lines):
            terminalreporter.write_line(f"criterion {num:2d} {name:<40s} {status}")

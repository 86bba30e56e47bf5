import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_micro_spec
from uav_aoi.env import (
    MOVEMENTS,
    Action,
    Cell,
    GridSpec,
    InfeasibleActionError,
    NodeConfig,
    NodeState,
    RadioParams,
    SystemState,
    UavState,
    UnreachableTransmissionError,
    channel_gain,
    dbm_to_watts,
    feasible_actions,
    initial_state,
    instantaneous_cost,
    is_terminal,
    make_spec,
    manhattan_cells,
    move_cell,
    required_quanta,
    run_episode,
    step,
    write_trace_csv,
)
from uav_aoi.policies import RandomWalkPolicy

FULL_GRID = GridSpec(11, 11, 100.0, 100.0)
FULL_NODE = NodeConfig.with_quanta((5, 10), 26)


class Fixed:
    """Replays a fixed list of actions."""

    def __init__(self, actions):
        self.actions = list(actions)

    def reset(self):
        self.i = 0

    def act(self, spec, state, feasible, rng):
        a = self.actions[self.i]
        self.i += 1
        return a


class Constant:
    def __init__(self, action):
        self.action = action

    def act(self, spec, state, feasible, rng):
        return self.action


# -- radio -----------------------------------------------------------------------------


def test_gain_same_cell_is_ref_over_height_squared():
    radio = RadioParams(ref_gain=1.0)
    assert channel_gain(radio, FULL_GRID, Cell(5, 5), Cell(5, 5)) == pytest.approx(1e-4, rel=1e-15)


def test_gain_five_cells_north():
    radio = RadioParams(ref_gain=1.0)
    # 1 / (100^2 + 500^2)
    assert channel_gain(radio, FULL_GRID, Cell(5, 5), Cell(5, 10)) == pytest.approx(1 / 260000, rel=1e-12)
    assert channel_gain(radio, FULL_GRID, Cell(5, 5), Cell(5, 10)) == pytest.approx(3.8462e-6, rel=1e-4)


def test_gain_strictly_decreasing_with_distance():
    radio = RadioParams()
    g2 = channel_gain(radio, FULL_GRID, Cell(5, 5), Cell(5, 7))
    g5 = channel_gain(radio, FULL_GRID, Cell(5, 5), Cell(5, 10))
    assert g2 > g5


def test_default_ref_gain_is_calibrated():
    radio = RadioParams(noise_power_w=dbm_to_watts(-100))
    assert radio.noise_power_w == pytest.approx(1e-13)
    assert radio.ref_gain == pytest.approx(1e-13 * (2**20 - 1) / 1e-7)
    assert radio.ref_gain == pytest.approx(1.0486, abs=1e-4)


@pytest.mark.parametrize("uav, expected", [((5, 5), 26), ((5, 8), 5), ((5, 10), 1), ((5, 9), 2), ((4, 9), 3)])
def test_required_quanta_calibration(uav, expected):
    radio = RadioParams()
    gain = channel_gain(radio, FULL_GRID, Cell(*uav), FULL_NODE.cell)
    assert required_quanta(radio, FULL_NODE, gain) == expected


def test_required_quanta_exact_multiple_not_rounded_up():
    # E_tx = sigma^2 / g * (2^(S/B) - 1) = 3 quanta exactly with these numbers
    radio = RadioParams(bandwidth_hz=1.0, packet_bits=1.0, noise_power_w=1.0, ref_gain=1.0, uav_height_m=1.0)
    node = NodeConfig(Cell(0, 0), 1.0, 1)
    assert required_quanta(radio, node, 1 / 3) == 3


def test_required_quanta_non_decreasing_in_distance():
    radio = RadioParams()
    counts = [
        required_quanta(radio, FULL_NODE, channel_gain(radio, FULL_GRID, Cell(5, y), FULL_NODE.cell))
        for y in range(10, -1, -1)
    ]
    assert counts == sorted(counts)


def test_required_quanta_overflow_guard():
    radio = RadioParams()
    gain = channel_gain(radio, FULL_GRID, Cell(5, 5), FULL_NODE.cell)
    with pytest.raises(UnreachableTransmissionError):
        required_quanta(radio, FULL_NODE, gain, max_quanta=10)
    with pytest.raises(UnreachableTransmissionError):
        required_quanta(RadioParams(packet_bits=1e12, ref_gain=1.0), FULL_NODE, gain)


# -- movement --------------------------------------------------------------------------


def test_move_north_interior():
    assert move_cell(FULL_GRID, Cell(5, 5), "N") == Cell(5, 6)


def test_move_off_grid_stays():
    assert move_cell(FULL_GRID, Cell(5, 10), "N") == Cell(5, 10)
    assert move_cell(FULL_GRID, Cell(0, 3), "W") == Cell(0, 3)


@pytest.mark.parametrize("cell", [(0, 0), (5, 5), (10, 10)])
def test_idle_never_moves(cell):
    assert move_cell(FULL_GRID, Cell(*cell), "I") == Cell(*cell)


# -- feasibility -------------------------------------------------------------------------


def test_zero_slack_forces_direct_moves():
    spec = make_spec((5, 1), [(2, 0)], 10, 4, (0, 0), (4, 0))
    s = initial_state(spec)
    assert s.uav.slack == 0
    while not is_terminal(spec, s):
        feas = feasible_actions(spec, s)
        assert {a.movement for a in feas} == {"E"}
        assert s.uav.slack == 0
        s, _ = step(spec, s, feas[0])
    assert s.uav.cell == spec.final_cell and s.slot == spec.horizon + 1


def test_insufficient_battery_blocks_schedule():
    spec = make_spec((11, 11), [(5, 7)], 26, 20, (5, 5), (10, 5), initial_quanta=(3,))
    s = initial_state(spec)
    assert spec.required_at(s.uav.cell, 0) == 5
    assert all(a.schedule != 1 for a in feasible_actions(spec, s))


def test_interior_full_action_set():
    spec = make_spec((5, 5), [(2, 2), (1, 3)], 50, 6, (2, 2), (4, 2))
    s = initial_state(spec)
    assert s.uav.slack >= 2
    feas = feasible_actions(spec, s)
    expected = [Action(v, w) for v in MOVEMENTS for w in range(3)]
    assert list(feas) == expected and len(feas) == 15


def test_feasible_actions_rejects_terminal():
    spec = make_spec((3, 1), [(1, 0)], 2, 3, (2, 0), (2, 0))
    with pytest.raises(InfeasibleActionError):
        feasible_actions(spec, initial_state(spec))


# -- cost ------------------------------------------------------------------------------


def _state(aois, cell=(0, 0), slot=1):
    return SystemState(tuple(NodeState(0, a) for a in aois), UavState(Cell(*cell), 0), slot)


def test_cost_minimum_three_nodes():
    spec = make_spec((3, 3), [(0, 0), (1, 1), (2, 2)], 1, 4, (0, 0), (2, 2))
    assert instantaneous_cost(spec, _state((1, 1, 1))) == pytest.approx(1.0)


def test_cost_two_nodes():
    spec = make_spec((3, 3), [(0, 0), (1, 1)], 1, 4, (0, 0), (2, 2))
    assert instantaneous_cost(spec, _state((1, 2))) == 1.5


def test_cost_saturated():
    spec = make_spec((3, 3), [(0, 0)], 1, 4, (0, 0), (2, 2), aoi_cap=7)
    assert instantaneous_cost(spec, _state((7,))) == 7


# -- step --------------------------------------------------------------------------------


def test_step_scheduled_node_resets_and_pays():
    spec = make_spec((5, 5), [(2, 2), (0, 0)], 10, 8, (2, 2), (4, 2), initial_aoi=(4, 3))
    s = initial_state(spec)
    nxt, cost = step(spec, s, Action("E", 1))
    assert cost == pytest.approx(0.5 * 4 + 0.5 * 3)
    assert nxt.nodes[0] == NodeState(10 - spec.required_at(Cell(2, 2), 0), 1)
    assert nxt.nodes[1] == NodeState(10, 4)
    assert nxt.uav.cell == Cell(3, 2) and nxt.slot == 2


def test_step_unscheduled_node_saturates():
    spec = make_spec((5, 5), [(2, 2)], 10, 8, (2, 2), (4, 2), aoi_cap=5, initial_aoi=(5,))
    nxt, _ = step(spec, initial_state(spec), Action("E", 0))
    assert nxt.nodes[0].aoi == 5


def test_step_rejects_infeasible():
    spec = make_spec((5, 1), [(2, 0)], 10, 4, (0, 0), (4, 0))
    with pytest.raises(InfeasibleActionError):
        step(spec, initial_state(spec), Action("W", 0))


def test_hand_computed_trace():
    # 3x1 grid, node in the middle; 2 quanta from an adjacent cell, 1 from above it.
    spec = make_spec((3, 1), [(1, 0)], 6, 4, (0, 0), (2, 0), aoi_cap=5)
    actions = [Action("I", 1), Action("E", 0), Action("I", 1), Action("E", 1)]
    total, trace = run_episode(spec, Fixed(actions), 0)
    got = [(s.slot, tuple(s.uav.cell), s.uav.slack, s.nodes[0].energy_quanta, s.nodes[0].aoi, c) for s, _, c in trace]
    assert got == [
        (1, (0, 0), 2, 6, 1, 1.0),
        (2, (0, 0), 1, 4, 1, 1.0),
        (3, (1, 0), 1, 4, 2, 2.0),
        (4, (1, 0), 0, 3, 1, 1.0),
    ]
    assert total == 5.0


# -- termination and episodes ------------------------------------------------------------


def test_terminal_at_final_cell_any_slot():
    spec = make_spec((3, 1), [(1, 0)], 2, 4, (0, 0), (2, 0))
    for slot in (1, 3, 5):
        assert is_terminal(spec, _state((1,), cell=(2, 0), slot=slot))


def test_fresh_episode_not_terminal():
    spec = make_spec((3, 1), [(1, 0)], 2, 4, (0, 0), (2, 0))
    assert not is_terminal(spec, initial_state(spec))


def test_zero_length_episode():
    spec = make_spec((3, 3), [(1, 1)], 2, 4, (1, 1), (1, 1))
    total, trace = run_episode(spec, Constant(Action("I", 0)), 0)
    assert total == 0 and trace == []


def test_no_update_episode_cost():
    spec = make_spec((6, 1), [(2, 0)], 0, 5, (0, 0), (5, 0), aoi_cap=5)
    total, trace = run_episode(spec, Constant(Action("E", 0)), 0)
    assert total == 1 + 2 + 3 + 4 + 5
    assert len(trace) == 5


def test_episode_determinism():
    spec = make_spec((4, 4), [(1, 3), (3, 0)], 6, 10, (0, 0), (3, 3))
    assert run_episode(spec, RandomWalkPolicy(), 7) == run_episode(spec, RandomWalkPolicy(), 7)


def test_trace_csv(tmp_path):
    spec = make_spec((3, 1), [(1, 0)], 6, 4, (0, 0), (2, 0), aoi_cap=5)
    _, trace = run_episode(spec, Fixed([Action("I", 1), Action("E", 0), Action("I", 1), Action("E", 1)]), 0)
    path = tmp_path / "trace.csv"
    write_trace_csv(spec, trace, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["slot", "uav_ix", "uav_iy", "movement", "schedule", "cost", "aoi_1", "energy_1"]
    assert rows[1] == ["1", "0", "0", "I", "1", "1.0", "1", "6"]
    assert len(rows) == 5


# -- spec validation ---------------------------------------------------------------------


def test_unreachable_final_rejected():
    with pytest.raises(ValueError):
        make_spec((11, 11), [(1, 1)], 2, 5, (0, 5), (10, 5))


def test_cells_outside_grid_rejected():
    with pytest.raises(ValueError):
        make_spec((3, 3), [(1, 1)], 2, 5, (0, 5), (1, 1))
    with pytest.raises(ValueError):
        make_spec((3, 3), [(3, 1)], 2, 5, (0, 0), (1, 1))


# -- invariants along random trajectories -------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trajectory_invariants(seed):
    rng = np.random.default_rng(seed)
    spec = random_micro_spec(rng, max_grid=4, max_horizon=8)
    total, trace = run_episode(spec, RandomWalkPolicy(), rng)
    states = [t.state for t in trace]
    final, _ = step(spec, trace[-1].state, trace[-1].action) if trace else (initial_state(spec), 0)
    states.append(final)
    lo = sum(n.weight for n in spec.nodes)
    hi = sum(n.weight * n.aoi_cap for n in spec.nodes)
    for (s, a, c), nxt in zip(trace, states[1:]):
        assert lo - 1e-12 <= c <= hi + 1e-12
        assert spec.grid.contains(nxt.uav.cell)
        assert nxt.uav.slack >= 0
        assert manhattan_cells(s.uav.cell, nxt.uav.cell) <= 1
        for m, (before, after) in enumerate(zip(s.nodes, nxt.nodes)):
            assert after.energy_quanta <= before.energy_quanta
            assert 0 <= after.energy_quanta <= spec.nodes[m].quanta_capacity
            if a.schedule == m + 1:
                assert after.aoi == 1
            else:
                assert after.aoi == min(spec.nodes[m].aoi_cap, before.aoi + 1)
                assert after.energy_quanta == before.energy_quanta
    assert is_terminal(spec, final)
    assert final.uav.cell == spec.final_cell and final.slot <= spec.horizon + 1
    assert math.isclose(total, sum(t.cost for t in trace))

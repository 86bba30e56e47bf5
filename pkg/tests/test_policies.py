import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import random_micro_spec
from uav_aoi.env import (
    Action,
    Cell,
    NodeState,
    UavState,
    feasible_actions,
    initial_state,
    is_terminal,
    make_spec,
    slack_of,
    step,
)
from uav_aoi.policies import (
    DistanceBasedPolicy,
    Policy,
    RandomWalkPolicy,
    distance_based_act,
    random_walk_act,
)


def layout(node_cells=((0, 2), (4, 4)), quanta=10, horizon=10):
    return make_spec((5, 5), list(node_cells), quanta, horizon, (0, 2), (4, 2), aoi_cap=20)


def state_at(spec, cell, aoi=None, slot=1):
    s0 = initial_state(spec)
    aoi = aoi or [1] * spec.num_nodes
    nodes = tuple(NodeState(n.energy_quanta, a) for n, a in zip(s0.nodes, aoi))
    cell = Cell(*cell)
    return s0._replace(nodes=nodes, uav=UavState(cell, slack_of(spec, cell, slot)), slot=slot)


def test_colocated_charged_node_is_scheduled():
    spec = layout()
    s = initial_state(spec)
    assert distance_based_act(spec, s, feasible_actions(spec, s)).schedule == 1


def test_far_nodes_schedule_nothing_and_close_in():
    spec = layout()
    s = state_at(spec, (2, 0), aoi=[1, 5])
    a = distance_based_act(spec, s, feasible_actions(spec, s))
    assert a == Action("N", 0)
    nxt, _ = step(spec, s, a)
    target = spec.nodes[1].cell
    assert np.hypot(*np.subtract(nxt.uav.cell, target)) < np.hypot(*np.subtract(s.uav.cell, target))


def test_aoi_tie_targets_lower_index():
    spec = layout(node_cells=((0, 2), (4, 2)))
    s = state_at(spec, (2, 2), aoi=[3, 3])
    assert distance_based_act(spec, s, feasible_actions(spec, s)) == Action("W", 0)


def test_empty_battery_blocks_schedule():
    spec = make_spec((5, 5), [(0, 2), (1, 2)], [0, 10], 10, (0, 2), (4, 2), aoi_cap=20)
    s = initial_state(spec)
    feasible = feasible_actions(spec, s)
    assert distance_based_act(spec, s, feasible).schedule == 0
    assert distance_based_act(spec, s, feasible, fallback_next_closest=True).schedule == 2


def test_movement_respects_slack():
    spec = layout(horizon=4)
    s = state_at(spec, (0, 2), aoi=[1, 9])
    a = distance_based_act(spec, s, feasible_actions(spec, s))
    assert a.movement == "E"


def test_random_walk_is_uniform():
    spec = layout()
    s = state_at(spec, (2, 2))
    feasible = feasible_actions(spec, s)
    k = len(feasible)
    assert k > 5
    rng = np.random.default_rng(123)
    counts = dict.fromkeys(feasible, 0)
    for _ in range(100_000):
        counts[random_walk_act(spec, s, feasible, rng)] += 1
    assert chisquare(list(counts.values())).pvalue > 0.01


def test_single_feasible_action_is_certain():
    spec = layout()
    s = initial_state(spec)
    only = [Action("E", 0)]
    rng = np.random.default_rng(0)
    assert all(random_walk_act(spec, s, only, rng) == only[0] for _ in range(50))
    assert distance_based_act(spec, s, only) == only[0]


def test_random_walk_reproducible():
    spec = layout()
    s = state_at(spec, (2, 2))
    feasible = feasible_actions(spec, s)

    def draw(seed):
        rng = np.random.default_rng(seed)
        return [random_walk_act(spec, s, feasible, rng) for _ in range(30)]

    assert draw(4) == draw(4)
    assert draw(4) != draw(5)


@pytest.mark.parametrize("policy", [DistanceBasedPolicy(), DistanceBasedPolicy(fallback_next_closest=True), RandomWalkPolicy()])
def test_policies_are_feasibility_safe(policy):
    rng = np.random.default_rng(99)
    for _ in range(40):
        spec = random_micro_spec(rng, max_grid=4, max_horizon=8)
        s = initial_state(spec)
        while not is_terminal(spec, s):
            feasible = feasible_actions(spec, s)
            a = policy.act(spec, s, feasible, rng)
            assert a in feasible
            s, _ = step(spec, s, a)
        assert s.uav.cell == spec.final_cell


def test_distance_policy_is_pure():
    rng = np.random.default_rng(8)
    for _ in range(20):
        spec = random_micro_spec(rng)
        s = initial_state(spec)
        feasible = feasible_actions(spec, s)
        first = distance_based_act(spec, s, feasible)
        assert all(distance_based_act(spec, s, feasible) == first for _ in range(3))


def test_policy_protocol():
    assert isinstance(DistanceBasedPolicy(), Policy)
    assert isinstance(RandomWalkPolicy(), Policy)

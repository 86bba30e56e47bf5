"""Policy interface and the two comparison baselines."""

from __future__ import annotations

import math
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .env import Action, EnvSpec, SystemState, move_cell


@runtime_checkable
class Policy(Protocol):
    """Anything with ``act``; ``reset`` is optional and called once per episode."""

    def act(
        self, spec: EnvSpec, state: SystemState, feasible: Sequence[Action], rng: np.random.Generator
    ) -> Action: ...


def _cell_distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def distance_based_act(
    spec: EnvSpec,
    state: SystemState,
    feasible: Sequence[Action],
    threshold: float = 2.0,
    fallback_next_closest: bool = False,
) -> Action:
    """Refresh the nearest node when it is close, and fly toward the stalest node.

    The nearest node (Euclidean distance over cell indices, lowest index on
    ties) is scheduled when its distance is strictly below ``threshold`` and
    the transmission is feasible. With ``fallback_next_closest`` the next
    nearest nodes under the threshold are tried in turn; otherwise nothing is
    scheduled. The movement is the feasible one that ends closest to the node
    with the largest AoI, ties broken by N, S, E, W, I.
    """
    cell = state.uav.cell
    feasible = list(feasible)
    schedulable = {a.schedule for a in feasible}
    order = sorted(range(spec.num_nodes), key=lambda m: (_cell_distance(cell, spec.nodes[m].cell), m))
    if not fallback_next_closest:
        order = order[:1]
    schedule = 0
    for m in order:
        if _cell_distance(cell, spec.nodes[m].cell) >= threshold:
            break
        if m + 1 in schedulable:
            schedule = m + 1
            break

    ages = [s.aoi for s in state.nodes]
    target = spec.nodes[ages.index(max(ages))].cell
    best = None
    for a in feasible:  # canonical order, so the first minimum wins ties
        if a.schedule != schedule:
            continue
        d = _cell_distance(move_cell(spec.grid, cell, a.movement), target)
        if best is None or d < best[0]:
            best = (d, a)
    return best[1]


def random_walk_act(
    spec: EnvSpec, state: SystemState, feasible: Sequence[Action], rng: np.random.Generator
) -> Action:
    return feasible[int(rng.integers(len(feasible)))]


class DistanceBasedPolicy:
    name = "distance"

    def __init__(self, threshold: float = 2.0, fallback_next_closest: bool = False):
        self.threshold = threshold
        self.fallback_next_closest = fallback_next_closest

    def act(self, spec, state, feasible, rng=None) -> Action:
        return distance_based_act(spec, state, feasible, self.threshold, self.fallback_next_closest)


class RandomWalkPolicy:
    name = "random"

    def act(self, spec, state, feasible, rng) -> Action:
        return random_walk_act(spec, state, feasible, rng)

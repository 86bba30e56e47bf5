"""Exact finite-horizon solver for micro instances.

States are laid out on the full lattice
``prod_m (E_m x A_m) x cells x slots`` with the slot as the slowest axis, so
each time stage is one contiguous block and backward induction runs as a
handful of numpy operations per stage. The slack component of the state is
implied by the cell and the slot.

Lattice points whose slack is negative are not valid states; they get an
infinite value and no action. Terminal points (UAV on the final cell, or
slot past the horizon) have value 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .env import (
    MOVEMENTS,
    Action,
    EnvSpec,
    NodeState,
    SystemState,
    UavState,
    action_from_index,
    feasible_actions,
    initial_state,
    is_terminal,
    manhattan_cells,
    move_cell,
    run_episode,
    slack_of,
    step,
)

DEFAULT_STATE_CAP = 10**7


class StateSpaceTooLarge(ValueError):
    def __init__(self, size: int, cap: int):
        super().__init__(f"state lattice has {size} points, cap is {cap}")
        self.size = size
        self.cap = cap


class TooManySequences(RuntimeError):
    pass


class StateIndex:
    """Dense bijection between lattice states and integers ``0..size-1``."""

    def __init__(self, spec: EnvSpec, cap: int = DEFAULT_STATE_CAP):
        self.spec = spec
        dims = []
        for node in spec.nodes:
            dims += [node.quanta_capacity + 1, node.aoi_cap]
        dims.append(spec.grid.num_cells)
        self.dims = tuple(dims)
        self.per_stage = math.prod(self.dims)
        self.num_stages = spec.horizon + 1
        self.size = self.per_stage * self.num_stages
        if self.size > cap:
            raise StateSpaceTooLarge(self.size, cap)
        self.strides = tuple(int(s) for s in np.cumprod((1,) + self.dims[:0:-1])[::-1])
        self.reachable: np.ndarray | None = None

    def __len__(self) -> int:
        return self.size

    def encode(self, state: SystemState) -> int:
        idx = 0
        k = 0
        for s in state.nodes:
            idx += s.energy_quanta * self.strides[k] + (s.aoi - 1) * self.strides[k + 1]
            k += 2
        idx += self.spec.grid.cell_index(state.uav.cell)
        return (state.slot - 1) * self.per_stage + idx

    def decode(self, index: int) -> SystemState:
        if not 0 <= index < self.size:
            raise IndexError(index)
        slot0, inner = divmod(index, self.per_stage)
        comps = np.unravel_index(inner, self.dims)
        nodes = tuple(
            NodeState(int(comps[2 * m]), int(comps[2 * m + 1]) + 1) for m in range(self.spec.num_nodes)
        )
        cell = self.spec.grid.cell_at(int(comps[-1]))
        slot = slot0 + 1
        return SystemState(nodes, UavState(cell, slack_of(self.spec, cell, slot)), slot)

    def __iter__(self) -> Iterator[SystemState]:
        for i in range(self.size):
            yield self.decode(i)


def enumerate_states(spec: EnvSpec, cap: int = DEFAULT_STATE_CAP, prune: bool = False) -> StateIndex:
    """Index the state lattice; with ``prune`` also mark states reachable from s(1)."""
    index = StateIndex(spec, cap)
    if prune:
        index.reachable = _reachable_mask(spec, index)
    return index


def _reachable_mask(spec: EnvSpec, index: StateIndex) -> np.ndarray:
    mask = np.zeros(index.size, dtype=bool)
    frontier = {initial_state(spec)}
    while frontier:
        nxt = set()
        for s in frontier:
            mask[index.encode(s)] = True
            if is_terminal(spec, s):
                continue
            for a in feasible_actions(spec, s):
                nxt.add(step(spec, s, a, check=False)[0])
        frontier = nxt
    return mask


@dataclass
class DPSolution:
    spec: EnvSpec
    index: StateIndex
    values: np.ndarray  # shape (num_stages, per_stage)
    actions: np.ndarray  # action index, -1 where terminal or dead

    def value(self, state: SystemState) -> float:
        return float(self.values.reshape(-1)[self.index.encode(state)])

    def action(self, state: SystemState) -> Action | None:
        a = int(self.actions.reshape(-1)[self.index.encode(state)])
        return None if a < 0 else action_from_index(self.spec, a)

    @property
    def initial_value(self) -> float:
        return self.value(initial_state(self.spec))

    def policy(self) -> "DPPolicy":
        return DPPolicy(self)

    def greedy_trajectory(self):
        return run_episode(self.spec, self.policy(), 0)

    def value_map(self) -> dict[SystemState, float]:
        """All lattice states (only reachable ones if the index was pruned)."""
        flat = self.values.reshape(-1)
        keep = self.index.reachable
        return {
            self.index.decode(i): float(flat[i])
            for i in range(self.index.size)
            if keep is None or keep[i]
        }


class DPPolicy:
    """Plays the optimal action stored in a :class:`DPSolution`."""

    name = "dp"

    def __init__(self, solution: DPSolution):
        self.solution = solution

    def act(self, spec, state, feasible, rng=None) -> Action:
        return self.solution.action(state)


def solve(spec: EnvSpec, cap: int = DEFAULT_STATE_CAP, prune: bool = False) -> DPSolution:
    """Backward induction over the whole lattice.

    Ties between equally good actions go to the first one in canonical
    order ``(N,S,E,W,I) x (0..M)``.
    """
    index = enumerate_states(spec, cap, prune)
    M = spec.num_nodes
    grid = spec.grid
    P = index.per_stage
    comps = np.unravel_index(np.arange(P), index.dims)
    energy = [comps[2 * m] for m in range(M)]
    aoi = [comps[2 * m + 1] + 1 for m in range(M)]
    cell = comps[-1]

    cost = np.zeros(P)
    for m, node in enumerate(spec.nodes):
        cost += node.weight * aoi[m]

    cells = grid.cells()
    final = grid.cell_index(spec.final_cell)
    dist = np.array([manhattan_cells(c, spec.final_cell) for c in cells])
    next_cell = np.array([[grid.cell_index(move_cell(grid, c, v)) for v in MOVEMENTS] for c in cells])
    req = spec.quanta_table  # (cells, M), unreachable entries exceed any battery

    # node part of the successor index for each schedule w, plus feasibility
    node_part = []
    sched_ok = []
    for w in range(M + 1):
        part = np.zeros(P, dtype=np.int64)
        ok = np.ones(P, dtype=bool)
        for m, node in enumerate(spec.nodes):
            se, sa = index.strides[2 * m], index.strides[2 * m + 1]
            if w == m + 1:
                need = req[cell, m]
                ok &= energy[m] >= need
                part += np.where(ok, energy[m] - need, 0) * se
            else:
                part += energy[m] * se
                part += (np.minimum(node.aoi_cap, aoi[m] + 1) - 1) * sa
        node_part.append(part)
        sched_ok.append(ok)

    values = np.zeros((index.num_stages, P))
    actions = np.full((index.num_stages, P), -1, dtype=np.int16)
    at_final = cell == final
    n_act = spec.num_actions
    for slot in range(spec.horizon, 0, -1):
        remaining = spec.horizon - slot
        v_next = values[slot]  # stage of slot + 1
        q = np.full((n_act, P), np.inf)
        for vi in range(len(MOVEMENTS)):
            nc = next_cell[cell, vi]
            move_ok = dist[nc] <= remaining
            for w in range(M + 1):
                ok = move_ok & sched_ok[w]
                succ = node_part[w] + nc
                q[vi * (M + 1) + w] = np.where(ok, cost + v_next[np.where(ok, succ, 0)], np.inf)
        best = np.argmin(q, axis=0)
        v = q[best, np.arange(P)]
        live = np.isfinite(v) & ~at_final
        values[slot - 1] = np.where(at_final, 0.0, v)
        actions[slot - 1] = np.where(live, best, -1)
    sol = DPSolution(spec, index, values, actions)
    if prune:
        sol.values.reshape(-1)[~index.reachable] = np.nan
    return sol


def exhaustive_search(spec: EnvSpec, max_sequences: int = 10**6) -> tuple[float, list[Action]]:
    """Minimum episode cost by enumerating every feasible action sequence.

    Independent of :func:`solve`: plain depth-first search over the scalar
    environment, no memoization.
    """
    best = [math.inf, []]
    count = [0]

    def dfs(state, acc, path):
        if is_terminal(spec, state):
            count[0] += 1
            if count[0] > max_sequences:
                raise TooManySequences(f"more than {max_sequences} action sequences")
            if acc < best[0]:
                best[0], best[1] = acc, list(path)
            return
        for a in feasible_actions(spec, state):
            nxt, c = step(spec, state, a, check=False)
            path.append(a)
            dfs(nxt, acc + c, path)
            path.pop()

    dfs(initial_state(spec), 0.0, [])
    return best[0], best[1]


def count_action_sequences(spec: EnvSpec) -> int:
    """Number of feasible action sequences from s(1), counted with memoization."""
    memo: dict[SystemState, int] = {}

    def count(state):
        if is_terminal(spec, state):
            return 1
        if state not in memo:
            memo[state] = sum(count(step(spec, state, a, check=False)[0]) for a in feasible_actions(spec, state))
        return memo[state]

    return count(initial_state(spec))


def evaluate_policy(spec: EnvSpec, policy, episodes: int, seed=None) -> tuple[float, float]:
    """Monte-Carlo mean and (population) std of episode totals."""
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    rng = np.random.default_rng(seed)
    totals = [run_episode(spec, policy, rng)[0] for _ in range(episodes)]
    return float(np.mean(totals)), float(np.std(totals))

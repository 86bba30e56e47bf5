"""Tabular Q-learning on the dense state lattice of a micro instance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dp import DEFAULT_STATE_CAP, StateIndex
from .env import (
    EnvSpec,
    action_from_index,
    action_index,
    feasible_actions,
    feasible_mask,
    initial_state,
    is_terminal,
    step,
)


@dataclass
class QTable:
    values: np.ndarray  # (states, actions); Q-values are costs
    learning_rate: float = 1.0
    discount: float = 1.0

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")

    @classmethod
    def zeros(cls, num_states: int, num_actions: int, **kwargs) -> "QTable":
        return cls(np.zeros((num_states, num_actions)), **kwargs)


def tabular_q_update(
    table: QTable,
    state: int,
    action: int,
    cost: float,
    next_state: int | None,
    feasible_next: np.ndarray | None,
) -> QTable:
    """One Bellman update of entry ``(state, action)``, in place.

    The bootstrap minimum runs over ``feasible_next`` only; an empty mask
    (or ``next_state is None``) means the successor is terminal.
    """
    if next_state is None or feasible_next is None or not feasible_next.any():
        bootstrap = 0.0
    else:
        bootstrap = table.values[next_state][feasible_next].min()
    old = table.values[state, action]
    table.values[state, action] = old + table.learning_rate * (cost + table.discount * bootstrap - old)
    return table


def greedy_action_index(values: np.ndarray, mask: np.ndarray) -> int:
    """First action (canonical order) with the smallest value among ``mask``."""
    return int(np.argmin(np.where(mask, values, np.inf)))


class TabularQPolicy:
    name = "tabular-q"

    def __init__(self, table: QTable, index: StateIndex):
        self.table = table
        self.index = index

    def act(self, spec, state, feasible, rng=None):
        mask = np.zeros(spec.num_actions, dtype=bool)
        for a in feasible:
            mask[action_index(spec, a)] = True
        return action_from_index(spec, greedy_action_index(self.table.values[self.index.encode(state)], mask))


@dataclass
class TabularConfig:
    episodes: int = 5000
    learning_rate: float = 1.0
    epsilon_start: float = 1.0
    epsilon_end: float = 0.0
    epsilon_decay_fraction: float = 0.5
    seed: int = 0


def train_tabular(spec: EnvSpec, config: TabularConfig = TabularConfig(), cap: int = DEFAULT_STATE_CAP):
    """Epsilon-greedy Q-learning from a zero table.

    Returns ``(policy, curve)`` where ``curve`` holds the episode totals.
    Zero is a lower bound on every true Q-value here, so the zero start is
    optimistic and keeps the greedy policy exploring.
    """
    index = StateIndex(spec, cap)
    table = QTable.zeros(index.size, spec.num_actions, learning_rate=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    decay = config.epsilon_decay_fraction * config.episodes
    curve = []
    for k in range(config.episodes):
        frac = min(1.0, k / decay) if decay > 0 else 1.0
        eps = config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac
        state = initial_state(spec)
        total = 0.0
        while not is_terminal(spec, state):
            s = index.encode(state)
            feasible = feasible_actions(spec, state)
            if rng.random() < eps:
                action = feasible[int(rng.integers(len(feasible)))]
            else:
                mask = np.zeros(spec.num_actions, dtype=bool)
                mask[[action_index(spec, a) for a in feasible]] = True
                action = action_from_index(spec, greedy_action_index(table.values[s], mask))
            nxt, cost = step(spec, state, action, check=False)
            total += cost
            done = is_terminal(spec, nxt)
            tabular_q_update(
                table,
                s,
                action_index(spec, action),
                cost,
                None if done else index.encode(nxt),
                None if done else feasible_mask(spec, nxt),
            )
            state = nxt
        curve.append(total)
    return TabularQPolicy(table, index), curve

"""Deep Q-learning with replay memory, written directly against numpy.

The value approximator has one fully connected hidden layer and a linear
output with one unit per action. Forward and backward passes are explicit.
Q-values are expected costs, so every greedy choice is an argmin.

Training follows the episode loop of the algorithm: roll out an
epsilon-greedy episode, store every transition, then sample one batch and
take one semi-gradient step whose targets come from the weights frozen at
the start of that episode.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .env import (
    EnvSpec,
    SystemState,
    action_from_index,
    action_index,
    feasible_actions,
    feasible_mask,
    initial_state,
    is_terminal,
    run_episode,
    step,
)

WEIGHTS_MAGIC = "uav_aoi-qnetwork"
WEIGHTS_VERSION = 1


class TrainingAborted(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_grad(x):
    return (x > 0).astype(x.dtype)


def _tanh_grad(x):
    return 1.0 - np.tanh(x) ** 2


ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
}


# -- state encoding ------------------------------------------------------------


def encode_state(spec: EnvSpec, state: SystemState) -> np.ndarray:
    """Features in [0, 1]: per node (battery fraction, aoi / cap), then UAV x, y, slack / horizon."""
    feats = []
    for cfg, s in zip(spec.nodes, state.nodes):
        feats.append(s.energy_quanta / cfg.quanta_capacity if cfg.quanta_capacity else 0.0)
        feats.append(s.aoi / cfg.aoi_cap)
    nx, ny = spec.grid.num_cells_x, spec.grid.num_cells_y
    feats.append(state.uav.cell.ix / (nx - 1) if nx > 1 else 0.0)
    feats.append(state.uav.cell.iy / (ny - 1) if ny > 1 else 0.0)
    feats.append(max(state.uav.slack, 0) / spec.horizon)
    return np.array(feats)


def encoding_dim(spec: EnvSpec) -> int:
    return 2 * spec.num_nodes + 3


# -- network --------------------------------------------------------------------


@dataclass
class QNetwork:
    W1: np.ndarray  # (hidden, input)
    b1: np.ndarray
    W2: np.ndarray  # (output, hidden)
    b2: np.ndarray
    activation: str = "relu"

    PARAMS = ("W1", "b1", "W2", "b2")

    @classmethod
    def initialize(
        cls,
        input_dim: int,
        output_dim: int,
        hidden_dim: int = 200,
        activation: str = "relu",
        rng: np.random.Generator | None = None,
    ) -> "QNetwork":
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(rng)
        lim1 = np.sqrt(6.0 / (input_dim + hidden_dim))
        lim2 = np.sqrt(6.0 / (hidden_dim + output_dim))
        return cls(
            rng.uniform(-lim1, lim1, (hidden_dim, input_dim)),
            np.zeros(hidden_dim),
            rng.uniform(-lim2, lim2, (output_dim, hidden_dim)),
            np.zeros(output_dim),
            activation,
        )

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.W2.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "QNetwork":
        return QNetwork(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy(), self.activation)

    def forward_cached(self, x: np.ndarray):
        act, _ = ACTIVATIONS[self.activation]
        z1 = x @ self.W1.T + self.b1
        h = act(z1)
        return z1, h, h @ self.W2.T + self.b2

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())


def forward(net: QNetwork, features: np.ndarray) -> np.ndarray:
    """Q-values for one feature vector (1-D) or a batch (2-D, one row each)."""
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != net.input_dim:
        raise ValueError(f"expected {net.input_dim} features, got {features.shape[-1]}")
    return net.forward_cached(features)[2]


def save_weights(net: QNetwork, path) -> None:
    """Text dump: magic/version line, dims line, then W1, b1, W2, b2 row-major, one per line."""
    with open(path, "w") as fh:
        fh.write(f"{WEIGHTS_MAGIC} {WEIGHTS_VERSION}\n")
        fh.write(f"{net.input_dim} {net.hidden_dim} {net.output_dim} {net.activation}\n")
        for p in net.params():
            fh.write(" ".join(repr(float(v)) for v in p.ravel()) + "\n")


def load_weights(path) -> QNetwork:
    with open(path) as fh:
        magic, version = fh.readline().split()
        if magic != WEIGHTS_MAGIC or int(version) != WEIGHTS_VERSION:
            raise ValueError(f"unsupported weights file header: {magic} {version}")
        d, h, o, activation = fh.readline().split()
        d, h, o = int(d), int(h), int(o)
        arrays = [np.array([float(v) for v in fh.readline().split()]) for _ in range(4)]
    return QNetwork(arrays[0].reshape(h, d), arrays[1], arrays[2].reshape(o, h), arrays[3], activation)


# -- replay memory -------------------------------------------------------------


class Experience(NamedTuple):
    state_encoding: np.ndarray
    action_index: int
    cost: float
    next_state_encoding: np.ndarray
    terminal: bool
    next_feasible: np.ndarray  # boolean mask over actions, all False when terminal
    slot: int = 0


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray
    next_states: np.ndarray
    terminal: np.ndarray
    next_feasible: np.ndarray
    slots: np.ndarray

    @classmethod
    def from_experiences(cls, experiences: Sequence[Experience]) -> "Batch":
        cols = list(zip(*experiences))
        return cls(
            np.array(cols[0], dtype=float),
            np.array(cols[1], dtype=np.int64),
            np.array(cols[2], dtype=float),
            np.array(cols[3], dtype=float),
            np.array(cols[4], dtype=bool),
            np.array(cols[5], dtype=bool),
            np.array(cols[6], dtype=np.int64),
        )

    @property
    def size(self) -> int:
        return len(self.actions)


class ReplayMemory:
    """Fixed-capacity ring buffer; the oldest entries are overwritten first."""

    def __init__(self, capacity: int, state_dim: int, num_actions: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._states = np.zeros((capacity, state_dim))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._costs = np.zeros(capacity)
        self._next = np.zeros((capacity, state_dim))
        self._terminal = np.zeros(capacity, dtype=bool)
        self._mask = np.zeros((capacity, num_actions), dtype=bool)
        self._slots = np.zeros(capacity, dtype=np.int64)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, exp: Experience) -> None:
        i = self.cursor
        self._states[i] = exp.state_encoding
        self._actions[i] = exp.action_index
        self._costs[i] = exp.cost
        self._next[i] = exp.next_state_encoding
        self._terminal[i] = exp.terminal
        self._mask[i] = exp.next_feasible
        self._slots[i] = exp.slot
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __getitem__(self, i: int) -> Experience:
        """Entry ``i`` in insertion order among the stored ones (0 = oldest)."""
        if not 0 <= i < self.size:
            raise IndexError(i)
        j = (self.cursor - self.size + i) % self.capacity
        return Experience(
            self._states[j], int(self._actions[j]), float(self._costs[j]), self._next[j],
            bool(self._terminal[j]), self._mask[j], int(self._slots[j]),
        )

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay memory")
        return rng.integers(0, self.size, batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """``batch_size`` entries drawn uniformly with replacement."""
        j = (self.cursor - self.size + self.sample_indices(batch_size, rng)) % self.capacity
        return Batch(
            self._states[j], self._actions[j], self._costs[j], self._next[j],
            self._terminal[j], self._mask[j], self._slots[j],
        )


# -- targets and gradients ---------------------------------------------------------


def td_target(
    net_frozen: QNetwork, exp: Experience, feasible_next_mask: np.ndarray | None = None, gamma: float = 1.0
) -> float:
    """Cost plus the discounted best frozen Q-value over feasible next actions."""
    mask = exp.next_feasible if feasible_next_mask is None else feasible_next_mask
    if exp.terminal or not np.any(mask):
        return float(exp.cost)
    q = forward(net_frozen, exp.next_state_encoding)
    return float(exp.cost + gamma * q[np.asarray(mask, dtype=bool)].min())


def td_targets(net_frozen: QNetwork, batch: Batch, gamma: float = 1.0, target_rule: str = "terminal") -> np.ndarray:
    """Vectorized :func:`td_target`.

    ``target_rule="first_slot"`` drops the bootstrap term for experiences
    recorded at slot 1 instead of at terminal transitions (terminal
    successors have no feasible actions, so they bootstrap 0 either way).
    """
    q = forward(net_frozen, batch.next_states)
    masked = np.where(batch.next_feasible, q, np.inf).min(axis=1)
    has_next = batch.next_feasible.any(axis=1)
    if target_rule == "terminal":
        stop = batch.terminal | ~has_next
    elif target_rule == "first_slot":
        stop = (batch.slots == 1) | ~has_next
    else:
        raise ValueError(f"unknown target rule {target_rule!r}")
    return batch.costs + np.where(stop, 0.0, gamma * np.where(has_next, masked, 0.0))


def _as_batch(batch) -> Batch:
    return batch if isinstance(batch, Batch) else Batch.from_experiences(batch)


def loss(net: QNetwork, batch: Batch, targets: np.ndarray) -> float:
    """Mean of ``0.5 * (target - Q(s, a))**2`` with the targets held fixed."""
    q = forward(net, batch.states)[np.arange(batch.size), batch.actions]
    return float(0.5 * np.mean((targets - q) ** 2))


def gradients(net: QNetwork, batch: Batch, targets: np.ndarray) -> dict[str, np.ndarray]:
    """Semi-gradient of :func:`loss`; only the taken action's output carries error."""
    _, act_grad = ACTIVATIONS[net.activation]
    x = batch.states
    z1, h, q = net.forward_cached(x)
    rows = np.arange(batch.size)
    delta = targets - q[rows, batch.actions]
    dq = np.zeros_like(q)
    dq[rows, batch.actions] = -delta / batch.size
    dz = (dq @ net.W2) * act_grad(z1)
    return {"W1": dz.T @ x, "b1": dz.sum(axis=0), "W2": dq.T @ h, "b2": dq.sum(axis=0)}


def grad_step(
    net: QNetwork,
    batch,
    net_frozen: QNetwork,
    learning_rate: float,
    gamma: float = 1.0,
    target_rule: str = "terminal",
) -> QNetwork:
    """One SGD step on the batch; returns a new network, ``net`` is untouched."""
    batch = _as_batch(batch)
    if batch.size == 0:
        raise ValueError("empty batch")
    targets = td_targets(net_frozen, batch, gamma, target_rule)
    grads = gradients(net, batch, targets)
    if not all(np.isfinite(g).all() for g in grads.values()):
        raise TrainingAborted(
            "non-finite gradient",
            {
                "max_abs_target": float(np.nanmax(np.abs(targets))),
                "nonfinite": [k for k, g in grads.items() if not np.isfinite(g).all()],
                "max_abs_weight": max(float(np.nanmax(np.abs(p))) for p in net.params()),
            },
        )
    new = net.copy()
    for name in QNetwork.PARAMS:
        setattr(new, name, getattr(net, name) - learning_rate * grads[name])
    return new


# -- acting ---------------------------------------------------------------------------


def greedy_index(q: np.ndarray, mask: np.ndarray) -> int:
    return int(np.argmin(np.where(mask, q, np.inf)))


def select_action(net: QNetwork, spec: EnvSpec, state: SystemState, epsilon: float, rng, feasible=None):
    """Epsilon-greedy over the feasible set; greedy ties go to canonical order."""
    feasible = feasible_actions(spec, state) if feasible is None else feasible
    if epsilon > 0 and rng.random() < epsilon:
        return feasible[int(rng.integers(len(feasible)))]
    mask = np.zeros(spec.num_actions, dtype=bool)
    mask[[action_index(spec, a) for a in feasible]] = True
    return action_from_index(spec, greedy_index(forward(net, encode_state(spec, state)), mask))


class DQNPolicy:
    name = "dqn"

    def __init__(self, net: QNetwork, epsilon: float = 0.0):
        self.net = net
        self.epsilon = epsilon

    def act(self, spec, state, feasible, rng=None):
        return select_action(self.net, spec, state, self.epsilon, rng, feasible)


# -- training ---------------------------------------------------------------------------


@dataclass
class TrainerConfig:
    episodes: int = 5000
    batch_size: int = 64
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5
    learning_rate: float = 1e-3
    replay_capacity: int = 100_000
    seed: int = 0
    evaluation_interval: int = 0  # 0 disables periodic greedy evaluation
    hidden_dim: int = 200
    activation: str = "relu"
    gamma: float = 1.0
    steps_per_episode: int = 1
    target_rule: str = "terminal"

    def __post_init__(self):
        if not 0 <= self.epsilon_end <= self.epsilon_start <= 1:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.batch_size < 1 or self.episodes < 1 or self.steps_per_episode < 1:
            raise ValueError("batch_size, episodes and steps_per_episode must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.target_rule not in ("terminal", "first_slot"):
            raise ValueError(f"unknown target rule {self.target_rule!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainerConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown trainer options: {sorted(unknown)}")
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


def epsilon_at(config: TrainerConfig, episode: int) -> float:
    """Linear decay over the first ``epsilon_decay_fraction`` of episodes (0-based)."""
    decay = config.epsilon_decay_fraction * config.episodes
    frac = min(1.0, episode / decay) if decay > 0 else 1.0
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac


class CurvePoint(NamedTuple):
    episode: int
    total_cost: float
    epsilon: float
    wall_ms: float


@dataclass
class TrainResult:
    net: QNetwork
    curve: list[CurvePoint]
    evaluations: list[tuple[int, float]] = field(default_factory=list)

    def costs(self) -> np.ndarray:
        return np.array([p.total_cost for p in self.curve])

    def policy(self) -> DQNPolicy:
        return DQNPolicy(self.net)


def train(spec: EnvSpec, config: TrainerConfig = TrainerConfig()) -> TrainResult:
    rng = np.random.default_rng(config.seed)
    net = QNetwork.initialize(encoding_dim(spec), spec.num_actions, config.hidden_dim, config.activation, rng)
    memory = ReplayMemory(config.replay_capacity, encoding_dim(spec), spec.num_actions)
    curve: list[CurvePoint] = []
    evaluations = []
    start = time.perf_counter()
    for k in range(config.episodes):
        frozen = net.copy()
        eps = epsilon_at(config, k)
        state = initial_state(spec)
        total = 0.0
        while not is_terminal(spec, state):
            feasible = feasible_actions(spec, state)
            action = select_action(net, spec, state, eps, rng, feasible)
            nxt, cost = step(spec, state, action, check=False)
            total += cost
            done = is_terminal(spec, nxt)
            memory.push(
                Experience(
                    encode_state(spec, state), action_index(spec, action), cost,
                    encode_state(spec, nxt), done, feasible_mask(spec, nxt), state.slot,
                )
            )
            state = nxt
        for _ in range(config.steps_per_episode):
            batch = memory.sample(config.batch_size, rng)
            net = grad_step(net, batch, frozen, config.learning_rate, config.gamma, config.target_rule)
        curve.append(CurvePoint(k + 1, total, eps, (time.perf_counter() - start) * 1000.0))
        if config.evaluation_interval and (k + 1) % config.evaluation_interval == 0:
            evaluations.append((k + 1, run_episode(spec, DQNPolicy(net), 0)[0]))
    return TrainResult(net, curve, evaluations)

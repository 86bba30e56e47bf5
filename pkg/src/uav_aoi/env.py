"""Discrete-time UAV data-collection environment.

A UAV flies over a rectangular grid of cells from a start cell to a final
cell within ``horizon`` slots. In every slot it picks a movement
(N, S, E, W or I for "stay") and optionally schedules one ground node to
upload a fresh status packet. Each node runs on a finite battery split into
energy quanta; an upload costs the number of quanta needed to push the packet
through the line-of-sight channel at the UAV's current cell.

The per-slot cost is the weighted sum of the age-of-information (AoI) of all
nodes, and the episode ends as soon as the UAV reaches the final cell or the
horizon runs out.

All dynamics are pure functions of ``(EnvSpec, SystemState)``; nothing here
holds mutable state.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MOVEMENTS: tuple[str, ...] = ("N", "S", "E", "W", "I")
_DELTAS = {"N": (0, 1), "S": (0, -1), "E": (1, 0), "W": (-1, 0), "I": (0, 0)}

# Largest quanta count a single transmission may require before the
# transmission is treated as unreachable.
MAX_QUANTA = 2**31 - 1

# Target energy coefficient used to calibrate the reference gain: with the
# default radio, E_tx = 1e-7 J/m^2 * (h^2 + d^2).
_CALIBRATION_J_PER_M2 = 1e-7


class EnvError(Exception):
    """Base class for environment errors."""


class InfeasibleActionError(EnvError):
    """An action outside the feasible set was passed to :func:`step`."""


class UnreachableTransmissionError(EnvError):
    """A node cannot reach the UAV with any representable quanta count."""


class InvariantViolation(EnvError, RuntimeError):
    """Internal consistency check failed; indicates a bug or a bad spec."""


class Cell(NamedTuple):
    ix: int
    iy: int


class NodeState(NamedTuple):
    energy_quanta: int
    aoi: int


class UavState(NamedTuple):
    cell: Cell
    slack: int


class SystemState(NamedTuple):
    nodes: tuple[NodeState, ...]
    uav: UavState
    slot: int


class Action(NamedTuple):
    movement: str
    schedule: int = 0


class TraceStep(NamedTuple):
    state: SystemState
    action: Action
    cost: float


def _cell(value) -> Cell:
    ix, iy = value
    return Cell(int(ix), int(iy))


@dataclass(frozen=True)
class GridSpec:
    num_cells_x: int
    num_cells_y: int
    x_spacing: float = 100.0
    y_spacing: float = 100.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.num_cells_x < 1 or self.num_cells_y < 1:
            raise ValueError("grid needs at least one cell in each direction")
        if self.x_spacing <= 0 or self.y_spacing <= 0:
            raise ValueError("cell spacing must be positive")

    @property
    def num_cells(self) -> int:
        return self.num_cells_x * self.num_cells_y

    def contains(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.num_cells_x and 0 <= cell[1] < self.num_cells_y

    def center(self, cell: Cell) -> tuple[float, float]:
        """Planar coordinates of a cell center in meters."""
        return (
            self.origin[0] + cell[0] * self.x_spacing,
            self.origin[1] + cell[1] * self.y_spacing,
        )

    def cell_index(self, cell: Cell) -> int:
        return cell[0] + cell[1] * self.num_cells_x

    def cell_at(self, index: int) -> Cell:
        return Cell(index % self.num_cells_x, index // self.num_cells_x)

    def cells(self) -> list[Cell]:
        return [self.cell_at(i) for i in range(self.num_cells)]


def calibrated_ref_gain(
    noise_power_w: float, packet_bits: float, bandwidth_hz: float
) -> float:
    """Reference gain that makes the transmit energy ``1e-7 * d^2`` joules.

    With the default radio (1 MHz, 20 Mbit, -100 dBm) this is about 1.0486
    and reproduces 26 quanta at a 500 m offset and 5 quanta at 200 m for a
    1 mJ quantum and 100 m flight height.
    """
    return noise_power_w * (2.0 ** (packet_bits / bandwidth_hz) - 1.0) / _CALIBRATION_J_PER_M2


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass(frozen=True)
class RadioParams:
    bandwidth_hz: float = 1e6
    packet_bits: float = 20e6
    noise_power_w: float = 1e-13
    ref_gain: float | None = None
    uav_height_m: float = 100.0

    def __post_init__(self):
        if self.ref_gain is None:
            object.__setattr__(
                self,
                "ref_gain",
                calibrated_ref_gain(self.noise_power_w, self.packet_bits, self.bandwidth_hz),
            )
        for name in ("bandwidth_hz", "packet_bits", "noise_power_w", "ref_gain", "uav_height_m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class NodeConfig:
    cell: Cell
    battery_capacity_j: float
    quanta_capacity: int
    aoi_cap: int = 50
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "cell", _cell(self.cell))
        # quanta_capacity == 0 is allowed: such a node can never transmit.
        if self.quanta_capacity < 0:
            raise ValueError("quanta_capacity must be non-negative")
        if self.aoi_cap < 1:
            raise ValueError("aoi_cap must be at least 1")
        if not self.weight > 0:
            raise ValueError("weight must be positive")
        if not self.battery_capacity_j > 0:
            raise ValueError("battery_capacity_j must be positive")

    @classmethod
    def with_quanta(
        cls,
        cell,
        quanta_capacity: int,
        quantum_j: float = 1e-3,
        aoi_cap: int = 50,
        weight: float = 1.0,
    ) -> "NodeConfig":
        """Node whose battery holds ``quanta_capacity`` quanta of ``quantum_j`` joules."""
        battery = quantum_j * max(quanta_capacity, 1)
        return cls(_cell(cell), battery, quanta_capacity, aoi_cap, weight)


@dataclass(frozen=True)
class EnvSpec:
    grid: GridSpec
    radio: RadioParams
    nodes: tuple[NodeConfig, ...]
    horizon: int
    start_cell: Cell
    final_cell: Cell
    initial_aoi: tuple[int, ...] | None = None
    initial_quanta: tuple[int, ...] | None = None
    max_quanta: int = field(default=MAX_QUANTA, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "start_cell", _cell(self.start_cell))
        object.__setattr__(self, "final_cell", _cell(self.final_cell))
        M = len(self.nodes)
        if self.initial_aoi is None:
            object.__setattr__(self, "initial_aoi", (1,) * M)
        if self.initial_quanta is None:
            object.__setattr__(self, "initial_quanta", tuple(n.quanta_capacity for n in self.nodes))
        object.__setattr__(self, "initial_aoi", tuple(int(a) for a in self.initial_aoi))
        object.__setattr__(self, "initial_quanta", tuple(int(e) for e in self.initial_quanta))

        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        for name in ("start_cell", "final_cell"):
            if not self.grid.contains(getattr(self, name)):
                raise ValueError(f"{name} {getattr(self, name)} lies outside the grid")
        if manhattan_cells(self.start_cell, self.final_cell) > self.horizon:
            raise ValueError("final cell is unreachable within the horizon")
        if len(self.initial_aoi) != M or len(self.initial_quanta) != M:
            raise ValueError("initial_aoi and initial_quanta need one entry per node")
        for node, a, e in zip(self.nodes, self.initial_aoi, self.initial_quanta):
            if not self.grid.contains(node.cell):
                raise ValueError(f"node cell {node.cell} lies outside the grid")
            if not 1 <= a <= node.aoi_cap:
                raise ValueError(f"initial aoi {a} outside [1, {node.aoi_cap}]")
            if not 0 <= e <= node.quanta_capacity:
                raise ValueError(f"initial quanta {e} outside [0, {node.quanta_capacity}]")

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_actions(self) -> int:
        return len(MOVEMENTS) * (self.num_nodes + 1)

    @cached_property
    def quanta_table(self) -> np.ndarray:
        """Required quanta per (cell index, node); ``max_quanta + 1`` marks unreachable."""
        table = np.empty((self.grid.num_cells, self.num_nodes), dtype=np.int64)
        for c, cell in enumerate(self.grid.cells()):
            for m, node in enumerate(self.nodes):
                try:
                    gain = channel_gain(self.radio, self.grid, cell, node.cell)
                    table[c, m] = required_quanta(self.radio, node, gain, self.max_quanta)
                except UnreachableTransmissionError:
                    table[c, m] = self.max_quanta + 1
        table.setflags(write=False)
        return table

    def required_at(self, cell: Cell, node: int) -> int:
        """Quanta node ``node`` (0-based) needs to reach a UAV at ``cell``."""
        return int(self.quanta_table[self.grid.cell_index(cell), node])

    def can_transmit(self, state: SystemState, node: int) -> bool:
        need = self.required_at(state.uav.cell, node)
        return need <= self.max_quanta and state.nodes[node].energy_quanta >= need


def make_spec(
    grid_size: tuple[int, int],
    node_cells: Sequence,
    quanta_capacity: int | Sequence[int],
    horizon: int,
    start_cell,
    final_cell,
    aoi_cap: int = 50,
    spacing: float = 100.0,
    quantum_j: float = 1e-3,
    radio: RadioParams | None = None,
    **kwargs,
) -> EnvSpec:
    """Build an :class:`EnvSpec` with identical nodes and equal weights ``1/M``."""
    M = len(node_cells)
    if isinstance(quanta_capacity, int):
        quanta_capacity = [quanta_capacity] * M
    nodes = tuple(
        NodeConfig.with_quanta(c, e, quantum_j=quantum_j, aoi_cap=aoi_cap, weight=1.0 / M)
        for c, e in zip(node_cells, quanta_capacity)
    )
    return EnvSpec(
        grid=GridSpec(grid_size[0], grid_size[1], spacing, spacing),
        radio=radio or RadioParams(),
        nodes=nodes,
        horizon=horizon,
        start_cell=_cell(start_cell),
        final_cell=_cell(final_cell),
        **kwargs,
    )


def channel_gain(radio: RadioParams, grid: GridSpec, uav_cell: Cell, node_cell: Cell) -> float:
    ux, uy = grid.center(uav_cell)
    nx, ny = grid.center(node_cell)
    d2 = radio.uav_height_m**2 + (ux - nx) ** 2 + (uy - ny) ** 2
    return radio.ref_gain / d2


def required_quanta(
    radio: RadioParams, node: NodeConfig, gain: float, max_quanta: int = MAX_QUANTA
) -> int:
    """Integer number of quanta a node spends to deliver one packet.

    The ceiling is taken with a relative tolerance of 1e-9 so that energies
    that are an exact multiple of the quantum (up to float rounding) are not
    bumped to the next integer.
    """
    if not gain > 0:
        raise ValueError("gain must be positive")
    if node.quanta_capacity == 0:
        raise UnreachableTransmissionError("node has no battery quanta")
    try:
        energy_j = radio.noise_power_w / gain * (2.0 ** (radio.packet_bits / radio.bandwidth_hz) - 1.0)
        quanta = node.quanta_capacity / node.battery_capacity_j * energy_j
    except OverflowError as exc:
        raise UnreachableTransmissionError("transmit energy overflows") from exc
    if not math.isfinite(quanta) or quanta > max_quanta:
        raise UnreachableTransmissionError(f"needs {quanta:.3g} quanta (max {max_quanta})")
    return max(0, math.ceil(quanta - 1e-9 * max(1.0, quanta)))


def move_cell(grid: GridSpec, cell: Cell, movement: str) -> Cell:
    dx, dy = _DELTAS[movement]
    target = Cell(cell[0] + dx, cell[1] + dy)
    return target if grid.contains(target) else Cell(*cell)


def manhattan_cells(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def slack_of(spec: EnvSpec, cell: Cell, slot: int) -> int:
    """Remaining slots (``slot`` included) minus the moves still needed."""
    return (spec.horizon - slot + 1) - manhattan_cells(cell, spec.final_cell)


def initial_state(spec: EnvSpec) -> SystemState:
    nodes = tuple(NodeState(e, a) for e, a in zip(spec.initial_quanta, spec.initial_aoi))
    return SystemState(nodes, UavState(spec.start_cell, slack_of(spec, spec.start_cell, 1)), 1)


def is_terminal(spec: EnvSpec, state: SystemState) -> bool:
    return state.uav.cell == spec.final_cell or state.slot > spec.horizon


def all_actions(spec: EnvSpec) -> list[Action]:
    """Every action in canonical order: movements (N,S,E,W,I) outer, schedules inner."""
    return [Action(v, w) for v in MOVEMENTS for w in range(spec.num_nodes + 1)]


def action_index(spec: EnvSpec, action: Action) -> int:
    return MOVEMENTS.index(action.movement) * (spec.num_nodes + 1) + action.schedule


def action_from_index(spec: EnvSpec, index: int) -> Action:
    v, w = divmod(index, spec.num_nodes + 1)
    return Action(MOVEMENTS[v], w)


def feasible_movements(spec: EnvSpec, state: SystemState) -> list[str]:
    remaining = spec.horizon - state.slot
    cell = state.uav.cell
    return [
        v
        for v in MOVEMENTS
        if manhattan_cells(move_cell(spec.grid, cell, v), spec.final_cell) <= remaining
    ]


def feasible_schedules(spec: EnvSpec, state: SystemState) -> list[int]:
    return [0] + [m + 1 for m in range(spec.num_nodes) if spec.can_transmit(state, m)]


def feasible_actions(spec: EnvSpec, state: SystemState) -> tuple[Action, ...]:
    """Actions allowed in ``state``, in canonical order.

    A movement is allowed when the final cell stays reachable in the slots
    left after this one; node ``m`` may be scheduled when its battery covers
    the quanta needed at the UAV's current cell.
    """
    if is_terminal(spec, state):
        raise InfeasibleActionError("no actions are defined at a terminal state")
    schedules = feasible_schedules(spec, state)
    actions = tuple(Action(v, w) for v in feasible_movements(spec, state) for w in schedules)
    if not actions:
        raise InvariantViolation(f"empty feasible set at {state}")
    return actions


def feasible_mask(spec: EnvSpec, state: SystemState) -> np.ndarray:
    """Boolean mask over :func:`all_actions` order."""
    mask = np.zeros(spec.num_actions, dtype=bool)
    if is_terminal(spec, state):
        return mask
    for a in feasible_actions(spec, state):
        mask[action_index(spec, a)] = True
    return mask


def instantaneous_cost(spec: EnvSpec, state: SystemState) -> float:
    return sum(node.weight * s.aoi for node, s in zip(spec.nodes, state.nodes))


def step(
    spec: EnvSpec, state: SystemState, action: Action, check: bool = True
) -> tuple[SystemState, float]:
    """Advance one slot. Returns the next state and the cost of ``state``."""
    if check and action not in feasible_actions(spec, state):
        raise InfeasibleActionError(f"{action} is not feasible at {state}")
    cell = state.uav.cell
    nodes = []
    for m, (cfg, s) in enumerate(zip(spec.nodes, state.nodes)):
        if action.schedule == m + 1:
            # energy is charged at the UAV's cell during this slot, before it moves
            nodes.append(NodeState(s.energy_quanta - spec.required_at(cell, m), 1))
        else:
            nodes.append(NodeState(s.energy_quanta, min(cfg.aoi_cap, s.aoi + 1)))
    next_cell = move_cell(spec.grid, cell, action.movement)
    next_slot = state.slot + 1
    nxt = SystemState(tuple(nodes), UavState(next_cell, slack_of(spec, next_cell, next_slot)), next_slot)
    return nxt, instantaneous_cost(spec, state)


def run_episode(spec: EnvSpec, policy, rng_seed=None) -> tuple[float, list[TraceStep]]:
    """Roll ``policy`` out from the initial state until termination.

    ``policy`` needs an ``act(spec, state, feasible, rng)`` method; an
    optional ``reset()`` is called first. ``rng_seed`` may be an int or a
    ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(rng_seed)
    if hasattr(policy, "reset"):
        policy.reset()
    state = initial_state(spec)
    total = 0.0
    trace: list[TraceStep] = []
    while not is_terminal(spec, state):
        feasible = feasible_actions(spec, state)
        action = policy.act(spec, state, feasible, rng)
        if action not in feasible:
            raise InfeasibleActionError(f"policy returned {action} at {state}")
        nxt, cost = step(spec, state, action, check=False)
        trace.append(TraceStep(state, action, cost))
        total += cost
        state = nxt
    return total, trace


def trace_header(spec: EnvSpec) -> list[str]:
    cols = ["slot", "uav_ix", "uav_iy", "movement", "schedule", "cost"]
    for m in range(1, spec.num_nodes + 1):
        cols += [f"aoi_{m}", f"energy_{m}"]
    return cols


def trace_rows(trace: Iterable[TraceStep]) -> list[list]:
    rows = []
    for state, action, cost in trace:
        row = [state.slot, state.uav.cell.ix, state.uav.cell.iy, action.movement, action.schedule, repr(cost)]
        for node in state.nodes:
            row += [node.aoi, node.energy_quanta]
        rows.append(row)
    return rows


def write_trace_csv(spec: EnvSpec, trace: Sequence[TraceStep], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_header(spec))
        writer.writerows(trace_rows(trace))

"""Scenario catalog, policy comparison runs and CSV reporting.

Full-scale scenarios live on the 11 x 11 grid (start (0, 5), final
(10, 5), 1 mJ quanta, AoI cap 50). Each has a ``-micro`` twin small enough
for exact DP and for CI; the full-scale ones are opt-in long runs.

Scenario 1 uses a horizon of 10 slots, the minimum needed to fly straight
from start to final, so the trajectory is forced and only scheduling is
learned. Costs accrue on slots 1 .. arrival.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import dp
from .dqn import TrainerConfig, train
from .env import EnvSpec, NodeConfig, make_spec, run_episode
from .policies import DistanceBasedPolicy, RandomWalkPolicy
from .qlearning import TabularConfig, train_tabular

POLICY_NAMES = ("distance", "random", "dp", "tabular-q", "dqn")

DENSE_ANCHORS = ((4, 4), (5, 6), (6, 4))
SPARSE_ANCHORS = ((0, 0), (5, 10), (0, 10))

METRIC_COLUMNS = ("policy", "sweep_value", "mean_total", "mean_per_slot", "std", "episodes")


class UnknownPolicy(KeyError):
    pass


@dataclass(frozen=True)
class Sweep:
    variable: str  # node_y | quanta_capacity | horizon | density
    values: tuple


@dataclass
class Scenario:
    name: str
    env: EnvSpec
    policies: tuple[str, ...]
    eval_episodes: int = 1000
    sweep: Sweep | None = None
    train_config: TrainerConfig | None = None
    tabular_config: TabularConfig | None = None
    density_anchors: tuple = (DENSE_ANCHORS, SPARSE_ANCHORS)
    notes: str = ""

    def sweep_specs(self) -> list[tuple[object, EnvSpec]]:
        """``(sweep_value, EnvSpec)`` pairs; a single ``(None, env)`` without a sweep."""
        if self.sweep is None:
            return [(None, self.env)]
        if self.sweep.variable == "density":
            specs = density_sweep_specs(self, len(self.sweep.values))
            return list(zip(self.sweep.values, specs))
        return [(v, apply_sweep(self.env, self.sweep.variable, v)) for v in self.sweep.values]


def _replace_nodes(env: EnvSpec, nodes, **kwargs) -> EnvSpec:
    return dataclasses.replace(env, nodes=tuple(nodes), initial_aoi=None, initial_quanta=None, **kwargs)


def apply_sweep(env: EnvSpec, variable: str, value) -> EnvSpec:
    if variable == "node_y":
        nodes = [dataclasses.replace(n, cell=(n.cell.ix, int(value))) for n in env.nodes]
        return _replace_nodes(env, nodes)
    if variable == "quanta_capacity":
        nodes = [
            NodeConfig.with_quanta(n.cell, int(value), n.battery_capacity_j / max(n.quanta_capacity, 1), n.aoi_cap, n.weight)
            for n in env.nodes
        ]
        return _replace_nodes(env, nodes)
    if variable == "horizon":
        return dataclasses.replace(env, horizon=int(value))
    raise ValueError(f"unknown sweep variable {variable!r}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def density_sweep_specs(base: Scenario, steps: int, anchors=None) -> list[EnvSpec]:
    """Move every node linearly from its dense anchor to its sparse anchor.

    Intermediate cells are rounded half-up to the nearest cell and clipped to
    the grid; the two endpoints are exact.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    dense, sparse = anchors or base.density_anchors
    grid = base.env.grid
    out = []
    for k in range(steps):
        t = k / (steps - 1)
        cells = []
        for (x0, y0), (x1, y1) in zip(dense, sparse):
            ix = min(max(_round_half_up(x0 + t * (x1 - x0)), 0), grid.num_cells_x - 1)
            iy = min(max(_round_half_up(y0 + t * (y1 - y0)), 0), grid.num_cells_y - 1)
            cells.append((ix, iy))
        nodes = [dataclasses.replace(n, cell=c) for n, c in zip(base.env.nodes, cells)]
        out.append(_replace_nodes(base.env, nodes))
    return out


# -- catalog ------------------------------------------------------------------------------

_FULL = dict(grid_size=(11, 11), start_cell=(0, 5), final_cell=(10, 5), aoi_cap=50)
_MICRO_DQN = TrainerConfig(episodes=6000, learning_rate=1e-2, steps_per_episode=8)


def builtin_scenarios() -> list[Scenario]:
    full_dqn = TrainerConfig(episodes=50_000)
    baselines = ("dqn", "distance", "random")
    three = [(5, 10), (0, 0), (0, 10)]
    s = [
        Scenario(
            "scenario1",
            make_spec(node_cells=[(5, 5)], quanta_capacity=26, horizon=10, **_FULL),
            ("dqn",),
            sweep=Sweep("node_y", tuple(range(5, 11))),
            train_config=full_dqn,
            notes="one node at (5, y); horizon equals the straight-line flight time",
        ),
        Scenario(
            "scenario2",
            make_spec(node_cells=[(2, 10), (8, 10)], quanta_capacity=5, horizon=16, **_FULL),
            baselines,
            train_config=full_dqn,
        ),
        Scenario(
            "scenario3",
            make_spec(node_cells=three, quanta_capacity=1, horizon=100, **_FULL),
            baselines,
            sweep=Sweep("quanta_capacity", tuple(2**k for k in range(11))),
            train_config=full_dqn,
        ),
        Scenario(
            "scenario4",
            make_spec(node_cells=three, quanta_capacity=100, horizon=100, **_FULL),
            baselines,
            sweep=Sweep("horizon", tuple(range(10, 101, 10))),
            train_config=full_dqn,
        ),
        Scenario(
            "scenario5",
            make_spec(node_cells=list(DENSE_ANCHORS), quanta_capacity=100, horizon=100, **_FULL),
            baselines,
            sweep=Sweep("density", tuple(range(6))),
            train_config=full_dqn,
        ),
    ]
    micro = dict(grid_size=(7, 7), start_cell=(0, 3), final_cell=(6, 3))
    small = dict(grid_size=(5, 5), start_cell=(0, 2), final_cell=(4, 2))
    everything = ("dp", "dqn", "tabular-q", "distance", "random")
    s += [
        Scenario(
            "scenario1-micro",
            make_spec(node_cells=[(3, 3)], quanta_capacity=10, horizon=6, aoi_cap=50, **micro),
            ("dqn", "dp"),
            sweep=Sweep("node_y", (3, 4, 5, 6)),
            train_config=_MICRO_DQN,
            notes="10 quanta reach the UAV from three cells away",
        ),
        Scenario(
            "scenario2-micro",
            make_spec(node_cells=[(2, 5), (4, 5)], quanta_capacity=5, horizon=12, aoi_cap=12, **micro),
            everything,
            train_config=_MICRO_DQN,
            tabular_config=TabularConfig(episodes=5000),
        ),
        Scenario(
            "scenario3-micro",
            make_spec(node_cells=[(2, 4), (0, 0)], quanta_capacity=1, horizon=8, aoi_cap=8, **small),
            ("dp", "distance", "random"),
            sweep=Sweep("quanta_capacity", (1, 2, 4, 8, 16)),
        ),
        Scenario(
            "scenario4-micro",
            make_spec(node_cells=[(2, 4), (0, 0)], quanta_capacity=8, horizon=4, aoi_cap=10, **small),
            ("dp", "distance", "random"),
            sweep=Sweep("horizon", (4, 6, 8, 10)),
        ),
        Scenario(
            "scenario5-micro",
            make_spec(node_cells=[(2, 3), (2, 1)], quanta_capacity=8, horizon=8, aoi_cap=8, **small),
            ("dp", "distance", "random"),
            sweep=Sweep("density", tuple(range(4))),
            density_anchors=(((2, 3), (2, 1)), ((0, 4), (4, 0))),
        ),
    ]
    return s


def get_scenario(name: str) -> Scenario:
    for sc in builtin_scenarios():
        if sc.name == name:
            return sc
    raise KeyError(f"unknown scenario {name!r}; known: {[s.name for s in builtin_scenarios()]}")


# -- comparison runs --------------------------------------------------------------------


@dataclass
class MetricRow:
    policy: str
    sweep_value: object
    mean_total: float
    mean_per_slot: float
    std: float
    episodes: int
    totals: list[float] = field(default_factory=list, repr=False)


@dataclass
class MetricReport:
    scenario: str
    sweep_variable: str | None
    rows: list[MetricRow] = field(default_factory=list)
    curves: dict = field(default_factory=dict)  # (policy, sweep_value) -> [(episode, total_cost, epsilon)]

    def row(self, policy: str, sweep_value=None) -> MetricRow:
        for r in self.rows:
            if r.policy == policy and r.sweep_value == sweep_value:
                return r
        raise KeyError((policy, sweep_value))

    def means(self, policy: str) -> list[float]:
        return [r.mean_total for r in self.rows if r.policy == policy]


def build_policy(name: str, env: EnvSpec, scenario: Scenario, seed: int):
    """Return ``(policy, learning_curve_or_None)``; learners are trained here."""
    if name == "distance":
        return DistanceBasedPolicy(), None
    if name == "random":
        return RandomWalkPolicy(), None
    if name == "dp":
        return dp.solve(env).policy(), None
    if name == "dqn":
        cfg = dataclasses.replace(scenario.train_config or TrainerConfig(), seed=seed)
        result = train(env, cfg)
        return result.policy(), [(p.episode, p.total_cost, p.epsilon) for p in result.curve]
    if name == "tabular-q":
        cfg = dataclasses.replace(scenario.tabular_config or TabularConfig(), seed=seed)
        policy, curve = train_tabular(env, cfg)
        return policy, [(k + 1, c, None) for k, c in enumerate(curve)]
    raise UnknownPolicy(name)


def evaluate(env: EnvSpec, policy, episodes: int, rng) -> MetricRow:
    totals, per_slot = [], []
    for _ in range(episodes):
        total, trace = run_episode(env, policy, rng)
        totals.append(total)
        per_slot.append(total / len(trace) if trace else 0.0)
    return MetricRow(
        getattr(policy, "name", type(policy).__name__),
        None,
        float(np.mean(totals)),
        float(np.mean(per_slot)),
        float(np.std(totals)),
        episodes,
        totals,
    )


def run_comparison(
    scenario: Scenario,
    seed: int = 0,
    episodes: int | None = None,
    progress: Callable[[str], None] | None = None,
) -> MetricReport:
    """Train (if needed) and evaluate every policy at every sweep point.

    ``episodes`` overrides ``scenario.eval_episodes``. Every random draw is
    derived from ``seed``, the sweep position and the policy position.
    """
    for name in scenario.policies:
        if name not in POLICY_NAMES:
            raise UnknownPolicy(name)
    n_eval = episodes or scenario.eval_episodes
    report = MetricReport(scenario.name, scenario.sweep.variable if scenario.sweep else None)
    for i, (value, env) in enumerate(scenario.sweep_specs()):
        for j, name in enumerate(scenario.policies):
            if progress:
                progress(f"{scenario.name} {name} sweep={value}")
            policy, curve = build_policy(name, env, scenario, seed=int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0]))
            row = evaluate(env, policy, n_eval, np.random.default_rng([seed, i, j]))
            row.policy, row.sweep_value = name, value
            report.rows.append(row)
            if curve is not None:
                report.curves[(name, value)] = curve
    return report


# -- CSV output ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_metrics_csv(report: MetricReport, path) -> None:
    _write(
        Path(path),
        METRIC_COLUMNS,
        [(r.policy, r.sweep_value, r.mean_total, r.mean_per_slot, r.std, r.episodes) for r in report.rows],
    )


def write_curves_csv(report: MetricReport, path) -> None:
    rows = []
    for (policy, value), curve in report.curves.items():
        rows += [(policy, value, ep, cost, eps) for ep, cost, eps in curve]
    _write(Path(path), ("policy", "sweep_value", "episode", "total_cost", "epsilon"), rows)


def moving_average(values, window: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if len(values) < window:
        return np.array([])
    return np.convolve(values, np.ones(window) / window, mode="valid")


def write_plot_data(report: MetricReport, out_dir, window: int = 500) -> list[Path]:
    """Figure-analog tables: a policy-by-sweep table and smoothed learning curves."""
    out_dir = Path(out_dir)
    written = []
    policies = list(dict.fromkeys(r.policy for r in report.rows))
    values = list(dict.fromkeys(r.sweep_value for r in report.rows))
    path = out_dir / f"{report.scenario}_sweep.csv"
    _write(
        path,
        [report.sweep_variable or "sweep_value"] + [f"{p}_mean_total" for p in policies],
        [[v] + [report.row(p, v).mean_total for p in policies] for v in values],
    )
    written.append(path)
    if report.curves:
        path = out_dir / f"{report.scenario}_curve.csv"
        rows = []
        for (policy, value), curve in report.curves.items():
            w = min(window, len(curve))
            ma = moving_average([c[1] for c in curve], w)
            rows += [(policy, value, k + w, m) for k, m in enumerate(ma)]
        _write(path, ("policy", "sweep_value", "episode", f"moving_avg_{window}"), rows)
        written.append(path)
    return written


def write_report(report: MetricReport, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = out_dir / "metrics.csv"
    write_metrics_csv(report, metrics)
    written = [metrics]
    if report.curves:
        curves = out_dir / "curves.csv"
        write_curves_csv(report, curves)
        written.append(curves)
    return written + write_plot_data(report, out_dir)

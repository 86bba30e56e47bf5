"""TOML configuration files for environments, trainers and scenarios.

Layout (every table except ``[grid]`` and ``[[nodes]]`` is optional)::

    horizon = 16
    start_cell = [0, 5]
    final_cell = [10, 5]

    [grid]
    num_cells_x = 11
    num_cells_y = 11
    x_spacing = 100.0        # meters
    y_spacing = 100.0
    origin = [0.0, 0.0]

    [radio]
    bandwidth_hz = 1e6
    packet_bits = 2e7
    noise_power_dbm = -100   # or noise_power_w
    uav_height_m = 100.0
    # ref_gain = 1.048575    # default: calibrated, see env.calibrated_ref_gain

    [[nodes]]
    cell = [2, 10]
    quanta_capacity = 5
    quantum_j = 1e-3         # or battery_capacity_j
    aoi_cap = 50
    weight = 0.5             # default 1/M
    initial_aoi = 1          # default 1
    initial_quanta = 5       # default quanta_capacity

    [trainer]                # TrainerConfig fields
    episodes = 5000

    [scenario]               # only for `compare --config`
    name = "custom"
    policies = ["dqn", "distance", "random"]
    eval_episodes = 1000
    sweep_variable = "horizon"
    sweep_values = [10, 20, 30]
"""

from __future__ import annotations

import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dqn import TrainerConfig
from .env import Cell, EnvSpec, GridSpec, NodeConfig, RadioParams, dbm_to_watts
from .harness import Scenario, Sweep


def read_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def env_spec_from_dict(data: dict) -> EnvSpec:
    g = data["grid"]
    grid = GridSpec(
        int(g["num_cells_x"]),
        int(g["num_cells_y"]),
        float(g.get("x_spacing", 100.0)),
        float(g.get("y_spacing", 100.0)),
        tuple(float(v) for v in g.get("origin", (0.0, 0.0))),
    )
    r = dict(data.get("radio", {}))
    if "noise_power_dbm" in r:
        r["noise_power_w"] = dbm_to_watts(float(r.pop("noise_power_dbm")))
    radio = RadioParams(**{k: float(v) for k, v in r.items()})

    raw_nodes = data["nodes"]
    M = len(raw_nodes)
    nodes, aoi0, quanta0 = [], [], []
    for n in raw_nodes:
        q = int(n["quanta_capacity"])
        if "battery_capacity_j" in n:
            battery = float(n["battery_capacity_j"])
        else:
            battery = float(n.get("quantum_j", 1e-3)) * max(q, 1)
        nodes.append(
            NodeConfig(Cell(*n["cell"]), battery, q, int(n.get("aoi_cap", 50)), float(n.get("weight", 1.0 / M)))
        )
        aoi0.append(int(n.get("initial_aoi", 1)))
        quanta0.append(int(n.get("initial_quanta", q)))
    return EnvSpec(
        grid=grid,
        radio=radio,
        nodes=tuple(nodes),
        horizon=int(data["horizon"]),
        start_cell=Cell(*data["start_cell"]),
        final_cell=Cell(*data["final_cell"]),
        initial_aoi=tuple(aoi0),
        initial_quanta=tuple(quanta0),
    )


def load_env_spec(path) -> EnvSpec:
    return env_spec_from_dict(read_toml(path))


def load_trainer_config(path) -> TrainerConfig:
    data = read_toml(path)
    return TrainerConfig.from_dict(data.get("trainer", data))


def load_scenario(path) -> Scenario:
    data = read_toml(path)
    sc = data.get("scenario", {})
    sweep = None
    if "sweep_variable" in sc:
        sweep = Sweep(sc["sweep_variable"], tuple(sc["sweep_values"]))
    return Scenario(
        name=sc.get("name", "custom"),
        env=env_spec_from_dict(data),
        policies=tuple(sc.get("policies", ("distance", "random"))),
        eval_episodes=int(sc.get("eval_episodes", 1000)),
        sweep=sweep,
        train_config=TrainerConfig.from_dict(data["trainer"]) if "trainer" in data else None,
    )

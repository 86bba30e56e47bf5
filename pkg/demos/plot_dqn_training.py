"""
Training the deep Q-network
===========================

A one-hidden-layer network learns Q-values from replayed transitions. On a
7 x 7 instance with two nodes we compare it against the exact optimum.
"""

import dataclasses

from uav_aoi import dp
from uav_aoi.dqn import train
from uav_aoi.env import run_episode
from uav_aoi.harness import get_scenario, moving_average

scenario = get_scenario("scenario2-micro")
spec = scenario.env
config = dataclasses.replace(scenario.train_config, episodes=3000)

result = train(spec, config)
curve = moving_average(result.costs(), 250)
for k in range(0, len(curve), 500):
    print(f"episode {k + 250:>5d}: moving average {curve[k]:.2f}")

# %%
# Play the learned policy greedily and compare with backward induction.
greedy, _ = run_episode(spec, result.policy(), 0)
print(f"dqn greedy episode: {greedy}   optimum: {dp.solve(spec).initial_value}")
